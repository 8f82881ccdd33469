// SPDX-License-Identifier: Apache-2.0
//
// mpcc - multi-link multipath cluster identification and characterization
// Copyright (C) 2026 The mpcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MPCC_SYNTH_HPP
#define MPCC_SYNTH_HPP

#include "mpcc/clusterstats.hpp"
#include "mpcc/mcd.hpp"
#include "mpcc/tracking.hpp"
#include "mpcc/visibility.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace mpcc
{

// Derives independent stream seeds from a master seed (splitmix64 finaliser)
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------------------------
// Scenes with planted interacting-object groups

struct SceneConfig
{
    std::uint64_t seed = 1;
    Vec3 room_min = Vec3(0.0, 0.0, 0.0);
    Vec3 room_max = Vec3(40.0, 30.0, 4.0);

    // panels on a line along +x
    int panels = 8;
    double panel_spacing = 0.6;
    Vec3 panel_origin = Vec3(17.0, 0.5, 2.5);

    // UE route along +x
    int snapshots = 50;
    double ue_step = 0.24;
    Vec3 ue_start = Vec3(14.0, 14.0, 1.2);

    int groups = 5;
    double min_group_spacing = 10.0; // m
    double min_clearance = 1.5;      // panel-to-group segments keep this distance from other groups
    double min_range = 3.0;          // group distance to panels and UE route

    int mpcs_per_link = 200;
    double io_jitter = 0.1;        // m, Gaussian, truncated at io_jitter_max
    double io_jitter_max = 0.25;   // m
    double delay_jitter = 0.5e-9;  // s
    double power_jitter_db = 2.0;

    int blob_points = 150;
    double blob_radius = 0.25;
    int noise_points = 400;

    // restrict each group to a contiguous panel range and snapshot range
    bool partial_visibility = true;
};

struct IoGroup
{
    Vec3 center = Vec3::Zero();
    double power_db = 0.0;
    double weight = 1.0; // relative MPC budget
    int panel_first = 0, panel_last = 0;       // panel index range
    int snapshot_first = 0, snapshot_last = 0; // snapshot index range
};

struct SyntheticScene
{
    SceneConfig config;
    std::vector<Panel> panels;
    std::vector<int> snapshot_ids;
    std::vector<Vec3> trajectory; // UE position per snapshot
    std::vector<IoGroup> groups;
    std::vector<Vec3> cloud;
};

struct SyntheticMpcs
{
    SyntheticScene scene;
    std::vector<MpcRecord> mpcs;
    std::vector<int> labels;               // planted group per MPC
    std::vector<Interaction> truth;        // planted IO (jittered) and exact partial delay per MPC
    std::vector<double> separation_ratio;  // per snapshot: min inter-group MCD / max intra-group MCD
};

namespace detail
{
inline double segment_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b)
{
    const Vec3 ab = b - a;
    if (ab.squaredNorm() == 0.0)
        return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

inline Vec3 uniform_in_box(std::mt19937_64 &rng, const Vec3 &lo, const Vec3 &hi)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng), y = u(rng), z = u(rng);
    return lo + Vec3(x, y, z).cwiseProduct(hi - lo);
}

inline Vec3 uniform_in_ball(std::mt19937_64 &rng, double radius)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (true)
    {
        const double x = u(rng), y = u(rng), z = u(rng);
        const Vec3 v(x, y, z);
        if (v.squaredNorm() <= 1.0)
            return radius * v;
    }
}

inline int uniform_int(std::mt19937_64 &rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double wrapped_azimuth(double az)
{
    return az >= kPi ? az - 2.0 * kPi : az;
}
} // namespace detail

inline SyntheticScene gen_scene(const SceneConfig &cfg)
{
    if (cfg.panels < 1 || cfg.snapshots < 1 || cfg.groups < 1 || cfg.mpcs_per_link < 1)
        throw Error(ErrorCode::config, "gen_scene: panels, snapshots, groups and mpcs_per_link must be >= 1");
    SyntheticScene s;
    s.config = cfg;
    for (int k = 0; k < cfg.panels; ++k)
        s.panels.push_back({k + 1, cfg.panel_origin + Vec3(k * cfg.panel_spacing, 0.0, 0.0)});
    for (int n = 0; n < cfg.snapshots; ++n)
    {
        s.snapshot_ids.push_back(n + 1);
        s.trajectory.push_back(cfg.ue_start + Vec3(n * cfg.ue_step, 0.0, 0.0));
    }

    std::mt19937_64 rng(derive_seed(cfg.seed, 0));
    const Vec3 margin(1.0, 1.0, 0.5);
    const Vec3 lo = cfg.room_min + margin, hi = cfg.room_max - margin;
    constexpr int max_attempts = 2000, max_restarts = 200;
    for (int restart = 0; restart < max_restarts && int(s.groups.size()) < cfg.groups; ++restart)
    {
        s.groups.clear();
        for (int g = 0; g < cfg.groups; ++g)
        {
            bool placed = false;
            for (int attempt = 0; attempt < max_attempts && !placed; ++attempt)
            {
                const Vec3 c = detail::uniform_in_box(rng, lo, hi);
                bool ok = true;
                for (const auto &o : s.groups)
                    ok = ok && (c - o.center).norm() >= cfg.min_group_spacing;
                for (const auto &p : s.panels)
                    ok = ok && (c - p.position).norm() >= cfg.min_range;
                ok = ok && detail::segment_distance(c, s.trajectory.front(), s.trajectory.back()) >= cfg.min_range;
                for (const auto &p : s.panels)
                    for (const auto &o : s.groups)
                    {
                        ok = ok && detail::segment_distance(o.center, p.position, c) >= cfg.min_clearance;
                        ok = ok && detail::segment_distance(c, p.position, o.center) >= cfg.min_clearance;
                    }
                if (!ok)
                    continue;
                IoGroup grp;
                grp.center = c;
                grp.power_db = std::uniform_real_distribution<double>(-10.0, 0.0)(rng);
                grp.weight = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
                grp.panel_first = 0;
                grp.panel_last = cfg.panels - 1;
                grp.snapshot_first = 0;
                grp.snapshot_last = cfg.snapshots - 1;
                if (cfg.partial_visibility)
                {
                    const int kl = detail::uniform_int(rng, std::max(1, cfg.panels / 2), cfg.panels);
                    grp.panel_first = detail::uniform_int(rng, 0, cfg.panels - kl);
                    grp.panel_last = grp.panel_first + kl - 1;
                    const int nl = detail::uniform_int(rng, std::max(1, cfg.snapshots / 3), cfg.snapshots);
                    grp.snapshot_first = detail::uniform_int(rng, 0, cfg.snapshots - nl);
                    grp.snapshot_last = grp.snapshot_first + nl - 1;
                }
                s.groups.push_back(grp);
                placed = true;
            }
            if (!placed)
                break;
        }
    }
    if (int(s.groups.size()) < cfg.groups)
        throw Error(ErrorCode::config, "gen_scene: cannot place IO groups with the requested spacing");

    for (const auto &g : s.groups)
        for (int i = 0; i < cfg.blob_points; ++i)
            s.cloud.push_back(g.center + detail::uniform_in_ball(rng, cfg.blob_radius));
    for (int i = 0; i < cfg.noise_points; ++i)
        s.cloud.push_back(detail::uniform_in_box(rng, cfg.room_min, cfg.room_max));
    return s;
}

// Groups visible on the link (panel index k, snapshot index n); never empty
inline std::vector<std::size_t> visible_groups(const SyntheticScene &s, int k, int n)
{
    std::vector<std::size_t> vis;
    for (std::size_t g = 0; g < s.groups.size(); ++g)
    {
        const auto &grp = s.groups[g];
        if (k >= grp.panel_first && k <= grp.panel_last && n >= grp.snapshot_first && n <= grp.snapshot_last)
            vis.push_back(g);
    }
    if (vis.empty())
    {
        std::size_t best = 0;
        for (std::size_t g = 1; g < s.groups.size(); ++g)
            if ((s.groups[g].center - s.panels[std::size_t(k)].position).norm() <
                (s.groups[best].center - s.panels[std::size_t(k)].position).norm())
                best = g;
        vis.push_back(best);
    }
    return vis;
}

// Minimum inter-group over maximum intra-group MCD of interactions sharing one snapshot
inline double separation_ratio(std::span<const Interaction> its, std::span<const int> labels, double zeta = 1.0)
{
    if (its.empty())
        return std::numeric_limits<double>::infinity();
    const auto ctx = build_context(its, zeta);
    double intra = 0.0, inter = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < its.size(); ++i)
        for (std::size_t j = i + 1; j < its.size(); ++j)
        {
            const double d = mcd_total(mcd_point(its[i]), mcd_point(its[j]), ctx);
            if (labels[i] == labels[j])
                intra = std::max(intra, d);
            else
                inter = std::min(inter, d);
        }
    return intra > 0.0 ? inter / intra : std::numeric_limits<double>::infinity();
}

// MPC records for every link and snapshot of the scene. Each snapshot draws from its own
// derived stream.
inline SyntheticMpcs gen_clustered_mpcs(const SyntheticScene &scene)
{
    const auto &cfg = scene.config;
    SyntheticMpcs out;
    out.scene = scene;
    for (int n = 0; n < cfg.snapshots; ++n)
    {
        std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + std::uint64_t(n)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const Vec3 ue = scene.trajectory[std::size_t(n)];
        const std::size_t first = out.mpcs.size();
        for (int k = 0; k < cfg.panels; ++k)
        {
            const Panel &panel = scene.panels[std::size_t(k)];
            const auto vis = visible_groups(scene, k, n);
            std::vector<double> w;
            for (auto g : vis)
                w.push_back(scene.groups[g].weight);
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            for (int m = 0; m < cfg.mpcs_per_link; ++m)
            {
                const std::size_t g = std::size_t(m) < vis.size() ? vis[std::size_t(m)] : vis[pick(rng)];
                const IoGroup &grp = scene.groups[g];
                Vec3 jitter;
                do
                {
                    const double x = gauss(rng), y = gauss(rng), z = gauss(rng);
                    jitter = cfg.io_jitter * Vec3(x, y, z);
                } while (jitter.norm() > cfg.io_jitter_max);
                const Vec3 io = grp.center + jitter;
                const Vec3 to_io = io - panel.position;
                const double last_hop = to_io.norm();
                const double path = (ue - io).norm() + last_hop;
                double delay = path / kSpeedOfLight + cfg.delay_jitter * gauss(rng);
                delay = std::max(delay, (last_hop + 1e-3) / kSpeedOfLight);

                MpcRecord r;
                r.snapshot = scene.snapshot_ids[std::size_t(n)];
                r.panel = panel.id;
                r.delay = delay;
                r.azimuth = detail::wrapped_azimuth(std::atan2(to_io.y(), to_io.x()));
                r.elevation = std::acos(std::clamp(to_io.z() / last_hop, -1.0, 1.0));
                r.doppler = 0.0;
                const double p_db = grp.power_db - 20.0 * std::log10(path) + cfg.power_jitter_db * gauss(rng);
                const double p = std::pow(10.0, p_db / 10.0);
                const double share = 0.2 + 0.6 * u01(rng);
                const double ph_v = 2.0 * kPi * u01(rng), ph_h = 2.0 * kPi * u01(rng);
                r.amp_v = std::polar(std::sqrt(share * p), ph_v);
                r.amp_h = std::polar(std::sqrt((1.0 - share) * p), ph_h);

                Interaction t;
                t.mpc_index = out.mpcs.size();
                t.snapshot = r.snapshot;
                t.panel = r.panel;
                t.io_center = io;
                t.partial_delay = delay - last_hop / kSpeedOfLight;
                t.power = r.power();
                out.mpcs.push_back(r);
                out.labels.push_back(int(g));
                out.truth.push_back(t);
            }
        }
        out.separation_ratio.push_back(
            separation_ratio(std::span<const Interaction>(out.truth).subspan(first),
                             std::span<const int>(out.labels).subspan(first)));
    }
    return out;
}

inline SyntheticMpcs gen_clustered_mpcs(const SceneConfig &cfg) { return gen_clustered_mpcs(gen_scene(cfg)); }

// Adjusted Rand index between two labelings of the same items
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::invalid_input, "adjusted_rand_index: label vectors differ in length");
    std::map<std::pair<int, int>, double> nij;
    std::map<int, double> ai, bj;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        nij[{a[i], b[i]}] += 1.0;
        ai[a[i]] += 1.0;
        bj[b[i]] += 1.0;
    }
    auto c2 = [](double x)
    { return 0.5 * x * (x - 1.0); };
    double sij = 0.0, sa = 0.0, sb = 0.0;
    for (const auto &[k, v] : nij)
        sij += c2(v);
    for (const auto &[k, v] : ai)
        sa += c2(v);
    for (const auto &[k, v] : bj)
        sb += c2(v);
    const double total = c2(double(a.size()));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected)
        return 1.0;
    return (sij - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------------------------
// Moving clusters for the tracker

struct MovingTarget
{
    Meas start = Meas::Zero();    // x, y, z [m], tau_P [ns] at the first snapshot
    Meas velocity = Meas::Zero(); // per snapshot
    int first = 0;                // snapshot index range where the target exists
    int last = std::numeric_limits<int>::max();
    std::vector<std::pair<int, int>> gaps; // inclusive snapshot index ranges without an observation
};

struct MovingClusterConfig
{
    std::uint64_t seed = 1;
    int snapshots = 30;
    std::vector<MovingTarget> targets;
    double position_noise = 0.0; // m, centroid observation noise
    double delay_noise = 0.0;    // ns
    int members = 20;
    double member_spread = 0.2;       // m
    double member_delay_spread = 0.5; // ns
};

struct MovingClusterSnapshot
{
    int snapshot = 0;
    std::vector<TrackObservation> observations;
    std::vector<int> target; // target index per observation
    std::vector<Meas> truth; // true centroid per target
    std::vector<char> present;
};

inline std::vector<MovingClusterSnapshot> gen_moving_cluster(const MovingClusterConfig &cfg)
{
    std::vector<MovingClusterSnapshot> out;
    for (int n = 0; n < cfg.snapshots; ++n)
    {
        std::mt19937_64 rng(derive_seed(cfg.seed, std::uint64_t(n)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        MovingClusterSnapshot s;
        s.snapshot = n;
        for (std::size_t t = 0; t < cfg.targets.size(); ++t)
        {
            const auto &tg = cfg.targets[t];
            const Meas truth = tg.start + double(n) * tg.velocity;
            bool present = n >= tg.first && n <= tg.last;
            for (const auto &[a, b] : tg.gaps)
                present = present && !(n >= a && n <= b);
            s.truth.push_back(truth);
            s.present.push_back(present ? 1 : 0);
            if (!present)
                continue;
            TrackObservation o;
            o.cluster_id = int(s.observations.size());
            const double nx = gauss(rng), ny = gauss(rng), nz = gauss(rng), nt = gauss(rng);
            o.centroid = truth + Meas(cfg.position_noise * nx, cfg.position_noise * ny, cfg.position_noise * nz,
                                      cfg.delay_noise * nt);
            for (int m = 0; m < cfg.members; ++m)
            {
                const double mx = gauss(rng), my = gauss(rng), mz = gauss(rng), mt = gauss(rng);
                o.points.push_back(o.centroid + Meas(cfg.member_spread * mx, cfg.member_spread * my,
                                                     cfg.member_spread * mz, cfg.member_delay_spread * mt));
                o.weights.push_back(1.0);
            }
            s.observations.push_back(std::move(o));
            s.target.push_back(int(t));
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Window-censored VR processes

struct VrProcessConfig
{
    std::uint64_t seed = 1;
    double mean_length = 3.0; // lambda_Y, m
    double count_rate = 0.8;  // lambda_v of the 1-shift Poisson VR count
    double window = 12.0;     // L, m
    double delta0 = 0.24;     // m
    std::size_t count = 2000; // observed VRs to produce
    std::size_t clusters = 0; // VR-count samples to draw
    Side side = Side::bs;
};

struct SyntheticVrProcess
{
    VrProcessConfig config;
    std::vector<VrObservation> observed;
    std::vector<double> complete; // true complete length per observed VR
    std::vector<double> start;    // true start position per observed VR
    std::vector<int> counts;      // VR counts per cluster
};

// Exponential complete lengths starting uniformly over an extended window. A VR is observed when
// its overlap with [0, L] is at least delta0; overlaps touching 0 or L are censored.
inline SyntheticVrProcess gen_vr_process(const VrProcessConfig &cfg)
{
    if (!(cfg.mean_length > 0.0) || !(cfg.window > cfg.delta0) || !(cfg.delta0 >= 0.0) || cfg.count_rate < 0.0)
        throw Error(ErrorCode::config, "gen_vr_process: requires mean_length > 0, L > delta0 >= 0, count_rate >= 0");
    SyntheticVrProcess p;
    p.config = cfg;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0));
    std::exponential_distribution<double> len(1.0 / cfg.mean_length);
    const double lead = 40.0 * cfg.mean_length + cfg.window;
    std::uniform_real_distribution<double> pos(-lead, cfg.window);
    const std::size_t max_trials = 100000 * std::max<std::size_t>(cfg.count, 1);
    for (std::size_t trial = 0; p.observed.size() < cfg.count; ++trial)
    {
        if (trial >= max_trials)
            throw Error(ErrorCode::numerical, "gen_vr_process: too few VRs fall inside the window");
        const double y = len(rng);
        const double s = pos(rng);
        const double a = std::max(s, 0.0), b = std::min(s + y, cfg.window);
        if (b - a < cfg.delta0 || b <= a)
            continue;
        const bool at_start = s <= 0.0, at_end = s + y >= cfg.window;
        VrObservation v;
        v.side = cfg.side;
        v.cluster = int(p.observed.size());
        v.snapshot = -1;
        v.vr_index = 0;
        v.censor = at_start ? (at_end ? CensorClass::c11 : CensorClass::c10)
                            : (at_end ? CensorClass::c01 : CensorClass::c00);
        v.length = v.censor == CensorClass::c11 ? cfg.window : b - a;
        p.observed.push_back(v);
        p.complete.push_back(y);
        p.start.push_back(s);
    }
    std::mt19937_64 crng(derive_seed(cfg.seed, 1));
    std::poisson_distribution<int> cnt(cfg.count_rate);
    for (std::size_t c = 0; c < cfg.clusters; ++c)
        p.counts.push_back(1 + (cfg.count_rate > 0.0 ? cnt(crng) : 0));
    return p;
}

// ---------------------------------------------------------------------------------------------
// Cluster power against excess delay

struct PowerLawConfig
{
    std::uint64_t seed = 1;
    double p0_db = -60.0;
    double k_tau = 0.219;        // dB/ns
    double shadowing_std = 5.0;  // dB
    std::size_t clusters = 500;
    double max_excess_ns = 100.0;
    std::optional<double> tau_cut_ns; // power stays flat beyond
};

inline std::vector<PowerSample> gen_power_law(const PowerLawConfig &cfg)
{
    std::mt19937_64 rng(derive_seed(cfg.seed, 0));
    std::uniform_real_distribution<double> tau(0.0, cfg.max_excess_ns);
    std::normal_distribution<double> sf(0.0, 1.0);
    std::vector<PowerSample> out;
    for (std::size_t i = 0; i < cfg.clusters; ++i)
    {
        const double x = tau(rng);
        const double xe = cfg.tau_cut_ns ? std::min(x, *cfg.tau_cut_ns) : x;
        const double db = cfg.p0_db - cfg.k_tau * xe + cfg.shadowing_std * sf(rng);
        out.push_back({x, std::pow(10.0, db / 10.0)});
    }
    return out;
}

} // namespace mpcc

#endif
