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

#ifndef MPCC_GEOMETRY_HPP
#define MPCC_GEOMETRY_HPP

#include "mpcc/core.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mpcc
{

struct Ray
{
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX(); // unit length
    double max_range = 0.0;         // m, tau * c
};

// Ray launched from the panel along the arrival direction of the MPC
inline Ray build_ray(const MpcRecord &mpc, const Panel &panel)
{
    if (mpc.panel != panel.id)
        throw Error(ErrorCode::invalid_input, "build_ray: MPC panel does not match panel geometry");
    if (!std::isfinite(mpc.azimuth) || !std::isfinite(mpc.elevation) || !std::isfinite(mpc.delay))
        throw Error(ErrorCode::invalid_input, "build_ray: non-finite angle or delay");
    if (!(mpc.delay > 0.0))
        throw Error(ErrorCode::invalid_input, "build_ray: delay must be positive");

    const double st = std::sin(mpc.elevation);
    Ray r;
    r.origin = panel.position;
    r.direction = Vec3(std::cos(mpc.azimuth) * st, std::sin(mpc.azimuth) * st, std::cos(mpc.elevation));
    r.max_range = mpc.delay * kSpeedOfLight;
    return r;
}

// Distance from p to the finite segment [origin, origin + max_range * direction]
inline double point_segment_distance(const Vec3 &p, const Ray &r)
{
    const Vec3 v = p - r.origin;
    const double t = std::clamp(v.dot(r.direction), 0.0, r.max_range);
    return (v - t * r.direction).norm();
}

// Immutable point cloud with a k-d tree for radius and segment-tube queries.
// Queries are const and may run concurrently.
class PointCloud
{
public:
    PointCloud() = default;

    explicit PointCloud(std::vector<Vec3> points, std::size_t leaf_size = 16)
        : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1))
    {
        for (const auto &p : points_)
            if (!all_finite(p))
                throw Error(ErrorCode::data, "point cloud contains non-finite coordinates");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!points_.empty())
            build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const std::vector<Vec3> &points() const { return points_; }
    const Vec3 &operator[](std::size_t i) const { return points_[i]; }

    // Indices (ascending) of all points within `radius` of `center`
    std::vector<std::size_t> within_radius(const Vec3 &center, double radius) const
    {
        std::vector<std::size_t> out;
        if (nodes_.empty())
            return out;
        const double r2 = radius * radius;
        std::vector<std::size_t> stack{0};
        while (!stack.empty())
        {
            const Node &n = nodes_[stack.back()];
            stack.pop_back();
            const Vec3 q = center.cwiseMax(n.lo).cwiseMin(n.hi);
            if ((q - center).squaredNorm() > r2)
                continue;
            if (n.left < 0)
            {
                for (std::size_t i = n.begin; i < n.end; ++i)
                    if ((points_[order_[i]] - center).squaredNorm() <= r2)
                        out.push_back(order_[i]);
            }
            else
            {
                stack.push_back(std::size_t(n.left));
                stack.push_back(std::size_t(n.right));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // Indices (ascending) of all points within `radius` of the ray segment
    std::vector<std::size_t> within_segment(const Ray &ray, double radius) const
    {
        std::vector<std::size_t> out;
        if (nodes_.empty())
            return out;
        std::vector<std::size_t> stack{0};
        while (!stack.empty())
        {
            const Node &n = nodes_[stack.back()];
            stack.pop_back();
            // Lower bound via the bounding sphere of the node box
            const Vec3 c = 0.5 * (n.lo + n.hi);
            const double half_diag = 0.5 * (n.hi - n.lo).norm();
            if (point_segment_distance(c, ray) - half_diag > radius)
                continue;
            if (n.left < 0)
            {
                for (std::size_t i = n.begin; i < n.end; ++i)
                    if (point_segment_distance(points_[order_[i]], ray) <= radius)
                        out.push_back(order_[i]);
            }
            else
            {
                stack.push_back(std::size_t(n.left));
                stack.push_back(std::size_t(n.right));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    struct Node
    {
        Vec3 lo, hi;
        std::size_t begin = 0, end = 0;
        int left = -1, right = -1;
    };

    int build(std::size_t begin, std::size_t end)
    {
        Node n;
        n.begin = begin;
        n.end = end;
        n.lo = n.hi = points_[order_[begin]];
        for (std::size_t i = begin + 1; i < end; ++i)
        {
            n.lo = n.lo.cwiseMin(points_[order_[i]]);
            n.hi = n.hi.cwiseMax(points_[order_[i]]);
        }
        const int id = int(nodes_.size());
        nodes_.push_back(n);
        if (end - begin <= leaf_size_)
            return id;

        int axis = 0;
        (n.hi - n.lo).maxCoeff(&axis);
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + std::ptrdiff_t(begin), order_.begin() + std::ptrdiff_t(mid),
                         order_.begin() + std::ptrdiff_t(end),
                         [&](std::size_t a, std::size_t b)
                         { return points_[a][axis] < points_[b][axis]; });
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[std::size_t(id)].left = l;
        nodes_[std::size_t(id)].right = r;
        return id;
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 16;
};

// Candidate intersections: every cloud point within delta0 of the ray segment
inline std::vector<std::size_t> ray_candidates(const Ray &ray, const PointCloud &cloud, double delta0)
{
    if (!(delta0 > 0.0))
        throw Error(ErrorCode::invalid_input, "ray_candidates: delta0 must be positive");
    return cloud.within_segment(ray, delta0);
}

// ---------------------------------------------------------------------------------------------
// DBSCAN

struct DbscanResult
{
    std::vector<int> labels; // group index per point, -1 = noise
    int group_count = 0;

    std::vector<std::vector<std::size_t>> groups() const
    {
        std::vector<std::vector<std::size_t>> g(static_cast<std::size_t>(group_count));
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] >= 0)
                g[std::size_t(labels[i])].push_back(i);
        return g;
    }
};

namespace detail
{
inline bool lex_less(const Vec3 &a, const Vec3 &b)
{
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}
} // namespace detail

// Density-based grouping. Core points (>= min_pts neighbours within eps, self included) that are
// eps-connected form a group. A border point joins the group of its nearest core neighbour,
// ties resolved by the lexicographically smaller core position, so the partition does not depend
// on input order. Groups are numbered by their lowest member index.
inline DbscanResult dbscan(std::span<const Vec3> points, double eps, std::size_t min_pts)
{
    if (!(eps > 0.0) || min_pts < 1)
        throw Error(ErrorCode::invalid_input, "dbscan: eps must be positive and min_pts >= 1");

    const std::size_t n = points.size();
    DbscanResult res;
    res.labels.assign(n, -1);
    if (n == 0)
        return res;

    const PointCloud index(std::vector<Vec3>(points.begin(), points.end()));
    std::vector<std::vector<std::size_t>> nbrs(n);
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i)
    {
        nbrs[i] = index.within_radius(points[i], eps);
        core[i] = nbrs[i].size() >= min_pts;
    }

    // Union-find over core points
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x)
    {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        if (core[i])
            for (std::size_t j : nbrs[i])
                if (core[j])
                {
                    const std::size_t a = find(i), b = find(j);
                    if (a != b)
                        parent[std::max(a, b)] = std::min(a, b);
                }

    // Root of each core component is its lowest index, so scanning in order numbers groups by
    // their lowest core member.
    std::vector<int> root_label(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (core[i])
        {
            const std::size_t r = find(i);
            if (root_label[r] < 0)
                root_label[r] = res.group_count++;
            res.labels[i] = root_label[r];
        }

    for (std::size_t i = 0; i < n; ++i)
    {
        if (core[i])
            continue;
        std::optional<std::size_t> best;
        double best_d = 0.0;
        for (std::size_t j : nbrs[i])
        {
            if (!core[j])
                continue;
            const double d = (points[j] - points[i]).squaredNorm();
            if (!best || d < best_d || (d == best_d && detail::lex_less(points[j], points[*best])))
            {
                best = j;
                best_d = d;
            }
        }
        if (best)
            res.labels[i] = res.labels[*best];
    }

    // Renumber by lowest member index (border points may precede their core points)
    std::vector<int> remap(std::size_t(res.group_count), -1);
    int next = 0;
    for (auto &l : res.labels)
        if (l >= 0)
        {
            if (remap[std::size_t(l)] < 0)
                remap[std::size_t(l)] = next++;
            l = remap[std::size_t(l)];
        }
    return res;
}

inline Vec3 centroid_of(std::span<const Vec3> pts)
{
    Vec3 c = Vec3::Zero();
    for (const auto &p : pts)
        c += p;
    return c / double(pts.size());
}

// The real IO is the potential IO whose centroid is nearest to the panel (the ray hits it first).
// Equidistant candidates resolve to the lexicographically smallest centroid.
inline Vec3 select_real_io(std::span<const std::vector<Vec3>> groups, const Panel &panel)
{
    std::optional<Vec3> best;
    double best_d = 0.0;
    for (const auto &g : groups)
    {
        if (g.empty())
            continue;
        const Vec3 c = centroid_of(g);
        const double d = (c - panel.position).norm();
        if (!best || d < best_d || (d == best_d && detail::lex_less(c, *best)))
        {
            best = c;
            best_d = d;
        }
    }
    if (!best)
        throw Error(ErrorCode::no_interaction, "select_real_io: no potential IO");
    return *best;
}

struct PartialDelay
{
    double value = 0.0; // s
    bool clamped = false;
};

// Propagation delay before the last hop: (tau*c - |o - P|) / c, clamped at 0 when the IO lies
// beyond the total path length
inline PartialDelay partial_delay(const MpcRecord &mpc, const Vec3 &io_center, const Panel &panel)
{
    const double last_hop = (io_center - panel.position).norm();
    const double path = mpc.delay * kSpeedOfLight;
    if (last_hop > path)
        return {0.0, true};
    return {(path - last_hop) / kSpeedOfLight, false};
}

// ---------------------------------------------------------------------------------------------
// Mapping MPCs onto the point cloud

struct GeometryConfig
{
    double delta0 = 0.5;        // ray tube radius, m
    double dbscan_eps = 0.5;    // m
    std::size_t dbscan_min_pts = 4;
};

struct MappingDiagnostic
{
    std::size_t mpc_index = 0;
    int snapshot = 0;
    int panel = 0;
    std::string kind; // "empty_candidates", "all_noise", "clamped", "unknown_panel"
    std::string detail;
};

struct MappingReport
{
    std::vector<Interaction> interactions; // ordered by mpc_index
    std::vector<MappingDiagnostic> diagnostics;
    // unmapped MPC count per snapshot
    std::map<int, std::size_t> unmapped_per_snapshot;
};

struct MappingOutcome
{
    std::optional<Interaction> interaction;
    std::optional<MappingDiagnostic> diagnostic;
};

inline MappingOutcome map_mpc(const MpcRecord &mpc, std::size_t mpc_index, const Panel &panel,
                              const PointCloud &cloud, const GeometryConfig &cfg)
{
    MappingOutcome out;
    auto diag = [&](std::string kind, std::string detail)
    { return MappingDiagnostic{mpc_index, mpc.snapshot, mpc.panel, std::move(kind), std::move(detail)}; };

    const Ray ray = build_ray(mpc, panel);
    const auto cand = ray_candidates(ray, cloud, cfg.delta0);
    if (cand.empty())
    {
        out.diagnostic = diag("empty_candidates", "no cloud point within delta0 of the ray");
        return out;
    }
    std::vector<Vec3> pts;
    pts.reserve(cand.size());
    for (auto i : cand)
        pts.push_back(cloud[i]);
    const auto db = dbscan(pts, cfg.dbscan_eps, cfg.dbscan_min_pts);
    if (db.group_count == 0)
    {
        out.diagnostic = diag("all_noise", std::to_string(cand.size()) + " candidates, all noise");
        return out;
    }
    std::vector<std::vector<Vec3>> groups(std::size_t(db.group_count));
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (db.labels[i] >= 0)
            groups[std::size_t(db.labels[i])].push_back(pts[i]);

    Interaction it;
    it.mpc_index = mpc_index;
    it.snapshot = mpc.snapshot;
    it.panel = mpc.panel;
    it.io_center = select_real_io(groups, panel);
    const auto pd = partial_delay(mpc, it.io_center, panel);
    it.partial_delay = pd.value;
    it.clamped = pd.clamped;
    it.power = mpc.power();
    if (pd.clamped)
        out.diagnostic = diag("clamped", "IO farther from panel than tau*c; partial delay clamped to 0");
    out.interaction = it;
    return out;
}

// Maps every MPC; results are independent of the thread count
inline MappingReport map_all(std::span<const MpcRecord> mpcs, std::span<const Panel> panels,
                             const PointCloud &cloud, const GeometryConfig &cfg, unsigned threads = 1)
{
    std::map<int, const Panel *> by_id;
    for (const auto &p : panels)
        by_id[p.id] = &p;

    std::vector<MappingOutcome> outcomes(mpcs.size());
    auto work = [&](std::size_t begin, std::size_t end)
    {
        for (std::size_t i = begin; i < end; ++i)
        {
            auto it = by_id.find(mpcs[i].panel);
            if (it == by_id.end())
            {
                outcomes[i].diagnostic = MappingDiagnostic{i, mpcs[i].snapshot, mpcs[i].panel, "unknown_panel",
                                                           "panel id not present in panel file"};
                continue;
            }
            try
            {
                outcomes[i] = map_mpc(mpcs[i], i, *it->second, cloud, cfg);
            }
            catch (const Error &e)
            {
                outcomes[i].diagnostic =
                    MappingDiagnostic{i, mpcs[i].snapshot, mpcs[i].panel, "invalid", e.what()};
            }
        }
    };

    threads = std::max(1u, threads);
    if (threads == 1 || mpcs.size() < 2 * threads)
        work(0, mpcs.size());
    else
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (mpcs.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t)
        {
            const std::size_t b = std::min(mpcs.size(), t * chunk);
            const std::size_t e = std::min(mpcs.size(), b + chunk);
            pool.emplace_back(work, b, e);
        }
    }

    MappingReport rep;
    for (std::size_t i = 0; i < outcomes.size(); ++i)
    {
        auto &o = outcomes[i];
        if (o.interaction)
            rep.interactions.push_back(*o.interaction);
        else
            ++rep.unmapped_per_snapshot[mpcs[i].snapshot];
        if (o.diagnostic)
            rep.diagnostics.push_back(std::move(*o.diagnostic));
    }
    return rep;
}

} // namespace mpcc

#endif
