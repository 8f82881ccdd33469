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

#ifndef MPCC_PIPELINE_HPP
#define MPCC_PIPELINE_HPP

#include "mpcc/clustering.hpp"
#include "mpcc/clusterstats.hpp"
#include "mpcc/geometry.hpp"
#include "mpcc/inference.hpp"
#include "mpcc/io.hpp"
#include "mpcc/synth.hpp"
#include "mpcc/tracking.hpp"
#include "mpcc/visibility.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace mpcc
{

// ---------------------------------------------------------------------------------------------
// Configuration

// Default configuration. User files are merged over it key by key; unknown keys are rejected.
inline constexpr const char *kDefaultConfig = R"({
    // Input files, relative to the directory of the config file
    "inputs": {
        "mpcs": "mpcs.jsonl",         // MPC records, JSONL (or .csv)
        "panels": "panels.csv",       // panel_id,x,y,z
        "trajectory": "trajectory.csv", // snapshot,x,y,z
        "cloud": "cloud.ply",         // ASCII PLY or x,y,z CSV
        "truth": ""                   // optional truth.json from `mpcc synth`, enables ARI reporting
    },
    "output_dir": "out",              // relative to the config file
    "seed": 1,
    "threads": 1,                     // worker threads; results do not depend on it

    "geometry": {
        "delta0": 0.5,                // ray tube radius [m]
        "dbscan_eps": 0.5,            // [m]
        "dbscan_min_pts": 4
    },
    "clustering": {
        "delta_mcd": 7.0,             // MCD threshold
        "zeta": 1.0,                  // delay scaling factor
        "cvi_grid": [],               // non-empty: pick delta_mcd from this grid by validity indices
        "max_iter": 100,
        "eps_position": 1e-6,         // centroid movement tolerance [m]
        "eps_delay": 1e-15            // centroid partial-delay tolerance [s]
    },
    "tracking": {
        "enabled": true,              // false: visibility uses per-snapshot cluster ids
        "n_th": 5,                    // misses tolerated before a track dies
        // state (x, dx, y, dy, z, dz, tau, dtau); m and ns
        "q_diag": [0.01, 0.0025, 0.01, 0.0025, 0.01, 0.0025, 0.09, 0.0225],
        // measurement (x, y, z, tau); m^2 and ns^2
        "r_diag": [0.09, 0.09, 0.09, 1.0]
    },
    "visibility": {
        "delta_c": 0.1,               // share of the cluster's power on the link
        "delta_p": 0.02,              // share of the link's power in the cluster
        "spacing_bs": 0.6,            // panel spacing [m]
        "spacing_ue": 0.24            // UE movement per snapshot [m]
    },
    "inference": {
        "delta0_bs": 0.2,             // minimum complete BS-VR length [m]
        "delta0_ue": 0.24             // minimum complete UE-VR length [m]
    },
    "stats": {
        "tau_cut": "auto",            // "auto", "none" or excess delay in ns
        "bin_ns": 10.0,               // auto: bin width
        "margin_db": 3.0,             // auto: distance to the noise floor
        "min_per_bin": 3
    },
    "synth": {
        "panels": 8,
        "panel_spacing": 0.6,
        "panel_origin": [17.0, 0.5, 2.5],
        "snapshots": 50,
        "ue_step": 0.24,
        "ue_start": [14.0, 14.0, 1.2],
        "room_min": [0.0, 0.0, 0.0],
        "room_max": [40.0, 30.0, 4.0],
        "groups": 5,
        "min_group_spacing": 10.0,
        "mpcs_per_link": 200,
        "io_jitter": 0.1,
        "io_jitter_max": 0.25,
        "delay_jitter_s": 0.5e-9,
        "power_jitter_db": 2.0,
        "blob_points": 150,
        "blob_radius": 0.25,
        "noise_points": 400,
        "partial_visibility": true
    }
})";

struct PipelineConfig
{
    fs::path base_dir = ".";
    Json json; // merged configuration

    std::string in_mpcs, in_panels, in_trajectory, in_cloud, in_truth;
    fs::path output_dir;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    GeometryConfig geometry;
    ClusteringConfig clustering;
    std::vector<double> cvi_grid;
    bool tracking_enabled = true;
    FilterConfig filter = FilterConfig::defaults();
    double delta_c = 0.1, delta_p = 0.02, spacing_bs = 0.6, spacing_ue = 0.24;
    double delta0_bs = 0.2, delta0_ue = 0.24;
    bool tau_cut_auto = true;
    std::optional<double> tau_cut_ns;
    double bin_ns = 10.0, margin_db = 3.0;
    std::size_t min_per_bin = 3;
    SceneConfig synth;

    fs::path input(const std::string &name) const
    {
        const fs::path p(name);
        return p.is_absolute() ? p : base_dir / p;
    }
    fs::path out(const std::string &name) const { return output_dir / name; }

    // Configuration recorded in reports. Execution-only keys (threads, output_dir) are left out so that
    // reports do not depend on where or how wide a run was.
    Json resolved() const
    {
        Json j = json;
        j.erase("threads");
        j.erase("output_dir");
        return j;
    }
};

namespace detail
{
[[noreturn]] inline void config_error(const std::string &msg) { throw Error(ErrorCode::config, "config: " + msg); }

inline void merge_checked(Json &base, const Json &user, const std::string &path)
{
    if (!user.is_object())
        config_error(fmt::format("'{}' must be an object", path.empty() ? "<root>" : path));
    for (auto it = user.begin(); it != user.end(); ++it)
    {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key()))
            config_error(fmt::format("unknown key '{}'", key));
        auto &b = base[it.key()];
        if (b.is_object())
            merge_checked(b, it.value(), key);
        else
            b = it.value();
    }
}

inline Json &lookup(Json &root, const std::string &dotted)
{
    Json *j = &root;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = dotted.find('.', start);
        const std::string key = dotted.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        if (!j->is_object() || !j->contains(key))
            config_error(fmt::format("unknown key '{}'", dotted));
        j = &(*j)[key];
        if (pos == std::string::npos)
            return *j;
        start = pos + 1;
    }
}

inline double get_num(const Json &root, const std::string &dotted, double lo, double hi, bool lo_open = false)
{
    const Json &v = lookup(const_cast<Json &>(root), dotted);
    if (!v.is_number())
        config_error(fmt::format("'{}' must be a number", dotted));
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < lo || d > hi || (lo_open && d == lo))
        config_error(fmt::format("'{}' = {} outside {}{}, {}]", dotted, d, lo_open ? "(" : "[", lo, hi));
    return d;
}

inline long get_int(const Json &root, const std::string &dotted, long lo, long hi)
{
    const Json &v = lookup(const_cast<Json &>(root), dotted);
    if (!v.is_number_integer())
        config_error(fmt::format("'{}' must be an integer", dotted));
    const long d = v.get<long>();
    if (d < lo || d > hi)
        config_error(fmt::format("'{}' = {} outside [{}, {}]", dotted, d, lo, hi));
    return d;
}

inline std::string get_str(const Json &root, const std::string &dotted)
{
    const Json &v = lookup(const_cast<Json &>(root), dotted);
    if (!v.is_string())
        config_error(fmt::format("'{}' must be a string", dotted));
    return v.get<std::string>();
}

inline bool get_bool(const Json &root, const std::string &dotted)
{
    const Json &v = lookup(const_cast<Json &>(root), dotted);
    if (!v.is_boolean())
        config_error(fmt::format("'{}' must be true or false", dotted));
    return v.get<bool>();
}

inline std::vector<double> get_vec(const Json &root, const std::string &dotted, std::size_t n, double lo)
{
    const Json &v = lookup(const_cast<Json &>(root), dotted);
    if (!v.is_array() || (n && v.size() != n))
        config_error(n ? fmt::format("'{}' must be an array of {} numbers", dotted, n)
                       : fmt::format("'{}' must be an array of numbers", dotted));
    std::vector<double> out;
    for (const auto &e : v)
    {
        if (!e.is_number() || !std::isfinite(e.get<double>()) || e.get<double>() < lo)
            config_error(fmt::format("'{}' entries must be finite numbers >= {}", dotted, lo));
        out.push_back(e.get<double>());
    }
    return out;
}

inline Vec3 get_vec3(const Json &root, const std::string &dotted)
{
    const auto v = get_vec(root, dotted, 3, -1e9);
    return Vec3(v[0], v[1], v[2]);
}
} // namespace detail

inline Json default_config_json() { return Json::parse(kDefaultConfig, nullptr, true, true); }

// Applies "section.key=value" overrides; the value is read as JSON and otherwise taken as a string
inline void apply_override(Json &j, const std::string &assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        detail::config_error(fmt::format("override '{}' is not key=value", assignment));
    Json &target = detail::lookup(j, assignment.substr(0, eq));
    const std::string value = assignment.substr(eq + 1);
    try
    {
        target = Json::parse(value);
    }
    catch (const Json::parse_error &)
    {
        target = value;
    }
}

inline PipelineConfig config_from_json(const Json &merged, fs::path base_dir)
{
    using namespace detail;
    PipelineConfig c;
    c.base_dir = std::move(base_dir);
    c.json = merged;
    const Json &j = c.json;

    c.in_mpcs = get_str(j, "inputs.mpcs");
    c.in_panels = get_str(j, "inputs.panels");
    c.in_trajectory = get_str(j, "inputs.trajectory");
    c.in_cloud = get_str(j, "inputs.cloud");
    c.in_truth = get_str(j, "inputs.truth");
    c.output_dir = c.input(get_str(j, "output_dir"));
    c.seed = std::uint64_t(get_int(j, "seed", 0, std::numeric_limits<long>::max()));
    c.threads = unsigned(get_int(j, "threads", 1, 1024));

    c.geometry.delta0 = get_num(j, "geometry.delta0", 0.0, 1e3, true);
    c.geometry.dbscan_eps = get_num(j, "geometry.dbscan_eps", 0.0, 1e3, true);
    c.geometry.dbscan_min_pts = std::size_t(get_int(j, "geometry.dbscan_min_pts", 1, 1000000));

    c.clustering.delta_mcd = get_num(j, "clustering.delta_mcd", 0.0, 1e9, true);
    c.clustering.zeta = get_num(j, "clustering.zeta", 0.0, 1e9, true);
    c.clustering.max_iter = int(get_int(j, "clustering.max_iter", 1, 1000000));
    c.clustering.eps_position = get_num(j, "clustering.eps_position", 0.0, 1e3);
    c.clustering.eps_delay = get_num(j, "clustering.eps_delay", 0.0, 1.0);
    c.cvi_grid = get_vec(j, "clustering.cvi_grid", 0, 0.0);
    for (double g : c.cvi_grid)
        if (!(g > 0.0))
            config_error("'clustering.cvi_grid' entries must be positive");

    c.tracking_enabled = get_bool(j, "tracking.enabled");
    c.filter.n_th = int(get_int(j, "tracking.n_th", 1, 1000000));
    const auto q = get_vec(j, "tracking.q_diag", 8, 0.0);
    const auto r = get_vec(j, "tracking.r_diag", 4, 0.0);
    c.filter.Q = StateCov::Zero();
    c.filter.R = MeasCov::Zero();
    for (int i = 0; i < 8; ++i)
        c.filter.Q(i, i) = q[std::size_t(i)];
    for (int i = 0; i < 4; ++i)
    {
        if (!(r[std::size_t(i)] > 0.0))
            config_error("'tracking.r_diag' entries must be positive");
        c.filter.R(i, i) = r[std::size_t(i)];
    }

    c.delta_c = get_num(j, "visibility.delta_c", 0.0, 0.999999);
    c.delta_p = get_num(j, "visibility.delta_p", 0.0, 0.999999);
    c.spacing_bs = get_num(j, "visibility.spacing_bs", 0.0, 1e6, true);
    c.spacing_ue = get_num(j, "visibility.spacing_ue", 0.0, 1e6, true);
    c.delta0_bs = get_num(j, "inference.delta0_bs", 0.0, 1e6);
    c.delta0_ue = get_num(j, "inference.delta0_ue", 0.0, 1e6);

    const Json &tc = lookup(c.json, "stats.tau_cut");
    if (tc.is_string() && tc.get<std::string>() == "auto")
        c.tau_cut_auto = true;
    else if (tc.is_string() && tc.get<std::string>() == "none")
        c.tau_cut_auto = false;
    else if (tc.is_number() && tc.get<double>() > 0.0)
    {
        c.tau_cut_auto = false;
        c.tau_cut_ns = tc.get<double>();
    }
    else
        config_error("'stats.tau_cut' must be \"auto\", \"none\" or a positive number of ns");
    c.bin_ns = get_num(j, "stats.bin_ns", 0.0, 1e6, true);
    c.margin_db = get_num(j, "stats.margin_db", 0.0, 1e3);
    c.min_per_bin = std::size_t(get_int(j, "stats.min_per_bin", 1, 1000000));

    auto &s = c.synth;
    s.seed = c.seed;
    s.panels = int(get_int(j, "synth.panels", 1, 10000));
    s.panel_spacing = get_num(j, "synth.panel_spacing", 0.0, 1e3, true);
    s.panel_origin = get_vec3(j, "synth.panel_origin");
    s.snapshots = int(get_int(j, "synth.snapshots", 1, 100000));
    s.ue_step = get_num(j, "synth.ue_step", 0.0, 1e3);
    s.ue_start = get_vec3(j, "synth.ue_start");
    s.room_min = get_vec3(j, "synth.room_min");
    s.room_max = get_vec3(j, "synth.room_max");
    s.groups = int(get_int(j, "synth.groups", 1, 1000));
    s.min_group_spacing = get_num(j, "synth.min_group_spacing", 0.0, 1e6);
    s.mpcs_per_link = int(get_int(j, "synth.mpcs_per_link", 1, 1000000));
    s.io_jitter = get_num(j, "synth.io_jitter", 0.0, 1e3);
    s.io_jitter_max = get_num(j, "synth.io_jitter_max", 0.0, 1e3, true);
    s.delay_jitter = get_num(j, "synth.delay_jitter_s", 0.0, 1e-3);
    s.power_jitter_db = get_num(j, "synth.power_jitter_db", 0.0, 100.0);
    s.blob_points = int(get_int(j, "synth.blob_points", 0, 10000000));
    s.blob_radius = get_num(j, "synth.blob_radius", 0.0, 1e3);
    s.noise_points = int(get_int(j, "synth.noise_points", 0, 100000000));
    s.partial_visibility = get_bool(j, "synth.partial_visibility");
    if ((s.room_max - s.room_min).minCoeff() <= 2.0)
        config_error("'synth.room_max' must exceed 'synth.room_min' by more than 2 m on every axis");
    return c;
}

// Loads `file` (if given) over the defaults and applies overrides
inline PipelineConfig load_config(const std::optional<fs::path> &file, const std::vector<std::string> &overrides = {})
{
    Json j = default_config_json();
    fs::path base = ".";
    if (file)
    {
        Json user;
        try
        {
            user = Json::parse(read_text(*file), nullptr, true, true);
        }
        catch (const Json::parse_error &e)
        {
            detail::config_error(fmt::format("{}: {}", file->string(), e.what()));
        }
        catch (const Error &e)
        {
            detail::config_error(e.what());
        }
        detail::merge_checked(j, user, "");
        base = file->has_parent_path() ? file->parent_path() : fs::path(".");
    }
    for (const auto &o : overrides)
        apply_override(j, o);
    return config_from_json(j, base);
}

// ---------------------------------------------------------------------------------------------
// Stage reports

struct StageReport
{
    std::string stage;
    std::vector<std::pair<std::string, std::string>> inputs;  // name, sha256
    std::vector<std::pair<std::string, std::string>> outputs; // name, sha256
    Json summary = Json::object();
    std::vector<std::string> warnings;
};

inline StageReport stage_report(std::string name)
{
    StageReport r;
    r.stage = std::move(name);
    return r;
}

namespace detail
{
inline std::string display_name(const PipelineConfig &cfg, const fs::path &p)
{
    const auto rel = p.lexically_relative(cfg.output_dir);
    if (!rel.empty() && *rel.begin() != "..")
        return rel.generic_string();
    const auto rel2 = p.lexically_relative(cfg.base_dir);
    return (!rel2.empty() && *rel2.begin() != "..") ? rel2.generic_string() : p.generic_string();
}

struct StageContext
{
    const PipelineConfig &cfg;
    StageReport rep;

    fs::path use(const fs::path &p)
    {
        rep.inputs.emplace_back(display_name(cfg, p), sha256_file(p));
        return p;
    }
    void emit(const std::string &name, const std::string &content)
    {
        const auto p = cfg.out(name);
        write_text(p, content);
        rep.outputs.emplace_back(name, sha256_file(p));
    }
    void warn(std::string w) { rep.warnings.push_back(std::move(w)); }
};

// Runs f(i) for i in [0, n) on up to `threads` workers; f writes only to slot i
template <typename F>
inline void parallel_for(std::size_t n, unsigned threads, F f)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2)
    {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back(
            [&, t]
            {
                try
                {
                    for (std::size_t i = t; i < n; i += threads)
                        f(i);
                }
                catch (...)
                {
                    errors[t] = std::current_exception();
                }
            });
    pool.clear();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}
} // namespace detail

inline Json report_json(const PipelineConfig &cfg, const StageReport &r)
{
    Json j;
    j["stage"] = r.stage;
    j["config"] = cfg.resolved();
    Json in = Json::array(), out = Json::array();
    for (const auto &[n, h] : r.inputs)
        in.push_back({{"file", n}, {"sha256", h}});
    for (const auto &[n, h] : r.outputs)
        out.push_back({{"file", n}, {"sha256", h}});
    j["inputs"] = in;
    j["outputs"] = out;
    j["summary"] = r.summary;
    j["warnings"] = r.warnings;
    return j;
}

inline std::string dump(const Json &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------------------------
// Ingestion

struct Dataset
{
    std::vector<Panel> panels;
    std::map<int, Vec3> trajectory;
    std::vector<MpcRecord> mpcs;
    std::vector<Vec3> cloud;
};

inline std::vector<MpcRecord> read_mpcs_checked(const fs::path &file, const std::vector<Panel> &panels,
                                                const std::map<int, Vec3> &trajectory)
{
    std::set<int> ids;
    for (const auto &p : panels)
        ids.insert(p.id);
    auto mpcs = read_mpcs(file);
    for (std::size_t i = 0; i < mpcs.size(); ++i)
    {
        if (!ids.count(mpcs[i].panel))
            throw Error(ErrorCode::data, fmt::format("{}: record {} refers to unknown panel {}", file.string(),
                                                     i + 1, mpcs[i].panel));
        if (!trajectory.count(mpcs[i].snapshot))
            throw Error(ErrorCode::data, fmt::format("{}: record {} refers to snapshot {} missing from the "
                                                     "trajectory",
                                                     file.string(), i + 1, mpcs[i].snapshot));
    }
    return mpcs;
}

inline Dataset ingest(detail::StageContext &ctx, bool with_cloud)
{
    const auto &cfg = ctx.cfg;
    Dataset d;
    d.panels = read_panels(ctx.use(cfg.input(cfg.in_panels)));
    d.trajectory = read_trajectory(ctx.use(cfg.input(cfg.in_trajectory)));
    d.mpcs = read_mpcs_checked(ctx.use(cfg.input(cfg.in_mpcs)), d.panels, d.trajectory);
    if (with_cloud)
    {
        d.cloud = read_point_cloud(ctx.use(cfg.input(cfg.in_cloud)));
        if (d.cloud.empty())
            throw Error(ErrorCode::data, "point cloud is empty");
    }
    return d;
}

// Per (snapshot, panel) MPC counts
inline std::map<std::pair<int, int>, std::size_t> mpc_counts(const std::vector<MpcRecord> &mpcs)
{
    std::map<std::pair<int, int>, std::size_t> c;
    for (const auto &m : mpcs)
        ++c[{m.snapshot, m.panel}];
    return c;
}

// ---------------------------------------------------------------------------------------------
// Stage: map MPCs to interacting objects

inline StageReport stage_map_ios(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("map-ios")};
    const Dataset d = ingest(ctx, true);
    const PointCloud cloud(d.cloud);
    const auto rep = map_all(d.mpcs, d.panels, cloud, cfg.geometry, cfg.threads);

    ctx.emit("interactions.jsonl", format_interactions(rep.interactions));
    std::string diag;
    for (const auto &m : rep.diagnostics)
        diag += fmt::format(R"({{"mpc_index":{},"snapshot":{},"panel":{},"kind":{},"detail":{}}})"
                            "\n",
                            m.mpc_index, m.snapshot, m.panel, mpcc::quoted(m.kind), mpcc::quoted(m.detail));
    ctx.emit("mapping_diagnostics.jsonl", diag);

    std::string counts = "snapshot,panel,mpcs\n";
    for (const auto &[k, n] : mpc_counts(d.mpcs))
        counts += fmt::format("{},{},{}\n", k.first, k.second, n);
    ctx.emit("ingest_counts.csv", counts);

    std::map<std::string, std::size_t> kinds;
    for (const auto &m : rep.diagnostics)
        ++kinds[m.kind];
    std::size_t unmapped = 0;
    for (const auto &[n, u] : rep.unmapped_per_snapshot)
        unmapped += u;
    ctx.rep.summary["mpcs"] = d.mpcs.size();
    ctx.rep.summary["panels"] = d.panels.size();
    ctx.rep.summary["snapshots"] = d.trajectory.size();
    ctx.rep.summary["cloud_points"] = d.cloud.size();
    ctx.rep.summary["mapped"] = rep.interactions.size();
    ctx.rep.summary["unmapped"] = unmapped;
    ctx.rep.summary["diagnostics"] = kinds;
    if (unmapped)
        ctx.warn(fmt::format("{} MPCs could not be mapped to an interacting object", unmapped));
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Stage: joint clustering per snapshot

struct ClusterRow
{
    int snapshot = 0;
    int cluster = 0;
    McdPoint centroid;
    double power = 0.0;
    std::vector<std::size_t> members; // mpc indices
};

inline std::map<int, std::vector<Interaction>> by_snapshot(const std::vector<Interaction> &its)
{
    std::map<int, std::vector<Interaction>> m;
    for (const auto &it : its)
        m[it.snapshot].push_back(it);
    return m;
}

inline std::string format_clusters(const std::vector<ClusterRow> &rows)
{
    std::string s;
    for (const auto &r : rows)
    {
        std::string mem;
        for (std::size_t i = 0; i < r.members.size(); ++i)
            mem += (i ? "," : "") + std::to_string(r.members[i]);
        s += fmt::format(R"({{"snapshot":{},"cluster":{},"io":{},"partial_delay_s":{},"power":{},"members":[{}]}})"
                         "\n",
                         r.snapshot, r.cluster, vec_json(r.centroid.io), num(r.centroid.partial_delay),
                         num(r.power), mem);
    }
    return s;
}

inline std::vector<ClusterRow> read_clusters(const fs::path &file)
{
    std::vector<ClusterRow> rows;
    for_each_jsonl(file,
                   [&](const Json &j, std::size_t ln)
                   {
                       ClusterRow r;
                       r.snapshot = detail::json_int(j, "snapshot", file, ln);
                       r.cluster = detail::json_int(j, "cluster", file, ln);
                       if (!j.contains("io") || !j["io"].is_array() || j["io"].size() != 3)
                           data_error(file, ln, "field 'io' must be [x, y, z]");
                       for (int i = 0; i < 3; ++i)
                           r.centroid.io(i) = j["io"][i].get<double>();
                       r.centroid.partial_delay = detail::json_number(j, "partial_delay_s", file, ln);
                       r.power = detail::json_number(j, "power", file, ln);
                       if (!j.contains("members") || !j["members"].is_array() || j["members"].empty())
                           data_error(file, ln, "field 'members' must be a non-empty array");
                       for (const auto &m : j["members"])
                       {
                           if (!m.is_number_unsigned())
                               data_error(file, ln, "members must be MPC indices");
                           r.members.push_back(m.get<std::size_t>());
                       }
                       rows.push_back(std::move(r));
                   });
    return rows;
}

// Truth labels (planted group per MPC) from a truth.json sidecar
inline std::vector<int> read_truth_labels(const fs::path &file)
{
    Json j;
    try
    {
        j = Json::parse(read_text(file));
    }
    catch (const Json::parse_error &e)
    {
        throw Error(ErrorCode::data, fmt::format("{}: {}", file.string(), e.what()));
    }
    if (!j.contains("labels") || !j["labels"].is_array())
        throw Error(ErrorCode::data, fmt::format("{}: missing 'labels' array", file.string()));
    return j["labels"].get<std::vector<int>>();
}

inline StageReport stage_cluster(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("cluster")};
    const auto its = read_interactions(ctx.use(cfg.out("interactions.jsonl")));
    const auto snaps = by_snapshot(its);
    std::vector<int> keys;
    std::vector<const std::vector<Interaction> *> groups;
    for (const auto &[n, v] : snaps)
    {
        keys.push_back(n);
        groups.push_back(&v);
    }

    auto cluster_all = [&](double delta)
    {
        ClusteringConfig cc = cfg.clustering;
        cc.delta_mcd = delta;
        std::vector<SnapshotClustering> res(groups.size());
        detail::parallel_for(groups.size(), cfg.threads,
                             [&](std::size_t i) { res[i] = cluster_snapshot(*groups[i], cc); });
        return res;
    };

    double delta = cfg.clustering.delta_mcd;
    if (!cfg.cvi_grid.empty())
    {
        std::vector<double> grid = cfg.cvi_grid;
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        std::vector<CviScore> scores;
        for (double g : grid)
        {
            const auto res = cluster_all(g);
            CviScore s{g, 0, 0.0, 0.0, 0};
            for (std::size_t i = 0; i < res.size(); ++i)
            {
                s.clusters += res[i].cluster_count();
                s.davies_bouldin += davies_bouldin(res[i], *groups[i]);
                s.silhouette += silhouette(res[i], *groups[i]);
            }
            if (!res.empty())
            {
                s.davies_bouldin /= double(res.size());
                s.silhouette /= double(res.size());
            }
            scores.push_back(s);
        }
        const std::size_t best = rank_scores(scores);
        delta = scores[best].delta_mcd;
        std::string csv = "delta_mcd,clusters,davies_bouldin,silhouette,rank_sum,selected\n";
        for (std::size_t i = 0; i < scores.size(); ++i)
            csv += fmt::format("{},{},{},{},{},{}\n", cell(scores[i].delta_mcd), scores[i].clusters,
                               cell(scores[i].davies_bouldin), cell(scores[i].silhouette), scores[i].rank_sum,
                               i == best ? 1 : 0);
        ctx.emit("cvi.csv", csv);
    }

    const auto res = cluster_all(delta);
    std::vector<ClusterRow> rows;
    std::string summary = "snapshot,interactions,clusters,converged,iterations\n";
    std::size_t not_converged = 0;
    for (std::size_t i = 0; i < res.size(); ++i)
    {
        const auto &g = *groups[i];
        for (const auto &c : res[i].clusters)
        {
            ClusterRow r;
            r.snapshot = keys[i];
            r.cluster = c.id;
            r.centroid = c.centroid;
            for (auto m : c.members)
            {
                r.members.push_back(g[m].mpc_index);
                r.power += g[m].power;
            }
            rows.push_back(std::move(r));
        }
        summary += fmt::format("{},{},{},{},{}\n", keys[i], g.size(), res[i].cluster_count(),
                               res[i].converged ? 1 : 0, res[i].iterations);
        not_converged += res[i].converged ? 0 : 1;
    }
    ctx.emit("clusters.jsonl", format_clusters(rows));
    ctx.emit("clustering_summary.csv", summary);
    if (not_converged)
        ctx.warn(fmt::format("{} snapshots reached max_iter without converging", not_converged));

    ctx.rep.summary["delta_mcd"] = delta;
    ctx.rep.summary["snapshots"] = res.size();
    ctx.rep.summary["clusters"] = rows.size();

    if (!cfg.in_truth.empty())
    {
        const auto truth = read_truth_labels(ctx.use(cfg.input(cfg.in_truth)));
        Json ari = Json::array();
        double worst = 1.0;
        for (std::size_t i = 0; i < res.size(); ++i)
        {
            const auto &g = *groups[i];
            const auto lab = res[i].labels(g.size());
            std::vector<int> t;
            for (const auto &it : g)
            {
                if (it.mpc_index >= truth.size())
                    throw Error(ErrorCode::data, "truth labels do not cover every MPC");
                t.push_back(truth[it.mpc_index]);
            }
            const double a = adjusted_rand_index(lab, t);
            worst = std::min(worst, a);
            ari.push_back({{"snapshot", keys[i]}, {"ari", a}});
        }
        ctx.rep.summary["ari_min"] = worst;
        ctx.rep.summary["ari"] = ari;
    }
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Stage: cluster tracking

inline StageReport stage_track(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("track")};
    if (!cfg.tracking_enabled)
    {
        ctx.warn("tracking disabled: visibility uses per-snapshot cluster ids");
        ctx.rep.summary["enabled"] = false;
        return ctx.rep;
    }
    const auto its = read_interactions(ctx.use(cfg.out("interactions.jsonl")));
    const auto rows = read_clusters(ctx.use(cfg.out("clusters.jsonl")));
    std::map<std::size_t, const Interaction *> by_index;
    for (const auto &it : its)
        by_index[it.mpc_index] = &it;

    std::map<int, std::vector<TrackObservation>> obs;
    for (const auto &r : rows)
    {
        TrackObservation o;
        o.cluster_id = r.cluster;
        std::vector<Interaction> mem;
        for (auto m : r.members)
        {
            auto f = by_index.find(m);
            if (f == by_index.end())
                throw Error(ErrorCode::data, fmt::format("cluster {} at snapshot {} refers to unmapped MPC {}",
                                                         r.cluster, r.snapshot, m));
            mem.push_back(*f->second);
            o.points.push_back(to_measurement(mcd_point(*f->second)));
            o.weights.push_back(f->second->power);
        }
        std::vector<std::size_t> all(mem.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        o.centroid = to_measurement(centroid(mem, all));
        obs[r.snapshot].push_back(std::move(o));
    }

    Tracker tracker(cfg.filter);
    std::string events, assign = "snapshot,cluster,track_id\n";
    std::map<int, int> death;
    for (const auto &[n, o] : obs)
    {
        for (const auto &e : tracker.step(n, o))
        {
            std::string st;
            for (int i = 0; i < 8; ++i)
                st += (i ? "," : "") + num(e.state(i));
            events += fmt::format(R"({{"snapshot":{},"track_id":{},"status":"{}","cluster":{},"state":[{}]}})"
                                  "\n",
                                  e.snapshot, e.track_id, to_string(e.status),
                                  e.cluster_id ? std::to_string(*e.cluster_id) : std::string("null"), st);
            if (e.cluster_id)
                assign += fmt::format("{},{},{}\n", n, *e.cluster_id, e.track_id);
            if (e.status == TrackStatus::dead)
                death[e.track_id] = n;
        }
    }
    // rows sorted by snapshot then cluster for a stable layout
    {
        auto lines = split(assign, '\n');
        std::vector<std::array<int, 3>> rows3;
        for (std::size_t i = 1; i < lines.size(); ++i)
        {
            if (lines[i].empty())
                continue;
            auto c = split(lines[i], ',');
            int a = 0, b = 0, t = 0;
            parse_int(c[0], a);
            parse_int(c[1], b);
            parse_int(c[2], t);
            rows3.push_back({a, b, t});
        }
        std::sort(rows3.begin(), rows3.end());
        assign = "snapshot,cluster,track_id\n";
        for (const auto &r : rows3)
            assign += fmt::format("{},{},{}\n", r[0], r[1], r[2]);
    }
    ctx.emit("tracks.jsonl", events);
    ctx.emit("cluster_tracks.csv", assign);

    std::string summary = "track_id,birth_snapshot,death_snapshot,lifetime\n";
    std::size_t repairs = 0;
    for (const auto &t : tracker.tracks())
    {
        const auto d = death.find(t.id);
        summary += fmt::format("{},{},{},{}\n", t.id, t.birth_snapshot,
                               d == death.end() ? std::string() : std::to_string(d->second),
                               t.last_seen - t.birth_snapshot + 1);
        repairs += std::size_t(t.psd_repairs);
    }
    ctx.emit("track_summary.csv", summary);
    if (repairs)
        ctx.warn(fmt::format("{} covariance repairs (non-PSD after update)", repairs));
    ctx.rep.summary["enabled"] = true;
    ctx.rep.summary["tracks"] = tracker.tracks().size();
    ctx.rep.summary["dead"] = death.size();
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Stage: visibility and VR extraction

// Cluster identity per mapped MPC: the track id, or the per-snapshot cluster id without tracking
inline std::map<std::size_t, int> cluster_labels(detail::StageContext &ctx)
{
    const auto &cfg = ctx.cfg;
    const auto rows = read_clusters(ctx.use(cfg.out("clusters.jsonl")));
    std::map<std::pair<int, int>, int> track_of;
    if (cfg.tracking_enabled)
    {
        const auto t = read_numeric_csv(ctx.use(cfg.out("cluster_tracks.csv")), {"snapshot", "cluster", "track_id"});
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            track_of[{int(t.rows[i][0]), int(t.rows[i][1])}] = int(t.rows[i][2]);
    }
    else
        ctx.warn("tracking disabled: visibility uses per-snapshot cluster ids");
    std::map<std::size_t, int> label;
    for (const auto &r : rows)
    {
        int id = r.cluster;
        if (cfg.tracking_enabled)
        {
            auto f = track_of.find({r.snapshot, r.cluster});
            if (f == track_of.end())
                throw Error(ErrorCode::data, fmt::format("cluster {} at snapshot {} has no track", r.cluster,
                                                         r.snapshot));
            id = f->second;
        }
        for (auto m : r.members)
            label[m] = id;
    }
    return label;
}

inline PowerTensor build_power_tensor(const std::vector<MpcRecord> &mpcs, const std::vector<Panel> &panels,
                                      const std::map<std::size_t, int> &label)
{
    std::set<int> cl, pn, sn;
    for (const auto &[m, c] : label)
        cl.insert(c);
    for (const auto &p : panels)
        pn.insert(p.id);
    for (const auto &m : mpcs)
        sn.insert(m.snapshot);
    PowerTensor pt({cl.begin(), cl.end()}, {pn.begin(), pn.end()}, {sn.begin(), sn.end()});
    std::map<int, std::size_t> ci, ki, ni;
    for (std::size_t i = 0; i < pt.clusters(); ++i)
        ci[pt.cluster_ids[i]] = i;
    for (std::size_t i = 0; i < pt.panels(); ++i)
        ki[pt.panel_ids[i]] = i;
    for (std::size_t i = 0; i < pt.snapshots(); ++i)
        ni[pt.snapshot_ids[i]] = i;
    for (std::size_t i = 0; i < mpcs.size(); ++i)
    {
        const auto k = ki.at(mpcs[i].panel), n = ni.at(mpcs[i].snapshot);
        pt.link(k, n) += mpcs[i].power();
        auto f = label.find(i);
        if (f != label.end())
            pt.at(ci.at(f->second), k, n) += mpcs[i].power();
    }
    return pt;
}

inline StageReport stage_visibility(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("visibility")};
    const Dataset d = ingest(ctx, false);
    const auto label = cluster_labels(ctx);
    for (const auto &[m, c] : label)
        if (m >= d.mpcs.size())
            throw Error(ErrorCode::data, fmt::format("cluster member {} is not an MPC index", m));
    const PowerTensor pt = build_power_tensor(d.mpcs, d.panels, label);
    const VisibilityTensor vt = link_visibility(pt, cfg.delta_c, cfg.delta_p);
    const SideVisibility sv = side_visibility(vt);
    const auto vrs = extract_vrs(sv, vt.cluster_ids, vt.snapshot_ids, cfg.spacing_bs, cfg.spacing_ue);

    std::string vis = "cluster,panel,snapshot,v\n";
    for (std::size_t c = 0; c < vt.clusters(); ++c)
        for (std::size_t k = 0; k < vt.panels(); ++k)
            for (std::size_t n = 0; n < vt.snapshots(); ++n)
                vis += fmt::format("{},{},{},{}\n", vt.cluster_ids[c], vt.panel_ids[k], vt.snapshot_ids[n],
                                   int(vt.at(c, k, n)));
    ctx.emit("visibility.csv", vis);

    std::string csv = "side,cluster,snapshot,vr_index,length_m,censor_class\n";
    std::size_t nbs = 0, nue = 0;
    for (const auto &v : vrs)
    {
        csv += fmt::format("{},{},{},{},{},{}\n", to_string(v.side), v.cluster, v.snapshot, v.vr_index,
                           cell(v.length), to_string(v.censor));
        (v.side == Side::bs ? nbs : nue) += 1;
    }
    ctx.emit("vrs.csv", csv);

    Json win;
    win["bs"] = {{"window_m", double(vt.panels() - 1) * cfg.spacing_bs},
                 {"delta0_m", cfg.delta0_bs},
                 {"positions", vt.panels()}};
    win["ue"] = {{"window_m", double(vt.snapshots() - 1) * cfg.spacing_ue},
                 {"delta0_m", cfg.delta0_ue},
                 {"positions", vt.snapshots()}};
    ctx.emit("vr_windows.json", dump(win));

    // panel line spacing check
    std::vector<Panel> sorted = d.panels;
    std::sort(sorted.begin(), sorted.end(), [](const Panel &a, const Panel &b) { return a.id < b.id; });
    for (std::size_t k = 1; k < sorted.size(); ++k)
    {
        const double s = (sorted[k].position - sorted[k - 1].position).norm();
        if (std::abs(s - cfg.spacing_bs) > 0.01 * cfg.spacing_bs)
        {
            ctx.warn(fmt::format("panels {} and {} are {} m apart, spacing_bs is {} m", sorted[k - 1].id,
                                 sorted[k].id, s, cfg.spacing_bs));
            break;
        }
    }
    std::size_t visible = 0;
    for (auto v : vt.v)
        visible += v;
    ctx.rep.summary["clusters"] = vt.clusters();
    ctx.rep.summary["visible_entries"] = visible;
    ctx.rep.summary["bs_vrs"] = nbs;
    ctx.rep.summary["ue_vrs"] = nue;
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Stage: VR statistics

inline std::vector<VrObservation> read_vrs(const fs::path &file)
{
    auto in = open_input(file);
    std::vector<VrObservation> out;
    std::string s;
    std::size_t ln = 0;
    while (std::getline(in, s))
    {
        ++ln;
        if (ln == 1 || trim(s).empty())
            continue;
        const auto c = split(trim(s), ',');
        if (c.size() != 6)
            data_error(file, ln, "expected 6 columns");
        VrObservation v;
        if (c[0] == "BS")
            v.side = Side::bs;
        else if (c[0] == "UE")
            v.side = Side::ue;
        else
            data_error(file, ln, "side must be BS or UE");
        if (!parse_int(c[1], v.cluster) || !parse_int(c[2], v.snapshot) || !parse_int(c[3], v.vr_index) ||
            !parse_double(c[4], v.length))
            data_error(file, ln, "malformed numeric column");
        if (c[5] == "chi00")
            v.censor = CensorClass::c00;
        else if (c[5] == "chi01")
            v.censor = CensorClass::c01;
        else if (c[5] == "chi10")
            v.censor = CensorClass::c10;
        else if (c[5] == "chi11")
            v.censor = CensorClass::c11;
        else
            data_error(file, ln, "unknown censor class");
        out.push_back(v);
    }
    return out;
}

inline StageReport stage_vr_stats(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("vr-stats")};
    const auto vrs = read_vrs(ctx.use(cfg.out("vrs.csv")));
    Json win;
    try
    {
        win = Json::parse(read_text(ctx.use(cfg.out("vr_windows.json"))));
    }
    catch (const Json::parse_error &e)
    {
        throw Error(ErrorCode::data, std::string("vr_windows.json: ") + e.what());
    }

    Json fits = Json::object();
    std::string table = "side,vrs,observed_mean_m,lambda_y_m,radius_m,vr_count_lambda,n00,n01,n10,n11,window_m,"
                        "delta0_m,closed_form,residual_m\n";
    for (Side side : {Side::bs, Side::ue})
    {
        const std::string key = side == Side::bs ? "bs" : "ue";
        const double L = win[key]["window_m"].get<double>();
        const double d0 = win[key]["delta0_m"].get<double>();
        std::vector<VrObservation> sel;
        std::vector<double> lengths;
        std::map<std::pair<int, int>, int> rows;
        for (const auto &v : vrs)
            if (v.side == side)
            {
                sel.push_back(v);
                lengths.push_back(v.length);
                ++rows[{v.cluster, v.snapshot}];
            }
        Json f;
        f["vrs"] = sel.size();
        f["window_m"] = L;
        f["delta0_m"] = d0;
        if (sel.empty())
        {
            ctx.warn(fmt::format("no {}-VRs observed", to_string(side)));
            fits[key] = f;
            continue;
        }
        std::vector<int> counts;
        for (const auto &[r, n] : rows)
            counts.push_back(n);
        const auto pois = fit_shifted_poisson(counts);
        f["vr_count_lambda"] = pois.lambda;
        double observed_mean = std::nan("");
        try
        {
            observed_mean = fit_exponential(lengths).mean;
        }
        catch (const Error &)
        {
            ctx.warn(fmt::format("{}-VR observed lengths are all zero", to_string(side)));
        }
        f["observed_mean_m"] = std::isfinite(observed_mean) ? Json(observed_mean) : Json(nullptr);

        std::optional<CensoredMleResult> mle;
        if (L > d0)
        {
            try
            {
                mle = censored_vr_mle(sel, L, d0);
            }
            catch (const Error &e)
            {
                ctx.warn(fmt::format("{}-VR MLE failed: {}", to_string(side), e.what()));
            }
        }
        else
            ctx.warn(fmt::format("{}-VR window {} m does not exceed delta0 {} m", to_string(side), L, d0));
        if (mle)
        {
            f["lambda_y_m"] = mle->lambda_y;
            f["lambda_numeric_m"] = mle->lambda_numeric;
            f["residual_m"] = mle->residual;
            f["radius_m"] = vr_radius(mle->lambda_y);
            f["closed_form"] = mle->closed_form;
            f["n0"] = mle->n0;
            f["gamma_m"] = mle->gamma;
            f["censor_counts"] = {{"chi00", mle->n00}, {"chi01", mle->n01}, {"chi10", mle->n10}, {"chi11", mle->n11}};
            if (!mle->diagnostic.empty())
            {
                f["diagnostic"] = mle->diagnostic;
                ctx.warn(fmt::format("{}-VR MLE: {}", to_string(side), mle->diagnostic));
            }
        }
        fits[key] = f;
        table += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(side), sel.size(),
                             cell(observed_mean), mle ? cell(mle->lambda_y) : "nan",
                             mle ? cell(vr_radius(mle->lambda_y)) : "nan", cell(pois.lambda),
                             mle ? mle->n00 : 0, mle ? mle->n01 : 0, mle ? mle->n10 : 0, mle ? mle->n11 : 0,
                             cell(L), cell(d0), mle ? (mle->closed_form ? 1 : 0) : 0,
                             mle ? cell(mle->residual) : "nan");
    }
    ctx.emit("vr_fits.json", dump(fits));
    ctx.emit("table1.csv", table);
    ctx.rep.summary = fits;
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Stage: cluster-level statistics

inline VisibilityTensor read_visibility(const fs::path &file)
{
    const auto t = read_numeric_csv(file, {"cluster", "panel", "snapshot", "v"});
    std::set<int> cs, ks, ns;
    for (const auto &r : t.rows)
    {
        cs.insert(int(r[0]));
        ks.insert(int(r[1]));
        ns.insert(int(r[2]));
    }
    VisibilityTensor vt;
    vt.cluster_ids.assign(cs.begin(), cs.end());
    vt.panel_ids.assign(ks.begin(), ks.end());
    vt.snapshot_ids.assign(ns.begin(), ns.end());
    vt.v.assign(vt.clusters() * vt.panels() * vt.snapshots(), 0);
    auto index = [](const std::vector<int> &ids, int x)
    { return std::size_t(std::lower_bound(ids.begin(), ids.end(), x) - ids.begin()); };
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        const auto &r = t.rows[i];
        if (r[3] != 0.0 && r[3] != 1.0)
            data_error(file, t.line[i], "v must be 0 or 1");
        vt.at(index(vt.cluster_ids, int(r[0])), index(vt.panel_ids, int(r[1])), index(vt.snapshot_ids, int(r[2]))) =
            std::uint8_t(r[3]);
    }
    return vt;
}

inline StageReport stage_stats(const PipelineConfig &cfg)
{
    detail::StageContext ctx{cfg, stage_report("stats")};
    const Dataset d = ingest(ctx, false);
    const auto label = cluster_labels(ctx);
    const VisibilityTensor vt = read_visibility(ctx.use(cfg.out("visibility.csv")));
    const PowerTensor pt = build_power_tensor(d.mpcs, d.panels, label);
    if (pt.cluster_ids != vt.cluster_ids || pt.panel_ids != vt.panel_ids || pt.snapshot_ids != vt.snapshot_ids)
        throw Error(ErrorCode::data, "visibility.csv does not match the current clusters and links");

    // members per (cluster, panel, snapshot)
    std::map<std::tuple<int, int, int>, std::vector<std::size_t>> members;
    for (const auto &[m, c] : label)
        members[{c, d.mpcs[m].panel, d.mpcs[m].snapshot}].push_back(m);
    std::map<int, Vec3> panel_pos;
    for (const auto &p : d.panels)
        panel_pos[p.id] = p.position;

    // common clusters
    const auto cc = common_cluster_ratios(vt, pt, cfg.spacing_bs);
    {
        std::string s = "distance_m,rc,rp\n";
        for (std::size_t i = 0; i < cc.distance.size(); ++i)
            s += fmt::format("{},{},{}\n", cell(cc.distance[i]), cell(cc.rc[i]), cell(cc.rp[i]));
        ctx.emit("stats/common_clusters.csv", s);
        std::string p = "panel_a,panel_b,distance_m,rc_a,rc_b,rp_a,rp_b,rc,rp\n";
        for (const auto &r : cc.pairs)
            p += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.panel_a, r.panel_b, cell(r.distance), cell(r.rc_a),
                             cell(r.rc_b), cell(r.rp_a), cell(r.rp_b), cell(r.rc), cell(r.rp));
        ctx.emit("stats/common_cluster_pairs.csv", p);
        if (cc.skipped)
            ctx.warn(fmt::format("{} link-snapshot terms skipped in common-cluster ratios (no visible cluster)",
                                 cc.skipped));
    }

    // cluster counts per link
    {
        std::string s = "panel,snapshot,visible_clusters\n";
        for (std::size_t k = 0; k < vt.panels(); ++k)
            for (std::size_t n = 0; n < vt.snapshots(); ++n)
                s += fmt::format("{},{},{}\n", vt.panel_ids[k], vt.snapshot_ids[n], count_visible(vt, k, n));
        ctx.emit("stats/cluster_counts.csv", s);
    }

    constexpr double deg = 180.0 / kPi;
    std::string samples_csv = "panel,snapshot,cluster,excess_delay_ns,power_db,sigma_tau_ns,sigma_phi_deg,"
                              "sigma_theta_deg,used,sf_db\n";
    std::string table = "panel,clusters,k_tau_db_per_ns,p0_db,tau_cut_ns,sf_std_db,sigma_tau_mu,sigma_tau_sigma,"
                        "sigma_phi_mu,sigma_phi_sigma,sigma_theta_mu,sigma_theta_sigma";
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            table += fmt::format(",corr_{}_{}", kCorrelationNames[i], kCorrelationNames[j]);
    table += "\n";
    Json per_link = Json::array();

    for (std::size_t k = 0; k < vt.panels(); ++k)
    {
        const int pid = vt.panel_ids[k];
        std::vector<PowerSample> ps;
        std::vector<SpreadSample> sp;
        for (std::size_t n = 0; n < vt.snapshots(); ++n)
        {
            const int sid = vt.snapshot_ids[n];
            const double tau0 = (d.trajectory.at(sid) - panel_pos.at(pid)).norm() / kSpeedOfLight;
            for (std::size_t c = 0; c < vt.clusters(); ++c)
            {
                if (!vt.at(c, k, n))
                    continue;
                const auto f = members.find({vt.cluster_ids[c], pid, sid});
                if (f == members.end())
                    continue;
                std::vector<SpreadMember> sm;
                double pw = 0.0, tw = 0.0;
                for (auto m : f->second)
                {
                    const auto &r = d.mpcs[m];
                    sm.push_back({r.delay, r.azimuth, r.elevation, r.power()});
                    pw += r.power();
                    tw += r.power() * r.delay;
                }
                auto s = intra_cluster_spreads(sm);
                s.panel = pid;
                s.snapshot = sid;
                s.cluster = vt.cluster_ids[c];
                sp.push_back(s);
                ps.push_back({(tw / pw - tau0) * 1e9, pw});
            }
        }

        Json lj;
        lj["panel"] = pid;
        lj["clusters"] = ps.size();
        std::optional<PowerRegression> reg;
        std::optional<double> cut = cfg.tau_cut_ns;
        if (cfg.tau_cut_auto)
            cut = auto_tau_cut(ps, cfg.bin_ns, cfg.margin_db, cfg.min_per_bin);
        try
        {
            reg = power_regression(ps, cut);
        }
        catch (const Error &e)
        {
            ctx.warn(fmt::format("panel {}: regression undefined ({})", pid, e.what()));
        }
        lj["tau_cut_ns"] = cut ? Json(*cut) : Json(nullptr);
        if (reg)
        {
            lj["k_tau_db_per_ns"] = reg->k_tau;
            lj["p0_db"] = reg->p0_db;
            lj["sf_std_db"] = reg->shadowing_std;
            lj["regression_points"] = reg->used;
        }

        std::array<std::vector<double>, 3> pos;
        std::array<std::vector<double>, 4> series;
        for (std::size_t i = 0; i < sp.size(); ++i)
        {
            const double v[3] = {sp[i].delay * 1e9, sp[i].azimuth * deg, sp[i].elevation * deg};
            for (int q = 0; q < 3; ++q)
                if (v[q] > 0.0)
                    pos[std::size_t(q)].push_back(v[q]);
            const double sf = reg ? reg->shadowing[i] : std::nan("");
            samples_csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", pid, sp[i].snapshot, sp[i].cluster,
                                       cell(ps[i].excess_delay_ns), cell(10.0 * std::log10(ps[i].power)),
                                       cell(v[0]), cell(v[1]), cell(v[2]), std::isfinite(sf) ? 1 : 0, cell(sf));
            if (std::isfinite(sf))
            {
                series[0].push_back(v[0]);
                series[1].push_back(v[1]);
                series[2].push_back(v[2]);
                series[3].push_back(sf);
            }
        }
        const char *names[3] = {"sigma_tau_ns", "sigma_phi_deg", "sigma_theta_deg"};
        std::array<std::optional<LogNormalFit>, 3> ln;
        for (std::size_t q = 0; q < 3; ++q)
        {
            if (!pos[q].empty())
                ln[q] = fit_lognormal(pos[q]);
            lj[names[q]] = ln[q] ? Json{{"mu", ln[q]->mu}, {"sigma", ln[q]->sigma}, {"samples", pos[q].size()}}
                                 : Json(nullptr);
        }
        const auto corr = cross_correlations(series);
        Json cj = Json::object();
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i + 1; j < 4; ++j)
                cj[fmt::format("{}/{}", kCorrelationNames[i], kCorrelationNames[j])] =
                    corr.value[i][j] ? Json(*corr.value[i][j]) : Json(nullptr);
        lj["correlations"] = cj;
        lj["correlation_samples"] = corr.samples;
        per_link.push_back(lj);

        auto opt = [](const std::optional<double> &x) { return x ? cell(*x) : std::string("nan"); };
        table += fmt::format("{},{},{},{},{},{}", pid, ps.size(), reg ? cell(reg->k_tau) : "nan",
                             reg ? cell(reg->p0_db) : "nan", opt(cut), reg ? cell(reg->shadowing_std) : "nan");
        for (std::size_t q = 0; q < 3; ++q)
            table += fmt::format(",{},{}", ln[q] ? cell(ln[q]->mu) : "nan", ln[q] ? cell(ln[q]->sigma) : "nan");
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i + 1; j < 4; ++j)
                table += "," + opt(corr.value[i][j]);
        table += "\n";
    }
    ctx.emit("stats/cluster_samples.csv", samples_csv);
    ctx.emit("stats/table2.csv", table);

    Json sj;
    sj["thresholds"] = {{"delta_c", cfg.delta_c}, {"delta_p", cfg.delta_p}};
    sj["tau_cut_policy"] = cfg.tau_cut_auto ? Json("auto") : (cfg.tau_cut_ns ? Json(*cfg.tau_cut_ns) : Json("none"));
    sj["links"] = per_link;
    Json ccj = Json::array();
    for (std::size_t i = 0; i < cc.distance.size(); ++i)
        ccj.push_back({{"distance_m", cc.distance[i]}, {"rc", cc.rc[i]}, {"rp", cc.rp[i]}});
    sj["common_clusters"] = ccj;
    ctx.emit("stats/stats.json", dump(sj));
    ctx.rep.summary["links"] = vt.panels();
    ctx.rep.summary["clusters"] = vt.clusters();
    return ctx.rep;
}

// ---------------------------------------------------------------------------------------------
// Orchestration

inline const std::vector<std::pair<std::string, std::function<StageReport(const PipelineConfig &)>>> &stages()
{
    static const std::vector<std::pair<std::string, std::function<StageReport(const PipelineConfig &)>>> s = {
        {"map-ios", stage_map_ios},   {"cluster", stage_cluster},   {"track", stage_track},
        {"visibility", stage_visibility}, {"vr-stats", stage_vr_stats}, {"stats", stage_stats}};
    return s;
}

// Runs one stage, writes report_<stage>.json and tags failures with the stage name
inline StageReport run_stage(const std::string &name, const PipelineConfig &cfg)
{
    for (const auto &[n, f] : stages())
        if (n == name)
        {
            fs::create_directories(cfg.output_dir);
            StageReport r;
            try
            {
                r = f(cfg);
            }
            catch (const Error &e)
            {
                throw Error(e.code(), fmt::format("stage {}: {}", name, e.what()));
            }
            catch (const fs::filesystem_error &e)
            {
                throw Error(ErrorCode::data, fmt::format("stage {}: {}", name, e.what()));
            }
            write_text(cfg.out("report_" + name + ".json"), dump(report_json(cfg, r)));
            return r;
        }
    throw Error(ErrorCode::config, "unknown stage " + name);
}

inline std::vector<StageReport> run_pipeline(const PipelineConfig &cfg)
{
    std::vector<StageReport> reps;
    for (const auto &[n, f] : stages())
        reps.push_back(run_stage(n, cfg));
    Json j;
    j["config"] = cfg.resolved();
    Json st = Json::array();
    for (const auto &r : reps)
    {
        Json s = report_json(cfg, r);
        s.erase("config");
        st.push_back(s);
    }
    j["stages"] = st;
    write_text(cfg.out("resolved_config.json"), dump(cfg.resolved()));
    write_text(cfg.out("report.json"), dump(j));
    return reps;
}

// ---------------------------------------------------------------------------------------------
// Synthetic bundles

// Writes a scene generated from cfg.synth as input files plus truth.json and a config.json that
// points the pipeline at them
inline Json write_synthetic_bundle(const PipelineConfig &cfg, const fs::path &dir)
{
    const auto b = gen_clustered_mpcs(cfg.synth);
    fs::create_directories(dir);
    write_text(dir / "mpcs.jsonl", format_mpcs_jsonl(b.mpcs));
    write_text(dir / "panels.csv", format_panels(b.scene.panels));
    write_text(dir / "trajectory.csv", format_trajectory(b.scene.snapshot_ids, b.scene.trajectory));
    write_text(dir / "cloud.ply", format_point_cloud_ply(b.scene.cloud));

    Json t;
    t["seed"] = cfg.synth.seed;
    t["synth"] = cfg.json["synth"];
    Json groups = Json::array();
    for (std::size_t g = 0; g < b.scene.groups.size(); ++g)
    {
        const auto &grp = b.scene.groups[g];
        groups.push_back({{"group", g},
                          {"center", {grp.center.x(), grp.center.y(), grp.center.z()}},
                          {"power_db", grp.power_db},
                          {"weight", grp.weight},
                          {"panels", {b.scene.panels[std::size_t(grp.panel_first)].id,
                                      b.scene.panels[std::size_t(grp.panel_last)].id}},
                          {"snapshots", {b.scene.snapshot_ids[std::size_t(grp.snapshot_first)],
                                         b.scene.snapshot_ids[std::size_t(grp.snapshot_last)]}}});
    }
    t["groups"] = groups;
    Json counts = Json::array();
    for (const auto &[k, n] : mpc_counts(b.mpcs))
        counts.push_back({{"snapshot", k.first}, {"panel", k.second}, {"mpcs", n}});
    t["counts"] = counts;
    t["mpcs"] = b.mpcs.size();
    t["separation_ratio_min"] = *std::min_element(b.separation_ratio.begin(), b.separation_ratio.end());
    t["labels"] = b.labels;
    write_text(dir / "truth.json", dump(t));

    Json c = default_config_json();
    c["inputs"]["truth"] = "truth.json";
    c["seed"] = cfg.synth.seed;
    c["synth"] = cfg.json["synth"];
    c["visibility"]["spacing_bs"] = cfg.synth.panel_spacing;
    c["visibility"]["spacing_ue"] = cfg.synth.ue_step;
    write_text(dir / "config.json", dump(c));
    return t;
}

} // namespace mpcc

#endif
