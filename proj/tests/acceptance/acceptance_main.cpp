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

// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit on any failure.
// Usage: mpcc_acceptance [AC1 AC2 ...]

#include "mpcc/mpcc.hpp"
#include "mpcc/pipeline.hpp"
#include "../oracles.hpp"

#include <fmt/core.h>

#include <chrono>
#include <functional>
#include <random>
#include <set>

using namespace mpcc;

namespace
{
struct Outcome
{
    bool pass = false;
    std::string detail;
};

oracle::P3 p3(const Vec3 &v) { return {v.x(), v.y(), v.z()}; }

oracle::Mat to_mat(const Eigen::MatrixXd &m)
{
    oracle::Mat r = oracle::zeros(std::size_t(m.rows()), std::size_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r[std::size_t(i)][std::size_t(j)] = m(i, j);
    return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Joint clustering of seeded 8-link scenes against the planted groups
Outcome ac1()
{
    int exact = 0;
    double worst_t = 0.0, min_sep = 1e300;
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
    {
        SceneConfig cfg;
        cfg.seed = seed;
        cfg.snapshots = 1;
        cfg.panels = 8;
        cfg.mpcs_per_link = 200;
        cfg.partial_visibility = false;
        const auto b = gen_clustered_mpcs(cfg);
        min_sep = std::min(min_sep, b.separation_ratio.front());

        const auto t0 = std::chrono::steady_clock::now();
        const PointCloud cloud(b.scene.cloud);
        const auto rep = map_all(b.mpcs, b.scene.panels, cloud, GeometryConfig{});
        const auto sc = cluster_snapshot(rep.interactions, ClusteringConfig{});
        worst_t = std::max(worst_t, seconds_since(t0));

        // unmapped MPCs count as singletons
        const auto lab = sc.labels(rep.interactions.size());
        std::vector<int> full(b.mpcs.size(), -1);
        for (std::size_t i = 0; i < rep.interactions.size(); ++i)
            full[rep.interactions[i].mpc_index] = lab[i];
        int next = 1 << 20;
        for (auto &f : full)
            if (f < 0)
                f = next++;
        exact += adjusted_rand_index(full, b.labels) == 1.0;
    }
    return {exact >= 48 && worst_t < 5.0 && min_sep >= 10.0,
            fmt::format("ARI=1 on {}/50 scenes, slowest {:.2f} s, min separation {:.1f}x", exact, worst_t, min_sep)};
}

// Spatial queries against brute force on 10^4-point clouds
Outcome ac2()
{
    int ray_ok = 0, db_ok = 0;
    for (int seed = 0; seed < 100; ++seed)
    {
        std::mt19937_64 rng(derive_seed(2002, std::uint64_t(seed)));
        std::uniform_real_distribution<double> u(0.0, 10.0), az(-kPi, kPi), el(0.0, kPi);
        std::vector<Vec3> pts;
        std::vector<oracle::P3> raw;
        for (int i = 0; i < 10000; ++i)
        {
            pts.emplace_back(u(rng), u(rng), u(rng));
            raw.push_back(p3(pts.back()));
        }
        const PointCloud cloud(pts);

        bool rays = true;
        for (int q = 0; q < 10 && rays; ++q)
        {
            Ray r;
            r.origin = Vec3(u(rng), u(rng), u(rng));
            const double a = az(rng), e = el(rng);
            r.direction = Vec3(std::sin(e) * std::cos(a), std::sin(e) * std::sin(a), std::cos(e));
            r.max_range = 2.0 + u(rng);
            auto got = ray_candidates(r, cloud, 0.5);
            std::sort(got.begin(), got.end());
            rays = got == oracle::segment_scan(raw, p3(r.origin), p3(r.direction), r.max_range, 0.5);
        }
        ray_ok += rays;

        const auto got = dbscan(pts, 0.5, 5);
        const auto want = oracle::dbscan(raw, 0.5, 5);
        std::set<std::vector<std::size_t>> groups;
        for (auto &g : got.groups())
            groups.insert(g);
        std::vector<std::size_t> noise;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (got.labels[i] < 0)
                noise.push_back(i);
        db_ok += groups == want.groups && noise == want.noise;
    }
    return {ray_ok == 100 && db_ok == 100,
            fmt::format("ray candidates exact on {}/100 seeds, DBSCAN partitions exact on {}/100", ray_ok, db_ok)};
}

// Filter cycle against dense matrices, convergence and miss tolerance
Outcome ac3()
{
    std::mt19937_64 rng(3003);
    std::normal_distribution<double> g(0.0, 1.0);
    auto spd = [&](double s)
    {
        StateCov a;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                a(i, j) = g(rng);
        return StateCov(s * (a * a.transpose() / 8.0 + 0.1 * StateCov::Identity()));
    };
    double max_err = 0.0;
    for (int t = 0; t < 100; ++t)
    {
        FilterConfig cfg;
        cfg.Q = spd(0.01);
        cfg.R = spd(0.1).topLeftCorner<4, 4>();
        Track tr;
        for (int i = 0; i < 8; ++i)
            tr.state(i) = g(rng);
        tr.cov = spd(1.0);
        Meas z;
        for (int i = 0; i < 4; ++i)
            z(i) = g(rng);
        const Track got = update(predict(tr, cfg), z, cfg, 1);
        const oracle::Mat zm = to_mat(z);
        const auto want = oracle::kalman_cycle({to_mat(tr.state), to_mat(tr.cov)}, to_mat(cfg.Q), to_mat(cfg.R), &zm);
        for (int i = 0; i < 8; ++i)
        {
            max_err = std::max(max_err, std::abs(got.state(i) - want.x[std::size_t(i)][0]));
            for (int j = 0; j < 8; ++j)
                max_err = std::max(max_err, std::abs(got.cov(i, j) - want.m[std::size_t(i)][std::size_t(j)]));
        }
    }

    // noiseless constant velocity: RMSE over targets after 10 updates
    MovingClusterConfig mc;
    mc.snapshots = 11;
    mc.targets = {{Meas(3, 4, 1.5, 40), Meas(0.2, -0.1, 0, 0.6), 0, 1000, {}},
                  {Meas(-8, 2, 1, 80), Meas(-0.1, 0.24, 0.01, -0.3), 0, 1000, {}}};
    FilterConfig quiet = FilterConfig::defaults();
    quiet.Q.setZero();
    Tracker tracker(quiet);
    double se = 0.0;
    for (const auto &s : gen_moving_cluster(mc))
    {
        tracker.step(s.snapshot, s.observations);
        if (s.snapshot == 10)
            for (std::size_t k = 0; k < 2; ++k)
                se += (tracker.tracks()[k].position().head<3>() - s.truth[k].head<3>()).squaredNorm();
    }
    const double rmse = std::sqrt(se / 2.0);

    auto gap_run = [](int gap_len)
    {
        MovingClusterConfig m;
        m.snapshots = 20;
        m.targets = {{Meas(0, 0, 1, 20), Meas(0.1, 0, 0, 0.1), 0, 1000, {{5, 4 + gap_len}}}};
        Tracker tr(FilterConfig::defaults());
        for (const auto &s : gen_moving_cluster(m))
            tr.step(s.snapshot, s.observations);
        return tr.tracks();
    };
    const auto five = gap_run(5), six = gap_run(6);
    const bool survives = five.size() == 1 && five[0].status == TrackStatus::tracked && five[0].id == 0;
    const bool dies = six.size() == 2 && six[0].status == TrackStatus::dead && six[1].birth_snapshot == 11;

    return {max_err <= 1e-12 && rmse < 1e-3 && survives && dies,
            fmt::format("cycle max abs error {:.1e}, CV RMSE after 10 updates {:.1e} m, 5 misses {}, 6 misses {}",
                        max_err, rmse, survives ? "survive" : "LOST", dies ? "die" : "SURVIVE")};
}

// Closed-form VR mean against an independent maximiser and against truth
Outcome ac4()
{
    double worst_rel = 0.0;
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> lam(0.5, 8.0), win(4.0, 20.0), d0(0.05, 0.5);
    std::uniform_int_distribution<int> cnt(30, 400);
    for (int t = 0; t < 100; ++t)
    {
        VrProcessConfig c;
        c.seed = derive_seed(4004, std::uint64_t(t));
        c.mean_length = lam(rng);
        c.window = win(rng);
        c.delta0 = d0(rng);
        c.count = std::size_t(cnt(rng));
        const auto p = gen_vr_process(c);
        const auto r = censored_vr_mle(p.observed, c.window, c.delta0);
        std::vector<oracle::CensoredObs> o;
        for (const auto &v : p.observed)
            o.push_back({v.length, int(v.censor)});
        const double want = oracle::censored_argmax(o, c.window, c.delta0, 0.01, 500.0);
        worst_rel = std::max(worst_rel, r.closed_form ? std::abs(r.lambda_y - want) / want : 1.0);
    }

    std::string per;
    bool recover = true;
    for (double lambda : {1.0, 3.0, 6.0})
    {
        int ok = 0;
        for (int t = 0; t < 50; ++t)
        {
            VrProcessConfig c;
            c.seed = derive_seed(std::uint64_t(lambda * 1000), std::uint64_t(t));
            c.mean_length = lambda;
            c.window = 12.0;
            c.delta0 = 0.24;
            c.count = 2000;
            const auto r = censored_vr_mle(gen_vr_process(c).observed, 12.0, 0.24);
            ok += std::abs(r.lambda_y - lambda) <= 0.1 * lambda;
        }
        recover = recover && ok >= 45;
        per += fmt::format(" {}m:{}/50", lambda, ok);
    }
    return {worst_rel <= 1e-4 && recover,
            fmt::format("closed form vs numeric worst rel {:.1e} over 100 datasets; within 10%:{}", worst_rel, per)};
}

Outcome ac5()
{
    const double a = vr_radius(2.14), b = vr_radius(5.83);
    return {std::abs(a - 1.36) <= 0.01 && std::abs(b - 3.71) <= 0.01,
            fmt::format("vr_radius(2.14) = {:.4f} m, vr_radius(5.83) = {:.4f} m", a, b)};
}

Outcome ac6()
{
    double e_lambda = 0.0, e_mu = 0.0, e_sigma = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        VrProcessConfig c;
        c.seed = seed;
        c.count = 1;
        c.clusters = 10000;
        c.count_rate = 0.8;
        e_lambda = std::max(e_lambda, std::abs(fit_shifted_poisson(gen_vr_process(c).counts).lambda - 0.8));

        std::mt19937_64 rng(derive_seed(seed, 6));
        std::lognormal_distribution<double> ln(0.92, 0.25);
        std::vector<double> x(10000);
        for (auto &v : x)
            v = ln(rng);
        const auto f = fit_lognormal(x);
        e_mu = std::max(e_mu, std::abs(f.mu - 0.92));
        e_sigma = std::max(e_sigma, std::abs(f.sigma - 0.25));
    }
    return {e_lambda <= 0.05 && e_mu <= 0.05 && e_sigma <= 0.05,
            fmt::format("worst |error| over 20 seeds: lambda {:.4f}, mu {:.4f}, sigma {:.4f}", e_lambda, e_mu, e_sigma)};
}

Outcome ac7()
{
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
    {
        PowerLawConfig c;
        c.seed = seed;
        c.clusters = 500;
        c.k_tau = 0.219;
        c.shadowing_std = 5.0;
        const auto r = power_regression(gen_power_law(c), std::nullopt);
        ok += std::abs(r.k_tau - 0.219) <= 0.02 && std::abs(r.shadowing_std - 5.0) <= 0.5;
    }
    return {ok >= 45, fmt::format("slope and shadowing within tolerance on {}/50 seeds", ok)};
}

Outcome ac8()
{
    std::mt19937_64 rng(8008);
    std::uniform_int_distribution<int> bit(0, 1), len(1, 64);
    int match = 0;
    for (int t = 0; t < 10000; ++t)
    {
        std::vector<int> w(std::size_t(len(rng)));
        for (auto &x : w)
            x = bit(rng);
        const std::vector<Tri> tw(w.begin(), w.end());
        const auto got = extract_runs(tw, 1.0);
        const auto want = oracle::runs(w);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i)
        {
            const auto cls = want[i].at_start ? (want[i].at_end ? CensorClass::c11 : CensorClass::c10)
                                              : (want[i].at_end ? CensorClass::c01 : CensorClass::c00);
            same = got[i].first == want[i].first && got[i].last == want[i].last && got[i].censor == cls &&
                   got[i].length == double(want[i].last - want[i].first);
        }
        match += same;
    }

    int monotone = 0;
    const double grid[] = {0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8};
    for (int t = 0; t < 50; ++t)
    {
        std::uniform_int_distribution<int> dim(2, 8);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const std::size_t C = std::size_t(dim(rng)), K = std::size_t(dim(rng)), N = std::size_t(dim(rng));
        std::vector<int> cid(C), kid(K), nid(N);
        std::iota(cid.begin(), cid.end(), 0);
        std::iota(kid.begin(), kid.end(), 0);
        std::iota(nid.begin(), nid.end(), 0);
        PowerTensor p(cid, kid, nid);
        for (auto &x : p.cluster_link)
            x = u(rng) < 0.3 ? 0.0 : std::pow(u(rng), 4.0);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n)
            {
                double s = 0.1 * u(rng);
                for (std::size_t c = 0; c < C; ++c)
                    s += p.at(c, k, n);
                p.link(k, n) = s;
            }
        bool ok = true;
        for (double c1 : grid)
            for (double c2 : grid)
                for (double p1 : grid)
                    for (double p2 : grid)
                        if (c1 <= c2 && p1 <= p2)
                        {
                            const auto lo = link_visibility(p, c1, p1), hi = link_visibility(p, c2, p2);
                            for (std::size_t i = 0; ok && i < lo.v.size(); ++i)
                                ok = lo.v[i] >= hi.v[i];
                        }
        monotone += ok;
    }
    return {match == 10000 && monotone == 50,
            fmt::format("runs match brute force on {}/10000 strings, monotone on {}/50 tensors", match, monotone)};
}

std::map<std::string, std::string> hashes(const fs::path &dir)
{
    std::map<std::string, std::string> h;
    for (const auto &e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            h[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
    return h;
}

Outcome ac9()
{
    const auto root = fs::temp_directory_path() / "mpcc_acceptance_ac9";
    fs::remove_all(root);
    write_synthetic_bundle(load_config(std::nullopt, {"synth.snapshots=12", "seed=9"}), root);
    auto run = [&](const std::string &out, unsigned threads)
    {
        auto cfg = load_config(root / "config.json", {"output_dir=" + out});
        cfg.threads = threads;
        run_pipeline(cfg);
        return hashes(root / out);
    };
    const auto a = run("run1", 1), b = run("run2", 1), c = run("run4", 4);
    return {!a.empty() && a == b && a == c,
            fmt::format("{} output files; two runs {}, 1 vs 4 threads {}", a.size(), a == b ? "identical" : "DIFFER",
                        a == c ? "identical" : "DIFFER")};
}
} // namespace

int main(int argc, char **argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}};
    const std::set<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const auto &[name, f] : all)
    {
        if (!only.empty() && !only.count(name))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = f();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        fmt::print("[{}] {} {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", name, o.detail, seconds_since(t0));
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
