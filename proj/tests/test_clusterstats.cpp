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

#include "mpcc/clusterstats.hpp"
#include "mpcc/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mpcc;

namespace
{
// C clusters, 2 panels, 1 snapshot; unit power per cluster and link
struct TwoLinks
{
    VisibilityTensor vt;
    PowerTensor p;
};

TwoLinks two_links(const std::vector<int> &on_a, const std::vector<int> &on_b)
{
    const std::size_t C = on_a.size();
    std::vector<int> ids(C);
    for (std::size_t c = 0; c < C; ++c)
        ids[c] = int(c);
    TwoLinks t;
    t.p = PowerTensor(ids, {0, 1}, {0});
    t.vt.cluster_ids = ids;
    t.vt.panel_ids = {0, 1};
    t.vt.snapshot_ids = {0};
    t.vt.v.assign(C * 2, 0);
    for (std::size_t c = 0; c < C; ++c)
    {
        t.vt.at(c, 0, 0) = std::uint8_t(on_a[c]);
        t.vt.at(c, 1, 0) = std::uint8_t(on_b[c]);
        t.p.at(c, 0, 0) = 1.0;
        t.p.at(c, 1, 0) = 1.0;
    }
    return t;
}
} // namespace

TEST(CommonClusters, Examples)
{
    const auto same = two_links({1, 1, 1}, {1, 1, 1});
    const auto s = common_cluster_ratios(same.vt, same.p, 0.6);
    ASSERT_EQ(s.distance.size(), 1u);
    EXPECT_NEAR(s.distance[0], 0.6, 1e-15);
    EXPECT_EQ(s.rc[0], 1.0);
    EXPECT_EQ(s.rp[0], 1.0);

    const auto disjoint = two_links({1, 1, 0, 0}, {0, 0, 1, 1});
    const auto d = common_cluster_ratios(disjoint.vt, disjoint.p, 0.6);
    EXPECT_EQ(d.rc[0], 0.0);
    EXPECT_EQ(d.rp[0], 0.0);

    // A sees {0, 1}, B sees {1, 2, 3}: 1/2 and 1/3
    const auto half = two_links({1, 1, 0, 0}, {0, 1, 1, 1});
    const auto h = common_cluster_ratios(half.vt, half.p, 0.6);
    EXPECT_NEAR(h.pairs[0].rc_a, 0.5, 1e-15);
    EXPECT_NEAR(h.pairs[0].rc_b, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(h.rc[0], 0.5 * (0.5 + 1.0 / 3.0), 1e-15);

    const auto none = two_links({0, 0}, {0, 0});
    const auto n = common_cluster_ratios(none.vt, none.p, 0.6);
    EXPECT_TRUE(n.distance.empty());
    EXPECT_EQ(n.skipped, 2u);
}

TEST(CommonClusters, BoundedAndDecreasingOnNestedVisibility)
{
    // cluster c is visible on panels [c, c + 3]: overlap shrinks with panel separation
    const std::size_t C = 8, K = 8;
    VisibilityTensor vt;
    PowerTensor p;
    std::vector<int> cids(C), kids(K);
    for (std::size_t i = 0; i < C; ++i)
        cids[i] = int(i);
    for (std::size_t i = 0; i < K; ++i)
        kids[i] = int(i);
    p = PowerTensor(cids, kids, {0});
    vt.cluster_ids = cids;
    vt.panel_ids = kids;
    vt.snapshot_ids = {0};
    vt.v.assign(C * K, 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = c; k < std::min(K, c + 4); ++k)
        {
            vt.at(c, k, 0) = 1;
            p.at(c, k, 0) = 1.0 + double(c);
        }
    const auto r = common_cluster_ratios(vt, p, 0.6);
    for (std::size_t i = 0; i < r.rc.size(); ++i)
    {
        EXPECT_GE(r.rc[i], 0.0);
        EXPECT_LE(r.rc[i], 1.0);
        EXPECT_GE(r.rp[i], 0.0);
        EXPECT_LE(r.rp[i], 1.0);
        if (i)
            EXPECT_LE(r.rc[i], r.rc[i - 1]);
    }
    EXPECT_EQ(r.rc.back(), 0.0);
}

TEST(PowerRegression, ExactLine)
{
    std::vector<PowerSample> s;
    for (int i = 0; i < 30; ++i)
    {
        const double x = 2.5 * i;
        s.push_back({x, std::pow(10.0, (-50.0 - 0.2 * x) / 10.0)});
    }
    const auto r = power_regression(s, std::nullopt);
    EXPECT_NEAR(r.k_tau, 0.2, 1e-9);
    EXPECT_NEAR(r.p0_db, -50.0, 1e-9);
    EXPECT_LT(r.shadowing_std, 1e-9);
    EXPECT_EQ(r.used, 30u);

    const auto cut = power_regression(s, 20.0);
    EXPECT_EQ(cut.used, 8u);
    EXPECT_TRUE(std::isnan(cut.shadowing.back()));

    EXPECT_THROW(power_regression(std::vector<PowerSample>{{1.0, 1.0}}, std::nullopt), Error);
    try
    {
        power_regression(std::vector<PowerSample>{{1.0, 1.0}}, std::nullopt);
    }
    catch (const Error &e)
    {
        EXPECT_EQ(e.code(), ErrorCode::numerical);
    }
}

TEST(PowerRegression, NoisyRecovery)
{
    PowerLawConfig cfg;
    cfg.clusters = 20000;
    const auto s = gen_power_law(cfg);
    const auto r = power_regression(s, std::nullopt);
    EXPECT_NEAR(r.k_tau, 0.219, 0.005);
    EXPECT_NEAR(r.p0_db, -60.0, 0.3);
    EXPECT_NEAR(r.shadowing_std, 5.0, 0.1);
}

TEST(PowerRegression, ScaleInvariantSlope)
{
    PowerLawConfig cfg;
    cfg.seed = 4;
    auto s = gen_power_law(cfg);
    const auto a = power_regression(s, std::nullopt);
    for (auto &x : s)
        x.power *= 1000.0;
    const auto b = power_regression(s, std::nullopt);
    EXPECT_NEAR(a.k_tau, b.k_tau, 1e-10);
    EXPECT_NEAR(b.p0_db - a.p0_db, 30.0, 1e-9);
}

TEST(PowerRegression, AutoCut)
{
    PowerLawConfig cfg;
    cfg.clusters = 4000;
    cfg.shadowing_std = 1.0;
    cfg.tau_cut_ns = 60.0;
    const auto s = gen_power_law(cfg);
    const auto cut = auto_tau_cut(s);
    ASSERT_TRUE(cut);
    EXPECT_NEAR(*cut, 50.0, 10.0 + 1e-9);
    const auto r = power_regression(s, cut);
    EXPECT_NEAR(r.k_tau, 0.219, 0.01);

    cfg.tau_cut_ns.reset();
    EXPECT_FALSE(auto_tau_cut(std::vector<PowerSample>{{1.0, 1.0}}));
}

TEST(Spreads, Examples)
{
    const std::vector<SpreadMember> two = {{0.0, 0.0, 1.0, 1.0}, {10e-9, 0.0, 1.0, 1.0}};
    const auto s = intra_cluster_spreads(two);
    EXPECT_NEAR(s.delay, 5e-9, 1e-20);
    EXPECT_EQ(s.azimuth, 0.0);
    EXPECT_EQ(s.elevation, 0.0);

    // members straddling the +-pi seam
    const std::vector<SpreadMember> seam = {{1e-8, kPi - 0.05, 1.0, 1.0}, {1e-8, -kPi + 0.05, 1.0, 1.0}};
    EXPECT_NEAR(intra_cluster_spreads(seam).azimuth, 0.05, 1e-12);

    EXPECT_NEAR(wrap_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
    EXPECT_NEAR(wrap_angle(-kPi / 2.0), -kPi / 2.0, 1e-15);
    EXPECT_THROW(intra_cluster_spreads(std::vector<SpreadMember>{}), Error);
}

TEST(Spreads, WeightedMomentOracle)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> d(0.0, 100e-9), a(-0.6, 0.6), e(0.5, 2.0), w(0.01, 1.0);
    for (int t = 0; t < 30; ++t)
    {
        std::vector<SpreadMember> m(25);
        std::vector<double> dl, az, el, pw;
        for (auto &x : m)
        {
            x = {d(rng), a(rng), e(rng), w(rng)};
            dl.push_back(x.delay);
            az.push_back(x.azimuth);
            el.push_back(x.elevation);
            pw.push_back(x.power);
        }
        const auto s = intra_cluster_spreads(m);
        EXPECT_NEAR(s.delay, oracle::weighted_std(dl, pw), 1e-18);
        EXPECT_NEAR(s.azimuth, oracle::weighted_std(az, pw), 1e-12);
        EXPECT_NEAR(s.elevation, oracle::weighted_std(el, pw), 1e-12);

        // rotating all azimuths leaves the spread unchanged
        for (auto &x : m)
            x.azimuth = wrap_angle(x.azimuth + 2.9);
        EXPECT_NEAR(intra_cluster_spreads(m).azimuth, s.azimuth, 1e-12);
    }
}

TEST(Correlation, Pearson)
{
    const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1}, c = {1, 1, 1, 1};
    EXPECT_NEAR(*pearson(x, y), 1.0, 1e-15);
    EXPECT_NEAR(*pearson(x, z), -1.0, 1e-15);
    EXPECT_FALSE(pearson(x, c));
    EXPECT_FALSE(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 50; ++t)
    {
        std::vector<double> a(40), b(40);
        for (std::size_t i = 0; i < 40; ++i)
        {
            a[i] = g(rng);
            b[i] = 0.5 * a[i] + g(rng);
        }
        EXPECT_NEAR(*pearson(a, b), oracle::pearson(a, b), 1e-12);
    }
}

TEST(Correlation, Matrix)
{
    std::array<std::vector<double>, 4> s;
    for (int i = 0; i < 10; ++i)
    {
        s[0].push_back(i);
        s[1].push_back(2.0 * i + 1.0);
        s[2].push_back(-i);
        s[3].push_back(i % 2);
    }
    const auto m = cross_correlations(s);
    EXPECT_EQ(m.samples, 10u);
    for (int i = 0; i < 4; ++i)
    {
        EXPECT_EQ(*m.value[i][i], 1.0);
        for (int j = 0; j < 4; ++j)
            EXPECT_EQ(*m.value[i][j], *m.value[j][i]);
    }
    EXPECT_NEAR(*m.value[0][1], 1.0, 1e-15);
    EXPECT_NEAR(*m.value[0][2], -1.0, 1e-15);
}
