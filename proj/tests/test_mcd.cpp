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

#include "mpcc/mcd.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mpcc;

namespace
{
Interaction at(Vec3 io, double tau)
{
    Interaction i;
    i.io_center = io;
    i.partial_delay = tau;
    i.power = 1.0;
    return i;
}
} // namespace

TEST(McdContext, TwoPoint)
{
    const std::vector<Interaction> its = {at(Vec3::Zero(), 0.0), at(Vec3::Zero(), 10e-9)};
    const auto ctx = build_context(its, 1.0);
    EXPECT_NEAR(ctx.max_delay_diff, 10e-9, 1e-24);
    EXPECT_NEAR(ctx.delay_std, 5e-9, 1e-24);
    EXPECT_NEAR(mcd_delay(0.0, 10e-9, ctx), 0.5, 1e-12);
    EXPECT_EQ(mcd_delay(3e-9, 3e-9, ctx), 0.0);
}

TEST(McdContext, Constant)
{
    const std::vector<Interaction> its = {at(Vec3::Zero(), 4e-9), at(Vec3::UnitX(), 4e-9), at(Vec3::UnitY(), 4e-9)};
    const auto ctx = build_context(its, 1.0);
    EXPECT_EQ(ctx.max_delay_diff, 0.0);
    EXPECT_EQ(ctx.delay_std, 0.0);
    EXPECT_TRUE(ctx.degenerate);
    EXPECT_EQ(mcd_delay(1e-9, 9e-9, ctx), 0.0);
}

TEST(McdContext, RandomTwoPass)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 80e-9);
    std::vector<Interaction> its;
    std::vector<double> t;
    for (int i = 0; i < 500; ++i)
    {
        t.push_back(u(rng));
        its.push_back(at(Vec3::Zero(), t.back()));
    }
    double mx = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            mx = std::max(mx, std::abs(t[i] - t[j]));
    double mean = 0, var = 0;
    for (double x : t)
        mean += x / 500.0;
    for (double x : t)
        var += (x - mean) * (x - mean) / 500.0;
    const auto ctx = build_context(its, 2.5);
    EXPECT_NEAR(ctx.max_delay_diff, mx, 1e-22);
    EXPECT_NEAR(ctx.delay_std, std::sqrt(var), 1e-20);

    for (int k = 0; k < 100; ++k)
    {
        const double a = t[std::size_t(k)], b = t[std::size_t(k + 100)];
        EXPECT_NEAR(mcd_delay(a, b, ctx), 2.5 * std::abs(a - b) / mx * std::sqrt(var) / mx, 1e-12);
    }
}

TEST(Mcd, IoAndCombination)
{
    EXPECT_DOUBLE_EQ(mcd_io(Vec3::Zero(), Vec3(3, 4, 0)), 5.0);
    EXPECT_EQ(mcd_io(Vec3(1, 2, 3), Vec3(1, 2, 3)), 0.0);

    // delay component of 4 via zeta with a two-point context
    const std::vector<Interaction> its = {at(Vec3::Zero(), 0.0), at(Vec3::Zero(), 10e-9)};
    const auto ctx = build_context(its, 8.0);
    const auto v = mcd({Vec3::Zero(), 0.0}, {Vec3(3, 0, 0), 10e-9}, ctx);
    EXPECT_NEAR(v.io, 3.0, 1e-15);
    EXPECT_NEAR(v.delay, 4.0, 1e-12);
    EXPECT_NEAR(v.total, 5.0, 1e-12);
}

TEST(Mcd, Properties)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-10.0, 10.0), d(0.0, 50e-9);
    std::vector<Interaction> its;
    for (int i = 0; i < 200; ++i)
        its.push_back(at(Vec3(u(rng), u(rng), u(rng)), d(rng)));
    const auto ctx = build_context(its, 1.0);
    for (std::size_t i = 0; i + 1 < its.size(); ++i)
    {
        const auto a = mcd_point(its[i]), b = mcd_point(its[i + 1]);
        EXPECT_EQ(mcd_total(a, b, ctx), mcd_total(b, a, ctx));
        EXPECT_EQ(mcd_total(a, a, ctx), 0.0);
        const double io = (a.io - b.io).norm();
        const double de = std::abs(a.partial_delay - b.partial_delay) / ctx.max_delay_diff * ctx.delay_std /
                          ctx.max_delay_diff;
        EXPECT_NEAR(mcd_total(a, b, ctx), std::sqrt(io * io + de * de), 1e-12);
        // moving b further away along the IO offset never reduces the distance
        McdPoint far = b;
        far.io = a.io + 1.5 * (b.io - a.io);
        EXPECT_GE(mcd_total(a, far, ctx), mcd_total(a, b, ctx));
    }
}
