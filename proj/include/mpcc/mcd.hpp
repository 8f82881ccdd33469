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

#ifndef MPCC_MCD_HPP
#define MPCC_MCD_HPP

#include "mpcc/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace mpcc
{

// Global-frame coordinates of an MPC (or of a cluster centroid acting as a pseudo-MPC)
struct McdPoint
{
    Vec3 io = Vec3::Zero();
    double partial_delay = 0.0; // s
};

inline McdPoint mcd_point(const Interaction &it) { return {it.io_center, it.partial_delay}; }

// Delay normalisation shared by all MPC pairs of one snapshot (all links jointly)
struct McdContext
{
    double max_delay_diff = 0.0; // s, max pairwise |tau_P,i - tau_P,j|
    double delay_std = 0.0;      // s, population standard deviation of tau_P
    double zeta = 1.0;           // delay scaling factor
    bool degenerate = false;     // all partial delays identical
};

inline McdContext build_context(std::span<const Interaction> its, double zeta)
{
    if (its.empty())
        throw Error(ErrorCode::invalid_input, "build_context: no interactions");
    if (!(zeta > 0.0))
        throw Error(ErrorCode::invalid_input, "build_context: zeta must be positive");

    McdContext ctx;
    ctx.zeta = zeta;
    double lo = its.front().partial_delay, hi = lo, mean = 0.0;
    for (const auto &it : its)
    {
        lo = std::min(lo, it.partial_delay);
        hi = std::max(hi, it.partial_delay);
        mean += it.partial_delay;
    }
    mean /= double(its.size());
    double var = 0.0;
    for (const auto &it : its)
        var += (it.partial_delay - mean) * (it.partial_delay - mean);
    ctx.max_delay_diff = hi - lo;
    ctx.delay_std = std::sqrt(var / double(its.size()));
    ctx.degenerate = ctx.max_delay_diff == 0.0;
    return ctx;
}

inline double mcd_io(const Vec3 &a, const Vec3 &b) { return (a - b).norm(); }

// zeta * |dtau| / dtau_max * tau_std / dtau_max; zero when the snapshot has no delay dispersion
inline double mcd_delay(double tau_a, double tau_b, const McdContext &ctx)
{
    if (ctx.max_delay_diff <= 0.0)
        return 0.0;
    return ctx.zeta * (std::abs(tau_a - tau_b) / ctx.max_delay_diff) * (ctx.delay_std / ctx.max_delay_diff);
}

struct McdValue
{
    double io = 0.0;    // m
    double delay = 0.0; // dimensionless
    double total = 0.0;
};

inline McdValue mcd(const McdPoint &a, const McdPoint &b, const McdContext &ctx)
{
    McdValue v;
    v.io = mcd_io(a.io, b.io);
    v.delay = mcd_delay(a.partial_delay, b.partial_delay, ctx);
    v.total = std::sqrt(v.io * v.io + v.delay * v.delay);
    return v;
}

inline double mcd_total(const McdPoint &a, const McdPoint &b, const McdContext &ctx)
{
    return mcd(a, b, ctx).total;
}

} // namespace mpcc

#endif
