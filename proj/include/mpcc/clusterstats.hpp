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

#ifndef MPCC_CLUSTERSTATS_HPP
#define MPCC_CLUSTERSTATS_HPP

#include "mpcc/visibility.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace mpcc
{

// ---------------------------------------------------------------------------------------------
// Common clusters between pairs of links

struct PairRatio
{
    int panel_a = 0, panel_b = 0;
    double distance = 0.0; // m
    // normalised by link a / link b; NaN when no snapshot had a visible cluster on that link
    double rc_a = 0.0, rc_b = 0.0, rp_a = 0.0, rp_b = 0.0;
    double rc = 0.0, rp = 0.0; // mean of the two normalisations
};

struct CommonClusterCurve
{
    std::vector<double> distance; // ascending
    std::vector<double> rc, rp;
    std::vector<PairRatio> pairs;
    std::size_t skipped = 0; // (pair, normalisation, snapshot) terms skipped for an empty visible set
};

inline CommonClusterCurve common_cluster_ratios(const VisibilityTensor &vt, const PowerTensor &power,
                                                double panel_spacing)
{
    const std::size_t C = vt.clusters(), K = vt.panels(), N = vt.snapshots();
    CommonClusterCurve out;
    std::map<std::size_t, std::pair<double, double>> acc_sum;
    std::map<std::size_t, std::size_t> acc_n;
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = a + 1; b < K; ++b)
        {
            double rc_sum[2] = {0, 0}, rp_sum[2] = {0, 0};
            std::size_t cnt[2] = {0, 0};
            for (std::size_t n = 0; n < N; ++n)
            {
                std::size_t na = 0, nb = 0, nab = 0;
                double pa = 0, pb = 0, pab = 0;
                for (std::size_t c = 0; c < C; ++c)
                {
                    const bool va = vt.at(c, a, n), vb = vt.at(c, b, n);
                    const double pc = power.cluster_total(c, n);
                    if (va)
                    {
                        ++na;
                        pa += pc;
                    }
                    if (vb)
                    {
                        ++nb;
                        pb += pc;
                    }
                    if (va && vb)
                    {
                        ++nab;
                        pab += pc;
                    }
                }
                const std::size_t nz[2] = {na, nb};
                const double pz[2] = {pa, pb};
                for (int z = 0; z < 2; ++z)
                {
                    if (nz[z] == 0 || !(pz[z] > 0.0))
                    {
                        ++out.skipped;
                        continue;
                    }
                    rc_sum[z] += double(nab) / double(nz[z]);
                    rp_sum[z] += pab / pz[z];
                    ++cnt[z];
                }
            }
            PairRatio pr;
            pr.panel_a = vt.panel_ids[a];
            pr.panel_b = vt.panel_ids[b];
            pr.distance = double(b - a) * panel_spacing;
            const double nan = std::nan("");
            pr.rc_a = cnt[0] ? rc_sum[0] / double(cnt[0]) : nan;
            pr.rp_a = cnt[0] ? rp_sum[0] / double(cnt[0]) : nan;
            pr.rc_b = cnt[1] ? rc_sum[1] / double(cnt[1]) : nan;
            pr.rp_b = cnt[1] ? rp_sum[1] / double(cnt[1]) : nan;
            if (!cnt[0] && !cnt[1])
            {
                pr.rc = pr.rp = nan;
                out.pairs.push_back(pr);
                continue;
            }
            pr.rc = cnt[0] && cnt[1] ? 0.5 * (pr.rc_a + pr.rc_b) : (cnt[0] ? pr.rc_a : pr.rc_b);
            pr.rp = cnt[0] && cnt[1] ? 0.5 * (pr.rp_a + pr.rp_b) : (cnt[0] ? pr.rp_a : pr.rp_b);
            out.pairs.push_back(pr);
            auto &s = acc_sum[b - a];
            s.first += pr.rc;
            s.second += pr.rp;
            ++acc_n[b - a];
        }
    for (const auto &[gap, s] : acc_sum)
    {
        out.distance.push_back(double(gap) * panel_spacing);
        out.rc.push_back(s.first / double(acc_n[gap]));
        out.rp.push_back(s.second / double(acc_n[gap]));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Cluster power versus excess delay

struct PowerSample
{
    double excess_delay_ns = 0.0; // tau_c - tau_0
    double power = 0.0;           // linear
};

struct PowerRegression
{
    double p0_db = 0.0;
    double k_tau = 0.0; // decay, dB/ns (positive for decaying power)
    std::optional<double> tau_cut_ns;
    std::size_t used = 0;
    std::vector<double> shadowing; // dB residual per sample, NaN when beyond tau_cut
    double shadowing_std = 0.0;    // dB
};

// Least squares of 10 log10(P) on excess delay, restricted to excess delay < tau_cut
inline PowerRegression power_regression(std::span<const PowerSample> samples, std::optional<double> tau_cut_ns)
{
    PowerRegression r;
    r.tau_cut_ns = tau_cut_ns;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    auto used = [&](const PowerSample &s)
    { return s.power > 0.0 && (!tau_cut_ns || s.excess_delay_ns < *tau_cut_ns); };
    for (const auto &s : samples)
    {
        if (!used(s))
            continue;
        const double y = 10.0 * std::log10(s.power);
        sx += s.excess_delay_ns;
        sy += y;
        sxx += s.excess_delay_ns * s.excess_delay_ns;
        sxy += s.excess_delay_ns * y;
        ++n;
    }
    if (n < 2)
        throw Error(ErrorCode::numerical, "power_regression: fewer than 2 usable points");
    const double mx = sx / double(n), my = sy / double(n);
    const double vxx = sxx / double(n) - mx * mx;
    if (!(vxx > 0.0))
        throw Error(ErrorCode::numerical, "power_regression: all delays identical");
    const double slope = (sxy / double(n) - mx * my) / vxx;
    r.k_tau = -slope;
    r.p0_db = my - slope * mx;
    r.used = n;

    double ss = 0.0;
    for (const auto &s : samples)
    {
        if (!used(s))
        {
            r.shadowing.push_back(std::nan(""));
            continue;
        }
        const double res = 10.0 * std::log10(s.power) - (r.p0_db + slope * s.excess_delay_ns);
        r.shadowing.push_back(res);
        ss += res * res;
    }
    r.shadowing_std = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
    return r;
}

// Cut-off where the binned mean cluster power first comes within margin_db of the lowest bin mean
// (taken as the noise floor). Empty when that happens in the first bin.
inline std::optional<double> auto_tau_cut(std::span<const PowerSample> samples, double bin_ns = 10.0,
                                          double margin_db = 3.0, std::size_t min_per_bin = 3)
{
    std::map<long, std::pair<double, std::size_t>> bins;
    for (const auto &s : samples)
    {
        if (!(s.power > 0.0))
            continue;
        auto &b = bins[long(std::floor(s.excess_delay_ns / bin_ns))];
        b.first += 10.0 * std::log10(s.power);
        ++b.second;
    }
    std::vector<std::pair<long, double>> means;
    for (const auto &[i, b] : bins)
        if (b.second >= min_per_bin)
            means.emplace_back(i, b.first / double(b.second));
    if (means.size() < 3)
        return std::nullopt;
    double floor_db = means.front().second;
    for (const auto &m : means)
        floor_db = std::min(floor_db, m.second);
    for (std::size_t i = 0; i < means.size(); ++i)
        if (means[i].second <= floor_db + margin_db)
            return i == 0 ? std::nullopt : std::optional<double>(double(means[i].first) * bin_ns);
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Intra-cluster spreads

struct SpreadMember
{
    double delay = 0.0;     // s
    double azimuth = 0.0;   // rad
    double elevation = 0.0; // rad
    double power = 0.0;
};

struct SpreadSample
{
    int panel = 0, snapshot = 0, cluster = 0;
    double delay = 0.0;     // s
    double azimuth = 0.0;   // rad
    double elevation = 0.0; // rad
};

inline double wrap_angle(double a)
{
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0)
        a += 2.0 * kPi;
    return a - kPi;
}

inline SpreadSample intra_cluster_spreads(std::span<const SpreadMember> members)
{
    if (members.empty())
        throw Error(ErrorCode::invalid_input, "intra_cluster_spreads: no members");
    double w = 0, mt = 0, me = 0, s = 0, c = 0;
    for (const auto &m : members)
    {
        w += m.power;
        mt += m.power * m.delay;
        me += m.power * m.elevation;
        s += m.power * std::sin(m.azimuth);
        c += m.power * std::cos(m.azimuth);
    }
    if (!(w > 0.0))
        throw Error(ErrorCode::invalid_input, "intra_cluster_spreads: zero total power");
    mt /= w;
    me /= w;
    const double mu_az = std::atan2(s, c);
    double vt = 0, ve = 0, va = 0, ma = 0;
    for (const auto &m : members)
        ma += m.power * wrap_angle(m.azimuth - mu_az);
    ma /= w;
    for (const auto &m : members)
    {
        vt += m.power * (m.delay - mt) * (m.delay - mt);
        ve += m.power * (m.elevation - me) * (m.elevation - me);
        const double da = wrap_angle(m.azimuth - mu_az) - ma;
        va += m.power * da * da;
    }
    SpreadSample out;
    out.delay = std::sqrt(vt / w);
    out.elevation = std::sqrt(ve / w);
    out.azimuth = std::sqrt(va / w);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Cross-correlations

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 3)
        return std::nullopt;
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline constexpr std::array<const char *, 4> kCorrelationNames = {"sigma_tau", "sigma_phi", "sigma_theta", "sf"};

struct CorrelationMatrix
{
    std::array<std::array<std::optional<double>, 4>, 4> value{};
    std::size_t samples = 0;
};

// series order: sigma_tau, sigma_phi, sigma_theta, SF; all aligned
inline CorrelationMatrix cross_correlations(const std::array<std::vector<double>, 4> &series)
{
    CorrelationMatrix m;
    m.samples = series[0].size();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j)
        {
            auto r = pearson(series[i], series[j]);
            if (i == j && r)
                r = 1.0;
            m.value[i][j] = m.value[j][i] = r;
        }
    return m;
}

} // namespace mpcc

#endif
