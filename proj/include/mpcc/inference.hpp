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

#ifndef MPCC_INFERENCE_HPP
#define MPCC_INFERENCE_HPP

#include "mpcc/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mpcc
{

// ---------------------------------------------------------------------------------------------
// Number of VRs per cluster: 1-shift Poisson

struct ShiftedPoissonFit
{
    double lambda = 0.0;
    std::size_t sample_size = 0;
    double log_likelihood = 0.0;
};

// P(N = n) = lambda^(n-1) e^(-lambda) / (n-1)!, n >= 1
inline double shifted_poisson_pmf(int n, double lambda)
{
    if (n < 1)
        return 0.0;
    const double k = n - 1;
    if (lambda == 0.0)
        return k == 0 ? 1.0 : 0.0;
    return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

inline ShiftedPoissonFit fit_shifted_poisson(std::span<const int> counts)
{
    if (counts.empty())
        throw Error(ErrorCode::invalid_input, "fit_shifted_poisson: no samples");
    double sum = 0.0;
    for (int c : counts)
    {
        if (c < 1)
            throw Error(ErrorCode::invalid_input, "fit_shifted_poisson: counts must be >= 1");
        sum += c;
    }
    ShiftedPoissonFit f;
    f.sample_size = counts.size();
    f.lambda = sum / double(counts.size()) - 1.0;
    for (int c : counts)
        f.log_likelihood += std::log(shifted_poisson_pmf(c, f.lambda));
    return f;
}

// ---------------------------------------------------------------------------------------------

struct ExponentialFit
{
    double mean = 0.0; // lambda_L, m
    std::size_t sample_size = 0;
};

inline ExponentialFit fit_exponential(std::span<const double> lengths)
{
    if (lengths.empty())
        throw Error(ErrorCode::invalid_input, "fit_exponential: no samples");
    double s = 0.0;
    for (double x : lengths)
    {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw Error(ErrorCode::invalid_input, "fit_exponential: lengths must be finite and >= 0");
        s += x;
    }
    ExponentialFit f{s / double(lengths.size()), lengths.size()};
    if (!(f.mean > 0.0))
        throw Error(ErrorCode::invalid_input, "fit_exponential: all lengths are zero");
    return f;
}

struct LogNormalFit
{
    double mu = 0.0;    // mean of ln x
    double sigma = 0.0; // standard deviation of ln x (population)
    std::size_t sample_size = 0;
};

inline LogNormalFit fit_lognormal(std::span<const double> samples)
{
    if (samples.empty())
        throw Error(ErrorCode::invalid_input, "fit_lognormal: no samples");
    LogNormalFit f;
    f.sample_size = samples.size();
    for (double x : samples)
    {
        if (!(x > 0.0) || !std::isfinite(x))
            throw Error(ErrorCode::invalid_input, "fit_lognormal: samples must be positive");
        f.mu += std::log(x);
    }
    f.mu /= double(samples.size());
    double v = 0.0;
    for (double x : samples)
        v += (std::log(x) - f.mu) * (std::log(x) - f.mu);
    f.sigma = std::sqrt(v / double(samples.size()));
    return f;
}

// ---------------------------------------------------------------------------------------------
// Complete VR length from window-censored observations.
//
// Complete lengths Y are exponential with mean lambda_Y. A VR is observed when its clipped length
// inside a window of span L is at least delta0. The likelihood below has the Poisson VR-count
// intensity profiled out, which leaves
//
//   ln Lambda(m) = -n ln K(m) + sum_chi00 ln f(L_v) + sum_chi01,chi10 ln S(L_v) + |chi11| ln(m e^(-L/m))
//   K(m)         = (L - delta0 + m) e^(-delta0/m)
//
// and its stationary point solves (n - n0) m^2 - ((L - delta0) n0 + Gamma) m - (L - delta0) Gamma = 0.

struct CensoredMleResult
{
    double lambda_y = 0.0;       // estimated mean complete length, m
    double lambda_numeric = 0.0; // numeric maximiser of the log-likelihood
    double residual = 0.0;       // |closed form - numeric|
    double gamma = 0.0;          // sum over all VRs of (L_v - delta0)
    int n0 = 0;                  // |chi11| - |chi00|
    std::size_t n_all = 0, n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    double window = 0.0; // L
    double delta0 = 0.0;
    bool closed_form = true; // false when the closed form is degenerate and the numeric value is used
    bool unbounded = false;  // numeric maximum sits on the search boundary
    std::string diagnostic;
};

namespace detail
{
struct CensoredData
{
    std::size_t n = 0, n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    double sum00 = 0.0, sum_edge = 0.0, gamma = 0.0;
    double window = 0.0, delta0 = 0.0;
};

inline CensoredData summarize(std::span<const VrObservation> vrs, double window, double delta0)
{
    CensoredData d;
    d.window = window;
    d.delta0 = delta0;
    for (const auto &v : vrs)
    {
        if (!std::isfinite(v.length) || v.length < 0.0 || v.length > window * (1.0 + 1e-9))
            throw Error(ErrorCode::invalid_input, "censored_vr_mle: observed length outside [0, L]");
        ++d.n;
        d.gamma += v.length - delta0;
        switch (v.censor)
        {
        case CensorClass::c00:
            ++d.n00;
            d.sum00 += v.length;
            break;
        case CensorClass::c01:
            ++d.n01;
            d.sum_edge += v.length;
            break;
        case CensorClass::c10:
            ++d.n10;
            d.sum_edge += v.length;
            break;
        case CensorClass::c11:
            if (std::abs(v.length - window) > 1e-9 * std::max(1.0, window))
                throw Error(ErrorCode::invalid_input, "censored_vr_mle: full-span VR length differs from L");
            ++d.n11;
            break;
        }
    }
    return d;
}
} // namespace detail

namespace detail
{
inline double profiled_ll(const CensoredData &d, double m)
{
    const double log_k = std::log(d.window - d.delta0 + m) - d.delta0 / m;
    return -double(d.n) * log_k - double(d.n00) * std::log(m) - d.sum00 / m - d.sum_edge / m +
           double(d.n11) * (std::log(m) - d.window / m);
}
} // namespace detail

// Profiled log-likelihood of the mean complete length m
inline double censored_log_likelihood(double m, std::span<const VrObservation> vrs, double window, double delta0)
{
    return detail::profiled_ll(detail::summarize(vrs, window, delta0), m);
}

namespace detail
{
// Maximises f over [lo, hi] on a log grid followed by golden-section refinement in log m
template <typename F>
inline double maximize_log_scale(F f, double lo, double hi, bool &at_boundary)
{
    constexpr int n_grid = 2001;
    const double llo = std::log(lo), lhi = std::log(hi);
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_grid; ++i)
    {
        const double v = f(std::exp(llo + (lhi - llo) * i / (n_grid - 1)));
        if (v > best_v)
        {
            best_v = v;
            best = i;
        }
    }
    at_boundary = best == 0 || best == n_grid - 1;
    double a = llo + (lhi - llo) * std::max(0, best - 1) / (n_grid - 1);
    double b = llo + (lhi - llo) * std::min(n_grid - 1, best + 1) / (n_grid - 1);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
    for (int it = 0; it < 200 && b - a > 1e-13; ++it)
    {
        if (f1 < f2)
        {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(std::exp(x2));
        }
        else
        {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(std::exp(x1));
        }
    }
    return std::exp(0.5 * (a + b));
}
} // namespace detail

inline CensoredMleResult censored_vr_mle(std::span<const VrObservation> vrs, double window, double delta0)
{
    if (!(delta0 >= 0.0) || !(window > delta0))
        throw Error(ErrorCode::invalid_input, "censored_vr_mle: requires L > delta0 >= 0");
    if (vrs.empty())
        throw Error(ErrorCode::invalid_input, "censored_vr_mle: no VR observations");

    const auto d = detail::summarize(vrs, window, delta0);
    CensoredMleResult r;
    r.n_all = d.n;
    r.n00 = d.n00;
    r.n01 = d.n01;
    r.n10 = d.n10;
    r.n11 = d.n11;
    r.gamma = d.gamma;
    r.n0 = int(d.n11) - int(d.n00);
    r.window = window;
    r.delta0 = delta0;

    // Numeric check
    const double a = window - delta0;
    const double scale = std::max({window, delta0, 1e-3});
    auto ll = [&](double m)
    { return detail::profiled_ll(d, m); };
    bool boundary = false;
    r.lambda_numeric = detail::maximize_log_scale(ll, 1e-4 * scale, 1e4 * scale, boundary);
    r.unbounded = boundary;

    // Closed form: positive root of the stationarity quadratic
    const double D = double(d.n) - double(r.n0);
    const double B = a * double(r.n0) + d.gamma;
    const double disc = B * B + 4.0 * D * a * d.gamma;
    double m = std::numeric_limits<double>::quiet_NaN();
    if (D > 0.0 && disc >= 0.0)
    {
        const double s = std::sqrt(disc);
        m = B >= 0.0 ? (B + s) / (2.0 * D) : 2.0 * a * d.gamma / (s - B);
    }
    if (std::isfinite(m) && m > 0.0)
    {
        r.lambda_y = m;
        if (boundary)
            r.diagnostic = "likelihood has no interior global maximum; closed-form stationary point reported";
    }
    else
    {
        r.closed_form = false;
        r.lambda_y = r.lambda_numeric;
        r.diagnostic = D <= 0.0 ? "all VRs span the full window; closed form degenerate, numeric maximiser used"
                                : "no positive stationary point; numeric maximiser used";
        if (boundary)
            r.diagnostic += " (maximum on search boundary)";
    }
    r.residual = std::abs(r.lambda_y - r.lambda_numeric);
    return r;
}

// VRs as circles: the mean parallel chord of a circle of radius R is (pi/2) R
inline double vr_radius(double mean_complete_length)
{
    if (!(mean_complete_length >= 0.0))
        throw Error(ErrorCode::invalid_input, "vr_radius: mean length must be >= 0");
    return 2.0 / kPi * mean_complete_length;
}

} // namespace mpcc

#endif
