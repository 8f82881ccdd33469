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

#ifndef MPCC_CORE_HPP
#define MPCC_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpcc
{

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = 3.14159265358979323846;

using Vec3 = Eigen::Vector3d;

// Error categories; the CLI maps them onto process exit codes
enum class ErrorCode
{
    invalid_input,  // precondition violated by a caller
    no_interaction, // MPC ray did not hit any interacting object
    config,         // exit code 2
    data,           // exit code 3
    numerical       // exit code 4
};

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline int exit_code(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::config:
        return 2;
    case ErrorCode::numerical:
        return 4;
    default:
        return 3;
    }
}

inline bool all_finite(const Vec3 &v)
{
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

// Distributed panel (one antenna array acting as an access point)
struct Panel
{
    int id = 0;
    Vec3 position = Vec3::Zero(); // m
};

// One estimated multipath component on a panel-UE link
struct MpcRecord
{
    int snapshot = 0;
    int panel = 0;
    double delay = 0.0;     // s
    double azimuth = 0.0;   // rad, [-pi, pi)
    double elevation = 0.0; // rad, [0, pi]
    double doppler = 0.0;   // Hz
    std::complex<double> amp_v{};
    std::complex<double> amp_h{};

    double power() const { return std::norm(amp_v) + std::norm(amp_h); }
};

// Throws ErrorCode::data when the record violates its invariants
inline void validate(const MpcRecord &m)
{
    auto fail = [](const std::string &msg)
    { throw Error(ErrorCode::data, msg); };
    if (!std::isfinite(m.delay) || !std::isfinite(m.azimuth) || !std::isfinite(m.elevation) ||
        !std::isfinite(m.doppler) || !std::isfinite(m.amp_v.real()) || !std::isfinite(m.amp_v.imag()) ||
        !std::isfinite(m.amp_h.real()) || !std::isfinite(m.amp_h.imag()))
        fail("non-finite value in MPC record");
    if (m.delay <= 0.0)
        fail("MPC delay must be positive");
    if (m.elevation < 0.0 || m.elevation > kPi)
        fail("MPC elevation outside [0, pi]");
    if (m.azimuth < -kPi || m.azimuth >= kPi)
        fail("MPC azimuth outside [-pi, pi)");
    if (!(m.power() > 0.0))
        fail("MPC power must be positive");
}

// An MPC anchored in the global frame by its interacting object (IO).
// mpc_index refers to the position of the source record in the dataset.
struct Interaction
{
    std::size_t mpc_index = 0;
    int snapshot = 0;
    int panel = 0;
    Vec3 io_center = Vec3::Zero(); // m
    double partial_delay = 0.0;    // s
    double power = 0.0;            // linear, |A|^2
    bool clamped = false;          // partial delay was clamped to 0
};

} // namespace mpcc

#endif
