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

#ifndef MPCC_TRACKING_HPP
#define MPCC_TRACKING_HPP

#include "mpcc/clustering.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpcc
{

// Kalman-filter cluster tracker. The state is (x, dx, y, dy, z, dz, tau_P, dtau_P) with the
// delay terms held in nanoseconds; measurements are (x, y, z, tau_P[ns]).

using StateVec = Eigen::Matrix<double, 8, 1>;
using StateCov = Eigen::Matrix<double, 8, 8>;
using Meas = Eigen::Vector4d;
using MeasCov = Eigen::Matrix4d;

inline constexpr double kNsPerSecond = 1e9;

inline Meas to_measurement(const McdPoint &c)
{
    return Meas(c.io.x(), c.io.y(), c.io.z(), c.partial_delay * kNsPerSecond);
}

struct FilterConfig
{
    StateCov Q = StateCov::Zero();
    MeasCov R = MeasCov::Identity();
    int n_th = 5; // consecutive misses tolerated before a track dies

    static StateCov transition()
    {
        Eigen::Matrix2d blk;
        blk << 1, 1, 0, 1;
        StateCov phi = StateCov::Zero();
        for (int i = 0; i < 4; ++i)
            phi.block<2, 2>(2 * i, 2 * i) = blk;
        return phi;
    }

    static Eigen::Matrix<double, 4, 8> measurement()
    {
        Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
        for (int i = 0; i < 4; ++i)
            h(i, 2 * i) = 1.0;
        return h;
    }

    // Indoor defaults: 0.1 m / 0.05 m position / increment noise, 0.3 ns / 0.15 ns on delay,
    // 0.3 m and 1 ns measurement noise
    static FilterConfig defaults()
    {
        FilterConfig c;
        StateVec q;
        q << 0.01, 0.0025, 0.01, 0.0025, 0.01, 0.0025, 0.09, 0.0225;
        c.Q = q.asDiagonal();
        c.R = Meas(0.09, 0.09, 0.09, 1.0).asDiagonal();
        c.n_th = 5;
        return c;
    }
};

enum class TrackStatus
{
    born,
    tracked,
    disappeared,
    dead
};

inline const char *to_string(TrackStatus s)
{
    switch (s)
    {
    case TrackStatus::born:
        return "born";
    case TrackStatus::tracked:
        return "tracked";
    case TrackStatus::disappeared:
        return "disappeared";
    default:
        return "dead";
    }
}

struct Track
{
    int id = 0;
    StateVec state = StateVec::Zero();
    StateCov cov = StateCov::Zero();
    TrackStatus status = TrackStatus::born;
    int birth_snapshot = 0;
    int last_seen = 0;
    int missed = 0;
    int age = 1;
    int psd_repairs = 0;
    std::optional<int> matched_cluster;
    // members of the last matched cluster, measurement units
    std::vector<Meas> member_points;
    std::vector<double> member_weights;

    Meas position() const { return FilterConfig::measurement() * state; }
};

// Observed cluster at one snapshot in measurement units
struct TrackObservation
{
    int cluster_id = 0;
    Meas centroid = Meas::Zero();
    std::vector<Meas> points;
    std::vector<double> weights;
};

inline TrackObservation make_observation(const Cluster &c, std::span<const Interaction> its)
{
    TrackObservation o;
    o.cluster_id = c.id;
    o.centroid = to_measurement(c.centroid);
    for (auto m : c.members)
    {
        o.points.push_back(to_measurement(mcd_point(its[m])));
        o.weights.push_back(its[m].power);
    }
    return o;
}

inline Track predict(Track t, const FilterConfig &cfg)
{
    const StateCov phi = FilterConfig::transition();
    t.state = phi * t.state;
    t.cov = phi * t.cov * phi.transpose() + cfg.Q;
    return t;
}

// Power-weighted outer-product spread of member points about `mean`
inline MeasCov spread_matrix(std::span<const Meas> points, std::span<const double> weights, const Meas &mean)
{
    if (points.empty() || points.size() != weights.size())
        throw Error(ErrorCode::invalid_input, "spread_matrix: empty or mismatched member set");
    MeasCov c = MeasCov::Zero();
    double w = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        const Meas d = points[i] - mean;
        c += weights[i] * d * d.transpose();
        w += weights[i];
    }
    return c / w;
}

inline MeasCov regularize(const MeasCov &c)
{
    const double tr = c.trace();
    const double eps = tr > 0.0 ? 1e-6 * tr / 4.0 : 1e-9;
    return c + eps * MeasCov::Identity();
}

// Log of the 4-D normal density of x about mean with covariance c (no regularisation applied).
// Empty when c is not positive definite.
inline std::optional<double> log_closeness(const Meas &x, const Meas &mean, const MeasCov &c)
{
    const Eigen::LLT<MeasCov> llt(c);
    if (llt.info() != Eigen::Success)
        return std::nullopt;
    const Meas q = x - mean;
    const double maha = q.dot(llt.solve(q));
    const MeasCov L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    if (!std::isfinite(maha) || !std::isfinite(log_det))
        return std::nullopt;
    return -0.5 * maha - 0.5 * log_det - 2.0 * std::log(2.0 * kPi);
}

inline double closeness(const Meas &x, const Meas &mean, const MeasCov &c)
{
    const auto l = log_closeness(x, mean, c);
    return l ? std::exp(*l) : 0.0;
}

struct Association
{
    std::vector<std::pair<std::size_t, std::size_t>> matched; // (track position, observation position)
    std::vector<std::size_t> born;                            // unmatched observations
    std::vector<std::size_t> disappeared;                     // unmatched tracks
};

// Pairs (a, b) where b is a's best and a is b's best. a_to_b(i, j) scores b_j from a_i's view,
// b_to_a(j, i) scores a_i from b_j's view. Non-finite scores never win; ties keep the lower index.
inline Association mutual_match(const Eigen::MatrixXd &a_to_b, const Eigen::MatrixXd &b_to_a)
{
    const auto na = std::size_t(a_to_b.rows()), nb = std::size_t(a_to_b.cols());
    auto argmax_row = [](const Eigen::MatrixXd &m, std::size_t r) -> std::optional<std::size_t>
    {
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < std::size_t(m.cols()); ++c)
        {
            const double v = m(Eigen::Index(r), Eigen::Index(c));
            if (!std::isfinite(v))
                continue;
            if (!best || v > m(Eigen::Index(r), Eigen::Index(*best)))
                best = c;
        }
        return best;
    };
    Association as;
    std::vector<char> a_used(na, 0), b_used(nb, 0);
    for (std::size_t i = 0; i < na; ++i)
    {
        const auto j = argmax_row(a_to_b, i);
        if (!j)
            continue;
        const auto back = argmax_row(b_to_a, *j);
        if (back && *back == i)
        {
            as.matched.emplace_back(i, *j);
            a_used[i] = b_used[*j] = 1;
        }
    }
    for (std::size_t j = 0; j < nb; ++j)
        if (!b_used[j])
            as.born.push_back(j);
    for (std::size_t i = 0; i < na; ++i)
        if (!a_used[i])
            as.disappeared.push_back(i);
    return as;
}

// Tracks must already be predicted to the current snapshot
inline Association associate(std::span<const Track> tracks, std::span<const TrackObservation> obs)
{
    const auto nt = Eigen::Index(tracks.size()), no = Eigen::Index(obs.size());
    const double ninf = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd t2o = Eigen::MatrixXd::Constant(nt, no, ninf);
    Eigen::MatrixXd o2t = Eigen::MatrixXd::Constant(no, nt, ninf);

    const auto H = FilterConfig::measurement();
    std::vector<Meas> pred(tracks.size());
    for (Eigen::Index i = 0; i < nt; ++i)
    {
        const auto &t = tracks[std::size_t(i)];
        pred[std::size_t(i)] = H * t.state;
        if (t.member_points.empty())
            continue;
        const MeasCov c = regularize(spread_matrix(t.member_points, t.member_weights, pred[std::size_t(i)]));
        for (Eigen::Index j = 0; j < no; ++j)
            if (auto l = log_closeness(obs[std::size_t(j)].centroid, pred[std::size_t(i)], c))
                t2o(i, j) = *l;
    }
    for (Eigen::Index j = 0; j < no; ++j)
    {
        const auto &o = obs[std::size_t(j)];
        const MeasCov c = regularize(spread_matrix(o.points, o.weights, o.centroid));
        for (Eigen::Index i = 0; i < nt; ++i)
            if (auto l = log_closeness(pred[std::size_t(i)], o.centroid, c))
                o2t(j, i) = *l;
    }
    return mutual_match(t2o, o2t);
}

// Symmetrise and clip negative eigenvalues; returns true when a repair was needed
inline bool repair_covariance(StateCov &m)
{
    m = 0.5 * (m + m.transpose());
    const Eigen::SelfAdjointEigenSolver<StateCov> es(m);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() >= -1e-12 * scale)
        return false;
    const StateVec ev = es.eigenvalues().cwiseMax(0.0);
    m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    m = 0.5 * (m + m.transpose());
    return true;
}

// Measurement update. Without an observation the gain and covariance still update but the state
// is carried over, and the miss counter advances.
inline Track update(Track t, const std::optional<Meas> &obs, const FilterConfig &cfg, int snapshot)
{
    const auto H = FilterConfig::measurement();
    const MeasCov S = H * t.cov * H.transpose() + cfg.R;
    const Eigen::Matrix<double, 8, 4> K = t.cov * H.transpose() * S.inverse();
    t.cov = (StateCov::Identity() - K * H) * t.cov;
    if (repair_covariance(t.cov))
        ++t.psd_repairs;
    ++t.age;
    if (obs)
    {
        t.state = t.state + K * (*obs - H * t.state);
        t.status = TrackStatus::tracked;
        t.missed = 0;
        t.last_seen = snapshot;
    }
    else
    {
        ++t.missed;
        t.status = t.missed > cfg.n_th ? TrackStatus::dead : TrackStatus::disappeared;
        t.matched_cluster.reset();
    }
    return t;
}

inline Track start_track(int id, const TrackObservation &o, const FilterConfig &cfg, int snapshot)
{
    Track t;
    t.id = id;
    for (int i = 0; i < 4; ++i)
    {
        t.state(2 * i) = o.centroid(i);
        t.cov(2 * i, 2 * i) = 10.0 * cfg.R(i, i);
        t.cov(2 * i + 1, 2 * i + 1) = 1e4;
    }
    t.status = TrackStatus::born;
    t.birth_snapshot = t.last_seen = snapshot;
    t.matched_cluster = o.cluster_id;
    t.member_points = o.points;
    t.member_weights = o.weights;
    return t;
}

struct TrackEvent
{
    int snapshot = 0;
    int track_id = 0;
    TrackStatus status = TrackStatus::born;
    StateVec state = StateVec::Zero();
    std::optional<int> cluster_id;
};

// Sequential tracker over snapshots
class Tracker
{
public:
    explicit Tracker(FilterConfig cfg = FilterConfig::defaults()) : cfg_(std::move(cfg))
    {
        if (cfg_.n_th < 1)
            throw Error(ErrorCode::config, "tracker: n_th must be >= 1");
    }

    // Advances all live tracks to `snapshot` and consumes its observed clusters. Returns one event per
    // track that was alive at this snapshot (including those that die now) and per new track.
    std::vector<TrackEvent> step(int snapshot, std::span<const TrackObservation> obs)
    {
        std::vector<std::size_t> live;
        std::vector<Track> predicted;
        for (std::size_t i = 0; i < tracks_.size(); ++i)
            if (tracks_[i].status != TrackStatus::dead)
            {
                live.push_back(i);
                predicted.push_back(predict(tracks_[i], cfg_));
            }

        const Association as = associate(predicted, obs);
        std::vector<TrackEvent> events;
        std::vector<std::optional<std::size_t>> match_of(predicted.size());
        for (auto [ti, oi] : as.matched)
            match_of[ti] = oi;

        for (std::size_t k = 0; k < predicted.size(); ++k)
        {
            Track &t = tracks_[live[k]];
            if (match_of[k])
            {
                const auto &o = obs[*match_of[k]];
                t = update(std::move(predicted[k]), o.centroid, cfg_, snapshot);
                t.matched_cluster = o.cluster_id;
                t.member_points = o.points;
                t.member_weights = o.weights;
            }
            else
                t = update(std::move(predicted[k]), std::nullopt, cfg_, snapshot);
            events.push_back({snapshot, t.id, t.status, t.state, t.matched_cluster});
        }
        for (auto oi : as.born)
        {
            tracks_.push_back(start_track(next_id_++, obs[oi], cfg_, snapshot));
            const Track &t = tracks_.back();
            events.push_back({snapshot, t.id, t.status, t.state, t.matched_cluster});
        }
        return events;
    }

    const std::vector<Track> &tracks() const { return tracks_; }
    const FilterConfig &config() const { return cfg_; }

private:
    FilterConfig cfg_;
    std::vector<Track> tracks_;
    int next_id_ = 0;
};

} // namespace mpcc

#endif
