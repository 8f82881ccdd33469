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

#ifndef MPCC_CLUSTERING_HPP
#define MPCC_CLUSTERING_HPP

#include "mpcc/mcd.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace mpcc
{

// Joint clustering of the MPCs of all links at one snapshot.
//
// Initialisation repeatedly takes the strongest unassigned MPC as a reference and claims every
// unassigned MPC within delta_mcd of it. Refinement then alternates minimum-MCD assignment to the
// power-weighted centroids and centroid updates until the assignment is stable.

struct ClusteringConfig
{
    double delta_mcd = 7.0;
    double zeta = 1.0;
    double eps_position = 1e-6; // m
    double eps_delay = 1e-15;   // s
    int max_iter = 100;
};

struct Cluster
{
    int id = 0;
    std::vector<std::size_t> members; // ascending indices into the snapshot's interaction list
    McdPoint centroid;
};

struct SnapshotClustering
{
    int snapshot = 0;
    std::vector<Cluster> clusters;
    bool converged = true;
    int iterations = 0;
    McdContext context;

    std::size_t cluster_count() const { return clusters.size(); }

    // cluster index per interaction, -1 if absent
    std::vector<int> labels(std::size_t n) const
    {
        std::vector<int> l(n, -1);
        for (std::size_t c = 0; c < clusters.size(); ++c)
            for (auto m : clusters[c].members)
                l[m] = int(c);
        return l;
    }
};

// Power-weighted IO centre and partial delay of the member set
inline McdPoint centroid(std::span<const Interaction> its, std::span<const std::size_t> members)
{
    if (members.empty())
        throw Error(ErrorCode::invalid_input, "centroid: empty member set");
    McdPoint c;
    double wsum = 0.0;
    for (auto m : members)
    {
        const double w = its[m].power;
        c.io += w * its[m].io_center;
        c.partial_delay += w * its[m].partial_delay;
        wsum += w;
    }
    if (!(wsum > 0.0))
        throw Error(ErrorCode::invalid_input, "centroid: zero total power");
    c.io /= wsum;
    c.partial_delay /= wsum;
    return c;
}

inline std::vector<Cluster> initialize_clusters(std::span<const Interaction> its, const McdContext &ctx,
                                                double delta_mcd)
{
    if (!(delta_mcd > 0.0))
        throw Error(ErrorCode::invalid_input, "initialize_clusters: delta_mcd must be positive");

    // Strongest first; equal power resolves to the lower index
    std::vector<std::size_t> order(its.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b)
                     { return its[a].power > its[b].power; });

    std::vector<char> assigned(its.size(), 0);
    std::vector<Cluster> clusters;
    for (std::size_t ref : order)
    {
        if (assigned[ref])
            continue;
        Cluster c;
        c.id = int(clusters.size());
        const McdPoint rp = mcd_point(its[ref]);
        for (std::size_t l = 0; l < its.size(); ++l)
            if (!assigned[l] && mcd_total(mcd_point(its[l]), rp, ctx) <= delta_mcd)
            {
                assigned[l] = 1;
                c.members.push_back(l);
            }
        c.centroid = centroid(its, c.members);
        clusters.push_back(std::move(c));
    }
    return clusters;
}

inline SnapshotClustering refine(std::vector<Cluster> clusters, std::span<const Interaction> its,
                                 const McdContext &ctx, const ClusteringConfig &cfg)
{
    SnapshotClustering out;
    out.context = ctx;
    out.converged = false;
    if (!its.empty() && !clusters.empty())
        out.snapshot = its.front().snapshot;

    std::vector<int> prev(its.size(), -1);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (auto m : clusters[c].members)
            prev[m] = int(c);

    for (int iter = 1; iter <= cfg.max_iter && !clusters.empty(); ++iter)
    {
        out.iterations = iter;
        std::vector<int> assign(its.size(), 0);
        for (std::size_t l = 0; l < its.size(); ++l)
        {
            const McdPoint p = mcd_point(its[l]);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < clusters.size(); ++c)
            {
                const double d = mcd_total(p, clusters[c].centroid, ctx);
                if (d < best) // strict: equal distance keeps the lower cluster id
                {
                    best = d;
                    assign[l] = int(c);
                }
            }
        }

        std::vector<Cluster> next;
        std::vector<int> remap(clusters.size(), -1);
        double max_move = 0.0, max_dtau = 0.0;
        for (std::size_t c = 0; c < clusters.size(); ++c)
        {
            Cluster nc;
            for (std::size_t l = 0; l < its.size(); ++l)
                if (assign[l] == int(c))
                    nc.members.push_back(l);
            if (nc.members.empty())
                continue; // dropped
            nc.id = int(next.size());
            nc.centroid = centroid(its, nc.members);
            max_move = std::max(max_move, (nc.centroid.io - clusters[c].centroid.io).norm());
            max_dtau = std::max(max_dtau, std::abs(nc.centroid.partial_delay - clusters[c].centroid.partial_delay));
            remap[c] = nc.id;
            next.push_back(std::move(nc));
        }
        for (auto &a : assign)
            a = remap[std::size_t(a)];

        const bool same_count = next.size() == clusters.size();
        const bool same_assignment = same_count && assign == prev;
        const bool settled = same_count && max_move <= cfg.eps_position && max_dtau <= cfg.eps_delay;
        clusters = std::move(next);
        prev = std::move(assign);
        if (same_assignment || settled)
        {
            out.converged = true;
            break;
        }
    }
    if (clusters.empty())
        out.converged = true;
    out.clusters = std::move(clusters);
    return out;
}

inline SnapshotClustering cluster_snapshot(std::span<const Interaction> its, const ClusteringConfig &cfg)
{
    if (its.empty())
        return SnapshotClustering{};
    const McdContext ctx = build_context(its, cfg.zeta);
    auto init = initialize_clusters(its, ctx, cfg.delta_mcd);
    auto res = refine(std::move(init), its, ctx, cfg);
    res.snapshot = its.front().snapshot;
    return res;
}

// ---------------------------------------------------------------------------------------------
// Cluster validity indices under the MCD metric

// Davies-Bouldin: mean over clusters of max_j (S_i + S_j) / MCD(centroid_i, centroid_j), with S_i
// the power-weighted mean MCD of members to their centroid. Lower is better; < 2 clusters is +inf.
inline double davies_bouldin(const SnapshotClustering &sc, std::span<const Interaction> its)
{
    const auto &cl = sc.clusters;
    if (cl.size() < 2)
        return std::numeric_limits<double>::infinity();
    std::vector<double> scatter(cl.size(), 0.0);
    for (std::size_t c = 0; c < cl.size(); ++c)
    {
        double w = 0.0;
        for (auto m : cl[c].members)
        {
            scatter[c] += its[m].power * mcd_total(mcd_point(its[m]), cl[c].centroid, sc.context);
            w += its[m].power;
        }
        scatter[c] /= w;
    }
    double db = 0.0;
    for (std::size_t i = 0; i < cl.size(); ++i)
    {
        double worst = 0.0;
        for (std::size_t j = 0; j < cl.size(); ++j)
        {
            if (i == j)
                continue;
            const double sep = mcd_total(cl[i].centroid, cl[j].centroid, sc.context);
            const double r = sep > 0.0 ? (scatter[i] + scatter[j]) / sep : std::numeric_limits<double>::infinity();
            worst = std::max(worst, r);
        }
        db += worst;
    }
    return db / double(cl.size());
}

// Mean silhouette width under the MCD metric. Higher is better; < 2 clusters is -1.
inline double silhouette(const SnapshotClustering &sc, std::span<const Interaction> its)
{
    const auto &cl = sc.clusters;
    if (cl.size() < 2)
        return -1.0;
    const auto lab = sc.labels(its.size());
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> sums(cl.size());
    for (std::size_t i = 0; i < its.size(); ++i)
    {
        if (lab[i] < 0)
            continue;
        ++count;
        std::fill(sums.begin(), sums.end(), 0.0);
        const McdPoint p = mcd_point(its[i]);
        for (std::size_t j = 0; j < its.size(); ++j)
            if (j != i && lab[j] >= 0)
                sums[std::size_t(lab[j])] += mcd_total(p, mcd_point(its[j]), sc.context);
        const auto own = std::size_t(lab[i]);
        if (cl[own].members.size() < 2)
            continue; // singleton contributes 0
        const double a = sums[own] / double(cl[own].members.size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cl.size(); ++c)
            if (c != own)
                b = std::min(b, sums[c] / double(cl[c].members.size()));
        const double den = std::max(a, b);
        total += den > 0.0 ? (b - a) / den : 0.0;
    }
    return count ? total / double(count) : -1.0;
}

struct CviScore
{
    double delta_mcd = 0.0;
    std::size_t clusters = 0;
    double davies_bouldin = 0.0;
    double silhouette = 0.0;
    int rank_sum = 0;
};

struct CviReport
{
    std::vector<CviScore> scores; // ascending delta_mcd
    double selected = 0.0;
};

// Fills rank_sum (Davies-Bouldin ascending plus silhouette descending) and returns the best entry:
// lowest rank sum, then higher silhouette, then the earlier entry
inline std::size_t rank_scores(std::vector<CviScore> &scores)
{
    if (scores.empty())
        throw Error(ErrorCode::invalid_input, "rank_scores: no scores");
    auto rank = [&](auto better)
    {
        std::vector<int> r(scores.size());
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            int k = 1;
            for (std::size_t j = 0; j < r.size(); ++j)
                if (better(scores[j], scores[i]))
                    ++k;
            r[i] = k;
        }
        return r;
    };
    const auto r_db = rank([](const CviScore &a, const CviScore &b)
                           { return a.davies_bouldin < b.davies_bouldin; });
    const auto r_si = rank([](const CviScore &a, const CviScore &b)
                           { return a.silhouette > b.silhouette; });

    std::size_t best = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
    {
        scores[i].rank_sum = r_db[i] + r_si[i];
        const auto &s = scores[i], &b = scores[best];
        if (s.rank_sum < b.rank_sum || (s.rank_sum == b.rank_sum && s.silhouette > b.silhouette))
            best = i;
    }
    return best;
}

// Clusters once per grid value and picks the best rank-sum of the two indices
inline CviReport select_threshold(std::span<const Interaction> its, const std::vector<double> &grid,
                                  ClusteringConfig cfg)
{
    if (grid.empty())
        throw Error(ErrorCode::invalid_input, "select_threshold: empty grid");
    std::vector<double> g = grid;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());

    CviReport rep;
    for (double d : g)
    {
        cfg.delta_mcd = d;
        const auto sc = cluster_snapshot(its, cfg);
        rep.scores.push_back({d, sc.cluster_count(), davies_bouldin(sc, its), silhouette(sc, its), 0});
    }

    const std::size_t best = rank_scores(rep.scores);
    rep.selected = rep.scores[best].delta_mcd;
    return rep;
}

} // namespace mpcc

#endif
