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

#ifndef MPCC_VISIBILITY_HPP
#define MPCC_VISIBILITY_HPP

#include "mpcc/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mpcc
{

// Dense (cluster, panel, snapshot) power bookkeeping. Index order follows the id vectors.
struct PowerTensor
{
    std::vector<int> cluster_ids, panel_ids, snapshot_ids;
    std::vector<double> cluster_link; // power of cluster c's MPCs on link k at n
    std::vector<double> link_total;   // power of all MPCs on link k at n

    PowerTensor() = default;
    PowerTensor(std::vector<int> c, std::vector<int> k, std::vector<int> n)
        : cluster_ids(std::move(c)), panel_ids(std::move(k)), snapshot_ids(std::move(n)),
          cluster_link(clusters() * panels() * snapshots(), 0.0), link_total(panels() * snapshots(), 0.0)
    {
    }

    std::size_t clusters() const { return cluster_ids.size(); }
    std::size_t panels() const { return panel_ids.size(); }
    std::size_t snapshots() const { return snapshot_ids.size(); }

    double &at(std::size_t c, std::size_t k, std::size_t n) { return cluster_link[(c * panels() + k) * snapshots() + n]; }
    double at(std::size_t c, std::size_t k, std::size_t n) const
    {
        return cluster_link[(c * panels() + k) * snapshots() + n];
    }
    double &link(std::size_t k, std::size_t n) { return link_total[k * snapshots() + n]; }
    double link(std::size_t k, std::size_t n) const { return link_total[k * snapshots() + n]; }

    // Power of cluster c over all links at snapshot n
    double cluster_total(std::size_t c, std::size_t n) const
    {
        double s = 0.0;
        for (std::size_t k = 0; k < panels(); ++k)
            s += at(c, k, n);
        return s;
    }
};

struct VisibilityTensor
{
    std::vector<int> cluster_ids, panel_ids, snapshot_ids;
    std::vector<std::uint8_t> v;
    double delta_c = 0.1;
    double delta_p = 0.02;

    std::size_t clusters() const { return cluster_ids.size(); }
    std::size_t panels() const { return panel_ids.size(); }
    std::size_t snapshots() const { return snapshot_ids.size(); }
    std::uint8_t at(std::size_t c, std::size_t k, std::size_t n) const { return v[(c * panels() + k) * snapshots() + n]; }
    std::uint8_t &at(std::size_t c, std::size_t k, std::size_t n) { return v[(c * panels() + k) * snapshots() + n]; }

    // Cluster visible on at least one link at snapshot n
    bool any_link(std::size_t c, std::size_t n) const
    {
        for (std::size_t k = 0; k < panels(); ++k)
            if (at(c, k, n))
                return true;
        return false;
    }
};

// A cluster is visible on link k when its link-k MPCs carry more than delta_c of the cluster's
// power and more than delta_p of the link's power.
inline VisibilityTensor link_visibility(const PowerTensor &p, double delta_c, double delta_p)
{
    if (!(delta_c >= 0.0 && delta_c < 1.0 && delta_p >= 0.0 && delta_p < 1.0))
        throw Error(ErrorCode::config, "visibility thresholds must lie in [0, 1)");
    VisibilityTensor vt;
    vt.cluster_ids = p.cluster_ids;
    vt.panel_ids = p.panel_ids;
    vt.snapshot_ids = p.snapshot_ids;
    vt.delta_c = delta_c;
    vt.delta_p = delta_p;
    vt.v.assign(p.cluster_link.size(), 0);
    for (std::size_t c = 0; c < p.clusters(); ++c)
        for (std::size_t n = 0; n < p.snapshots(); ++n)
        {
            const double total = p.cluster_total(c, n);
            if (!(total > 0.0))
                continue;
            for (std::size_t k = 0; k < p.panels(); ++k)
            {
                const double pw = p.at(c, k, n);
                const double lt = p.link(k, n);
                if (pw > 0.0 && lt > 0.0 && pw / total > delta_c && pw / lt > delta_p)
                    vt.at(c, k, n) = 1;
            }
        }
    return vt;
}

inline int count_visible(const VisibilityTensor &vt, std::size_t k, std::size_t n)
{
    int s = 0;
    for (std::size_t c = 0; c < vt.clusters(); ++c)
        s += vt.at(c, k, n);
    return s;
}

// Side visibility: 1 visible, 0 not visible, -1 undetermined
using Tri = std::int8_t;
inline constexpr Tri kUndetermined = -1;

struct SideVisibility
{
    std::size_t clusters = 0, panels = 0, snapshots = 0;
    std::vector<Tri> bs; // (c, n, k): panel k inside a BS-VR of c while the UE is at n
    std::vector<Tri> ue; // (c, n)

    std::span<const Tri> bs_row(std::size_t c, std::size_t n) const
    {
        return std::span<const Tri>(bs).subspan((c * snapshots + n) * panels, panels);
    }
    std::span<const Tri> ue_row(std::size_t c) const
    {
        return std::span<const Tri>(ue).subspan(c * snapshots, snapshots);
    }
};

inline SideVisibility side_visibility(const VisibilityTensor &vt)
{
    SideVisibility sv;
    sv.clusters = vt.clusters();
    sv.panels = vt.panels();
    sv.snapshots = vt.snapshots();
    sv.bs.assign(sv.clusters * sv.snapshots * sv.panels, kUndetermined);
    sv.ue.assign(sv.clusters * sv.snapshots, kUndetermined);
    for (std::size_t c = 0; c < sv.clusters; ++c)
    {
        bool ever = false;
        for (std::size_t n = 0; n < sv.snapshots; ++n)
        {
            const bool any = vt.any_link(c, n);
            ever = ever || any;
            if (!any)
                continue; // BS side cannot be determined at this snapshot
            for (std::size_t k = 0; k < sv.panels; ++k)
                sv.bs[(c * sv.snapshots + n) * sv.panels + k] = vt.at(c, k, n) ? 1 : 0;
        }
        if (!ever)
            continue;
        for (std::size_t n = 0; n < sv.snapshots; ++n)
            sv.ue[c * sv.snapshots + n] = vt.any_link(c, n) ? 1 : 0;
    }
    return sv;
}

// ---------------------------------------------------------------------------------------------
// Visibility regions

enum class CensorClass
{
    c00, // touches neither end: fully observed
    c01, // touches the last index only
    c10, // touches the first index only
    c11  // spans the whole window
};

inline const char *to_string(CensorClass c)
{
    switch (c)
    {
    case CensorClass::c00:
        return "chi00";
    case CensorClass::c01:
        return "chi01";
    case CensorClass::c10:
        return "chi10";
    default:
        return "chi11";
    }
}

enum class Side
{
    bs,
    ue
};

inline const char *to_string(Side s) { return s == Side::bs ? "BS" : "UE"; }

struct VrRun
{
    std::size_t first = 0, last = 0;
    double length = 0.0; // (last - first) * spacing
    CensorClass censor = CensorClass::c00;
};

// Maximal runs of 1 entries; 0 and undetermined both break a run
inline std::vector<VrRun> extract_runs(std::span<const Tri> w, double spacing)
{
    if (!(spacing > 0.0))
        throw Error(ErrorCode::invalid_input, "extract_runs: spacing must be positive");
    std::vector<VrRun> runs;
    std::size_t i = 0;
    while (i < w.size())
    {
        if (w[i] != 1)
        {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < w.size() && w[j + 1] == 1)
            ++j;
        VrRun r;
        r.first = i;
        r.last = j;
        r.length = double(j - i) * spacing;
        const bool at_start = i == 0, at_end = j + 1 == w.size();
        r.censor = at_start ? (at_end ? CensorClass::c11 : CensorClass::c10)
                            : (at_end ? CensorClass::c01 : CensorClass::c00);
        runs.push_back(r);
        i = j + 1;
    }
    return runs;
}

struct VrObservation
{
    Side side = Side::bs;
    int cluster = 0;   // cluster id
    int snapshot = -1; // BS-VRs: snapshot id of the panel row; UE-VRs: -1
    int vr_index = 0;  // position within its (cluster[, snapshot]) row
    double length = 0.0;
    CensorClass censor = CensorClass::c00;
};

// BS-VRs come from each (cluster, snapshot) panel row, UE-VRs from each cluster's snapshot row
inline std::vector<VrObservation> extract_vrs(const SideVisibility &sv, std::span<const int> cluster_ids,
                                              std::span<const int> snapshot_ids, double spacing_bs,
                                              double spacing_ue)
{
    std::vector<VrObservation> out;
    for (std::size_t c = 0; c < sv.clusters; ++c)
    {
        for (std::size_t n = 0; n < sv.snapshots; ++n)
        {
            int idx = 0;
            for (const auto &r : extract_runs(sv.bs_row(c, n), spacing_bs))
                out.push_back({Side::bs, cluster_ids[c], snapshot_ids[n], idx++, r.length, r.censor});
        }
        int idx = 0;
        for (const auto &r : extract_runs(sv.ue_row(c), spacing_ue))
            out.push_back({Side::ue, cluster_ids[c], -1, idx++, r.length, r.censor});
    }
    return out;
}

struct VrCounts
{
    std::vector<int> bs; // per (cluster, snapshot) row with any BS visibility
    std::vector<int> ue; // per cluster with any UE visibility
};

inline VrCounts vrs_per_cluster(const SideVisibility &sv)
{
    VrCounts vc;
    for (std::size_t c = 0; c < sv.clusters; ++c)
    {
        for (std::size_t n = 0; n < sv.snapshots; ++n)
        {
            const auto runs = extract_runs(sv.bs_row(c, n), 1.0);
            if (!runs.empty())
                vc.bs.push_back(int(runs.size()));
        }
        const auto runs = extract_runs(sv.ue_row(c), 1.0);
        if (!runs.empty())
            vc.ue.push_back(int(runs.size()));
    }
    return vc;
}

} // namespace mpcc

#endif
