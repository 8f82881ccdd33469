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

// Library walk-through on a small synthetic scene: map, cluster, track, visibility, VR fit.

#include "mpcc/mpcc.hpp"

#include <fmt/format.h>

#include <map>
#include <numeric>

int main()
{
    using namespace mpcc;

    SceneConfig sc;
    sc.seed = 7;
    sc.snapshots = 12;
    const auto syn = gen_clustered_mpcs(sc);
    fmt::print("scene: {} panels, {} snapshots, {} IO groups, {} MPCs\n", syn.scene.panels.size(),
               syn.scene.snapshot_ids.size(), syn.scene.groups.size(), syn.mpcs.size());

    // MPC -> interacting object
    const PointCloud cloud(syn.scene.cloud);
    const auto mapped = map_all(syn.mpcs, syn.scene.panels, cloud, GeometryConfig{});
    fmt::print("mapped {} of {} MPCs\n", mapped.interactions.size(), syn.mpcs.size());

    // joint clustering per snapshot and tracking across snapshots
    std::map<int, std::vector<Interaction>> snaps;
    for (const auto &it : mapped.interactions)
        snaps[it.snapshot].push_back(it);

    Tracker tracker(FilterConfig::defaults());
    std::map<std::size_t, int> track_of_mpc;
    for (const auto &[n, its] : snaps)
    {
        const auto sc_n = cluster_snapshot(its, ClusteringConfig{});
        std::vector<TrackObservation> obs;
        for (const auto &c : sc_n.clusters)
        {
            TrackObservation o;
            o.cluster_id = c.id;
            o.centroid = to_measurement(c.centroid);
            for (auto m : c.members)
            {
                o.points.push_back(to_measurement(mcd_point(its[m])));
                o.weights.push_back(its[m].power);
            }
            obs.push_back(std::move(o));
        }
        std::map<int, int> cl_to_track;
        for (const auto &e : tracker.step(n, obs))
            if (e.cluster_id)
                cl_to_track[*e.cluster_id] = e.track_id;
        for (const auto &c : sc_n.clusters)
            for (auto m : c.members)
                track_of_mpc[its[m].mpc_index] = cl_to_track.at(c.id);
        fmt::print("snapshot {:2d}: {} clusters, ARI vs planted groups {:.3f}\n", n, sc_n.cluster_count(),
                   [&]
                   {
                       std::vector<int> t;
                       for (const auto &it : its)
                           t.push_back(syn.labels[it.mpc_index]);
                       return adjusted_rand_index(sc_n.labels(its.size()), t);
                   }());
    }
    fmt::print("{} tracks\n", tracker.tracks().size());

    // visibility per (track, panel, snapshot)
    const auto pt = build_power_tensor(syn.mpcs, syn.scene.panels, track_of_mpc);
    const auto vt = link_visibility(pt, 0.1, 0.02);
    const auto vrs = extract_vrs(side_visibility(vt), vt.cluster_ids, vt.snapshot_ids, sc.panel_spacing, sc.ue_step);
    std::vector<VrObservation> bs;
    for (const auto &v : vrs)
        if (v.side == Side::bs)
            bs.push_back(v);
    const double L = double(sc.panels - 1) * sc.panel_spacing;
    const auto fit = censored_vr_mle(bs, L, 0.2);
    fmt::print("BS-VRs: {} observed, mean complete length {:.3f} m, radius {:.3f} m\n", bs.size(), fit.lambda_y,
               vr_radius(fit.lambda_y));
    return 0;
}
