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

// Command line front end. Every subcommand reads the same config file and writes into output_dir.

#include "mpcc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace
{
struct Common
{
    std::string config;
    std::vector<std::string> overrides;
    unsigned threads = 0;
    bool quiet = false;
};

void add_common(CLI::App *sub, Common &c)
{
    sub->add_option("-c,--config", c.config, "config file (JSON, comments allowed); defaults apply when omitted");
    sub->add_option("-s,--set", c.overrides, "override a config value, e.g. --set clustering.delta_mcd=5")
        ->take_all();
    sub->add_option("-j,--threads", c.threads, "worker threads (overrides the config)");
    sub->add_flag("-q,--quiet", c.quiet, "do not print the stage summary");
}

mpcc::PipelineConfig resolve(const Common &c)
{
    auto o = c.overrides;
    if (c.threads)
        o.push_back("threads=" + std::to_string(c.threads));
    return mpcc::load_config(c.config.empty() ? std::nullopt : std::optional<mpcc::fs::path>(c.config), o);
}

void print(const mpcc::StageReport &r, bool quiet)
{
    if (quiet)
        return;
    fmt::print("{}: {}\n", r.stage, r.summary.dump());
    for (const auto &w : r.warnings)
        fmt::print(stderr, "warning [{}]: {}\n", r.stage, w);
}
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"mpcc: multipath cluster identification, tracking and statistics for distributed MIMO channels"};
    app.require_subcommand(1);

    Common common;
    std::vector<std::pair<std::string, CLI::App *>> stage_cmds;
    const std::pair<const char *, const char *> descr[] = {
        {"map-ios", "map MPCs to interacting objects in the point cloud"},
        {"cluster", "cluster mapped MPCs per snapshot"},
        {"track", "track clusters over snapshots"},
        {"visibility", "visibility tensor and visibility regions"},
        {"vr-stats", "VR length and count statistics"},
        {"stats", "cluster-level statistics per link"},
    };
    for (const auto &[name, d] : descr)
    {
        auto *sub = app.add_subcommand(name, d);
        add_common(sub, common);
        stage_cmds.emplace_back(name, sub);
    }
    auto *pipe = app.add_subcommand("pipeline", "run every stage in order");
    add_common(pipe, common);

    std::string synth_out;
    auto *synth = app.add_subcommand("synth", "write a synthetic input bundle with ground truth");
    add_common(synth, common);
    synth->add_option("-o,--out", synth_out, "bundle directory")->required();

    auto *defaults = app.add_subcommand("defaults", "print the default config with documentation");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (defaults->parsed())
        {
            std::cout << mpcc::kDefaultConfig << "\n";
            return 0;
        }
        const auto cfg = resolve(common);
        if (synth->parsed())
        {
            const auto t = mpcc::write_synthetic_bundle(cfg, synth_out);
            if (!common.quiet)
                fmt::print("synth: {} MPCs, {} groups, separation ratio >= {:.3g} -> {}\n", t["mpcs"].get<std::size_t>(),
                           t["groups"].size(), t["separation_ratio_min"].get<double>(), synth_out);
            return 0;
        }
        if (pipe->parsed())
        {
            for (const auto &r : mpcc::run_pipeline(cfg))
                print(r, common.quiet);
            return 0;
        }
        for (const auto &[name, sub] : stage_cmds)
            if (sub->parsed())
                print(mpcc::run_stage(name, cfg), common.quiet);
        return 0;
    }
    catch (const mpcc::Error &e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return mpcc::exit_code(e.code());
    }
    catch (const std::exception &e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    }
}
