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

#include "mpcc/pipeline.hpp"

#include <gtest/gtest.h>

using namespace mpcc;

namespace
{
fs::path scratch(const std::string &name)
{
    const auto p = fs::temp_directory_path() / ("mpcc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::vector<std::string> kSmall = {"synth.snapshots=6", "synth.groups=3", "synth.mpcs_per_link=40",
                                         "synth.noise_points=100", "synth.blob_points=60"};

fs::path small_bundle(const std::string &name)
{
    const auto dir = scratch(name);
    write_synthetic_bundle(load_config(std::nullopt, kSmall), dir);
    return dir;
}

std::map<std::string, std::string> output_hashes(const fs::path &dir)
{
    std::map<std::string, std::string> h;
    for (const auto &e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            h[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
    return h;
}

ErrorCode code_of(const std::function<void()> &f)
{
    try
    {
        f();
    }
    catch (const Error &e)
    {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::invalid_input;
}
} // namespace

TEST(Io, EmptyMpcFileIsDataError)
{
    const auto dir = scratch("empty");
    write_text(dir / "mpcs.jsonl", "");
    EXPECT_EQ(code_of([&] { read_mpcs(dir / "mpcs.jsonl"); }), ErrorCode::data);
}

TEST(Io, NonFiniteDelayNamesLine)
{
    const auto dir = scratch("nan");
    write_text(dir / "mpcs.csv", "snapshot,panel,delay_s,az_rad,el_rad,doppler_hz,amp_v_re,amp_v_im,amp_h_re,amp_h_im\n"
                                 "0,1,1e-8,0.1,1.5,0,1,0,0,0\n"
                                 "0,1,nan,0.1,1.5,0,1,0,0,0\n");
    try
    {
        read_mpcs(dir / "mpcs.csv");
        FAIL() << "accepted a NaN delay";
    }
    catch (const Error &e)
    {
        EXPECT_EQ(e.code(), ErrorCode::data);
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }

    write_text(dir / "bad.jsonl", R"({"snapshot":0,"panel":1,"delay_s":-1e-9,"az_rad":0,"el_rad":1,"doppler_hz":0,)"
                                  R"("amp_v":[1,0],"amp_h":[0,0]})"
                                  "\n");
    EXPECT_EQ(code_of([&] { read_mpcs(dir / "bad.jsonl"); }), ErrorCode::data);
}

TEST(Io, MpcRoundTrip)
{
    SceneConfig sc;
    sc.seed = 2;
    sc.snapshots = 2;
    sc.mpcs_per_link = 10;
    const auto s = gen_clustered_mpcs(sc);
    const auto dir = scratch("roundtrip");
    write_text(dir / "m.jsonl", format_mpcs_jsonl(s.mpcs));
    const auto back = read_mpcs(dir / "m.jsonl");
    ASSERT_EQ(back.size(), s.mpcs.size());
    for (std::size_t i = 0; i < back.size(); ++i)
    {
        EXPECT_EQ(back[i].delay, s.mpcs[i].delay);
        EXPECT_EQ(back[i].amp_h, s.mpcs[i].amp_h);
        EXPECT_EQ(back[i].panel, s.mpcs[i].panel);
    }
}

TEST(Config, UnknownKeysAndBadValues)
{
    EXPECT_EQ(code_of([] { load_config(std::nullopt, {"clustering.delta_mcdx=3"}); }), ErrorCode::config);
    EXPECT_EQ(code_of([] { load_config(std::nullopt, {"clustering.delta_mcd=-1"}); }), ErrorCode::config);
    EXPECT_EQ(code_of([] { load_config(std::nullopt, {"stats.tau_cut=maybe"}); }), ErrorCode::config);

    const auto dir = scratch("config");
    write_text(dir / "c.json", R"({ "visibility": { "delta_c": 0.2 }, "typo": 1 })");
    EXPECT_EQ(code_of([&] { load_config(dir / "c.json"); }), ErrorCode::config);

    write_text(dir / "ok.json", "{\n  // comment\n  \"visibility\": { \"delta_c\": 0.2 }\n}\n");
    const auto cfg = load_config(dir / "ok.json", {"stats.tau_cut=35"});
    EXPECT_EQ(cfg.delta_c, 0.2);
    EXPECT_FALSE(cfg.tau_cut_auto);
    EXPECT_EQ(*cfg.tau_cut_ns, 35.0);
    EXPECT_EQ(cfg.input("mpcs.jsonl"), dir / "mpcs.jsonl");
    EXPECT_EQ(exit_code(ErrorCode::config), 2);
}

TEST(Pipeline, CountsMatchTruth)
{
    const auto dir = small_bundle("counts");
    const auto cfg = load_config(dir / "config.json");
    const auto rep = run_stage("map-ios", cfg);
    const auto truth = Json::parse(read_text(dir / "truth.json"));
    EXPECT_EQ(rep.summary["mpcs"].get<std::size_t>(), truth["mpcs"].get<std::size_t>());

    const auto csv = read_text(cfg.out("ingest_counts.csv"));
    std::size_t rows = 0;
    for (const auto &c : truth["counts"])
    {
        ++rows;
        const auto line = fmt::format("{},{},{}\n", c["snapshot"].get<int>(), c["panel"].get<int>(),
                                      c["mpcs"].get<std::size_t>());
        EXPECT_NE(csv.find(line), std::string::npos) << line;
    }
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), std::ptrdiff_t(rows + 1));
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads)
{
    const auto dir = small_bundle("determinism");
    const auto run = [&](unsigned threads, const std::string &out)
    {
        auto cfg = load_config(dir / "config.json", {"output_dir=" + out});
        cfg.threads = threads;
        run_pipeline(cfg);
        return output_hashes(dir / out);
    };
    const auto a = run(1, "a"), b = run(1, "b"), c = run(3, "c");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_TRUE(a.count("stats/table2.csv") || a.count("table2.csv")) << "missing table2";
    EXPECT_TRUE(a.count("table1.csv"));
}

TEST(Pipeline, ReportsEmbedConfigAndChecksums)
{
    const auto dir = small_bundle("reports");
    const auto cfg = load_config(dir / "config.json");
    run_pipeline(cfg);
    for (const auto &[name, f] : stages())
    {
        const auto r = Json::parse(read_text(cfg.out("report_" + name + ".json")));
        EXPECT_EQ(r["stage"], name);
        EXPECT_EQ(r["config"], cfg.resolved());
        EXPECT_FALSE(r["outputs"].empty()) << name;
        for (const auto &o : r["outputs"])
            EXPECT_EQ(o["sha256"].get<std::string>(), sha256_file(cfg.out(o["file"].get<std::string>())));
        for (const auto &i : r["inputs"])
            EXPECT_EQ(i["sha256"].get<std::string>().size(), 64u);
    }
    const auto all = Json::parse(read_text(cfg.out("report.json")));
    EXPECT_EQ(all["stages"].size(), stages().size());
    EXPECT_FALSE(cfg.resolved().contains("threads"));
}

TEST(Pipeline, ClusteringRecoversPlantedGroups)
{
    const auto dir = small_bundle("ari");
    const auto cfg = load_config(dir / "config.json");
    run_stage("map-ios", cfg);
    const auto rep = run_stage("cluster", cfg);
    ASSERT_TRUE(rep.summary.contains("ari_min")) << rep.summary.dump();
    EXPECT_GT(rep.summary["ari_min"].get<double>(), 0.9);
}

TEST(Pipeline, DisabledTrackingWarns)
{
    const auto dir = small_bundle("notrack");
    const auto cfg = load_config(dir / "config.json", {"tracking.enabled=false"});
    const auto reps = run_pipeline(cfg);
    bool warned = false;
    for (const auto &r : reps)
        for (const auto &w : r.warnings)
            warned = warned || w.find("tracking disabled") != std::string::npos;
    EXPECT_TRUE(warned);
}

TEST(Pipeline, MissingInputIsDataError)
{
    const auto dir = scratch("missing");
    write_text(dir / "config.json", "{}");
    const auto cfg = load_config(dir / "config.json");
    EXPECT_EQ(code_of([&] { run_stage("map-ios", cfg); }), ErrorCode::data);
    EXPECT_EQ(code_of([&] { run_stage("bogus", cfg); }), ErrorCode::config);
}
