// Copyright 2026 The MVR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "mvr/cli.hpp"
#include "support/cli_runner.hpp"
#include "support/generators.hpp"

namespace mvr {
namespace {

using testing::CliRun;
using testing::MockEmbed;
using testing::MockLlm;
using testing::TempDir;
using testing::read_text;
using testing::run_cli;

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_text(p)); }

std::size_t count_lines(const std::filesystem::path& p) {
    const auto text = read_text(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
    ~ScopedEnv() { ::unsetenv(name_); }
    ScopedEnv(const ScopedEnv&) = delete;
    ScopedEnv& operator=(const ScopedEnv&) = delete;

private:
    const char* name_;
};

CliRun synth(const TempDir& dir, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"synth", "-o", (dir / "data").string(), "--identities", "25", "--views", "5",
                                  "--seed", "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args, dir.path());
}

TEST(Config, ParsesFieldsAndResolvesRelativePaths) {
    const auto j = nlohmann::json::parse(R"({
        "query_store": "q.mvre", "gallery_store": "/abs/g.mvre", "output_dir": "o",
        "providers": [{"name": "a", "endpoint": "http://x", "model": "m", "temperature": 0.5, "timeout_ms": 10}],
        "requested_count": 7,
        "compensation": {"alpha": 0.5, "beta": 0.1, "max_views": 4, "renormalize_output": false},
        "strategies": ["diverse"],
        "flags": {"gallery_key": false},
        "delta": -0.05, "stopwords": ["a", "the"],
        "sweep": {"alphas": [0.0, 1.0], "scales": [0, 3]},
        "top_k": 3, "seed": 9})");
    const auto c = parse_run_config(j, "/base");
    EXPECT_EQ(*c.paths.query_store, std::filesystem::path("/base/q.mvre"));
    EXPECT_EQ(*c.paths.gallery_store, std::filesystem::path("/abs/g.mvre"));
    EXPECT_FALSE(c.paths.cache);
    EXPECT_EQ(c.output_dir, std::filesystem::path("/base/o"));
    ASSERT_EQ(c.providers.size(), 1u);
    EXPECT_EQ(c.providers[0].temperature, 0.5);
    EXPECT_EQ(c.providers[0].timeout, std::chrono::milliseconds(10));
    EXPECT_EQ(c.requested_count, 7u);
    EXPECT_EQ(c.compensation.alpha, 0.5);
    EXPECT_EQ(c.compensation.max_views, 4u);
    EXPECT_FALSE(c.compensation.renormalize_output);
    EXPECT_EQ(c.strategies, std::vector<Strategy>{Strategy::diverse});
    EXPECT_TRUE(c.flags.query_key);
    EXPECT_FALSE(c.flags.gallery_key);
    EXPECT_EQ(c.delta, -0.05);
    EXPECT_EQ(c.stopwords->size(), 2u);
    EXPECT_EQ(c.sweep_alphas, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(c.sweep_betas.size(), 6u);
    EXPECT_EQ(c.top_k, 3u);
    EXPECT_EQ(c.seed, 9u);
}

TEST(Config, DefaultsMatchReferenceSettings) {
    const auto c = parse_run_config(nlohmann::json::object(), "/b");
    EXPECT_EQ(c.compensation.alpha, 0.75);
    EXPECT_EQ(c.compensation.beta, 0.3);
    EXPECT_EQ(c.delta, -0.03);
    EXPECT_EQ(c.output_dir, std::filesystem::path("/b/mvr-out"));
    EXPECT_TRUE(c.flags.query_key && c.flags.query_diverse && c.flags.gallery_key && c.flags.gallery_diverse);
}

TEST(Config, TypeErrorsAreConfigErrors) {
    try {
        (void)parse_run_config(nlohmann::json::parse(R"({"compensation": {"alpha": "big"}})"), "/b");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    EXPECT_THROW((void)parse_run_config(nlohmann::json::parse(R"({"strategies": ["loud"]})"), "/b"), Error);
}

TEST(Config, RequireReportsMissingAndAbsentPaths) {
    RunConfig c;
    try {
        (void)c.require(c.paths.query_store, "query_store");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    c.paths.query_store = "/definitely/not/here.mvre";
    try {
        (void)c.require(c.paths.query_store, "query_store");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
}

TEST(Config, EnvironmentOverridesEndpointsAndKey) {
    TempDir dir;
    detail::write_file_bytes(dir / "c.json",
                             R"({"providers": [{"name": "a", "endpoint": "http://file"}, {"name": "b", "api_key": "k"}]})");
    const ScopedEnv e1(kEmbedEndpointEnv, "http://embed-env");
    const ScopedEnv e2(kLlmEndpointEnv, "http://llm-env");
    const ScopedEnv e3(kLlmApiKeyEnv, "secret");
    const auto c = load_run_config(dir / "c.json");
    EXPECT_EQ(c.embed.endpoint, "http://embed-env");
    EXPECT_EQ(c.providers[0].endpoint, "http://llm-env");
    EXPECT_EQ(c.providers[1].endpoint, "http://llm-env");
    EXPECT_EQ(*c.providers[0].api_key, "secret");
    EXPECT_EQ(*c.providers[1].api_key, "k");
}

TEST(Config, UnparseableFileIsConfigError) {
    TempDir dir;
    detail::write_file_bytes(dir / "c.json", "{nope");
    try {
        (void)load_run_config(dir / "c.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
}

TEST(Overrides, StrategiesMaskFlagsAndWeightsValidate) {
    RunConfig c;
    cli::Overrides o;
    o.strategies = "diverse";
    o.alpha = 0.0;
    cli::apply_overrides(c, o);
    EXPECT_EQ(c.strategies, std::vector<Strategy>{Strategy::diverse});
    EXPECT_FALSE(c.flags.query_key);
    EXPECT_FALSE(c.flags.gallery_key);
    EXPECT_TRUE(c.flags.query_diverse);
    EXPECT_EQ(c.compensation.alpha, 0.0);
    cli::Overrides bad;
    bad.beta = -1.0;
    EXPECT_THROW(cli::apply_overrides(c, bad), Error);
}

TEST(Cli, NoArgumentsOrUnknownCommandExitTwo) {
    TempDir dir;
    EXPECT_EQ(run_cli({}, dir.path()).exit_code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}, dir.path()).exit_code, 2);
    EXPECT_EQ(run_cli({"evaluate"}, dir.path()).exit_code, 2);
    EXPECT_EQ(run_cli({"evaluate", "-c", (dir / "missing.json").string()}, dir.path()).exit_code, 2);
    EXPECT_EQ(run_cli({"--help"}, dir.path()).exit_code, 0);
}

TEST(Cli, SynthThenEvaluateImprovesRankOne) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    const auto cfg = (dir / "data" / "config.json").string();
    const auto r = run_cli({"evaluate", "-c", cfg}, dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto base = MetricsReport::from_json(read_json(dir / "data" / "out" / "report_baseline.json"));
    const auto comp = MetricsReport::from_json(read_json(dir / "data" / "out" / "report_compensated.json"));
    EXPECT_EQ(base.query_count, 50u);
    EXPECT_GT(comp.r1, base.r1);
    EXPECT_NE(r.out.find("baseline"), std::string::npos);
    EXPECT_EQ(read_text(dir / "data" / "out" / "report.txt"), r.out);
    EXPECT_EQ(comp.config_snapshot["alpha"], 0.75);
}

TEST(Cli, ZeroWeightsReportEqualsBaseline) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    const auto cfg = (dir / "data" / "config.json").string();
    ASSERT_EQ(run_cli({"evaluate", "-c", cfg, "--alpha", "0", "--beta", "0"}, dir.path()).exit_code, 0);
    const auto base = MetricsReport::from_json(read_json(dir / "data" / "out" / "report_baseline.json"));
    const auto comp = MetricsReport::from_json(read_json(dir / "data" / "out" / "report_compensated.json"));
    EXPECT_TRUE(base.same_metrics(comp));
    EXPECT_EQ(comp.config_snapshot["alpha"], 0.0);
}

TEST(Cli, EvaluateIsByteIdenticalAcrossRuns) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    const auto cfg = (dir / "data" / "config.json").string();
    ASSERT_EQ(run_cli({"evaluate", "-c", cfg}, dir.path()).exit_code, 0);
    ASSERT_EQ(run_cli({"index", "-c", cfg}, dir.path()).exit_code, 0);
    const auto out = dir / "data" / "out";
    const auto a = read_text(out / "report_compensated.json");
    const auto b = read_text(out / "rankings_compensated.jsonl");
    ASSERT_EQ(run_cli({"evaluate", "-c", cfg}, dir.path()).exit_code, 0);
    ASSERT_EQ(run_cli({"index", "-c", cfg}, dir.path()).exit_code, 0);
    EXPECT_EQ(read_text(out / "report_compensated.json"), a);
    EXPECT_EQ(read_text(out / "rankings_compensated.jsonl"), b);
    EXPECT_EQ(count_lines(out / "rankings_baseline.jsonl"), 50u);
    const auto first = nlohmann::json::parse(b.substr(0, b.find('\n')));
    EXPECT_EQ(first["results"].size(), 10u);
}

TEST(Cli, AblateSweepAndDriftWriteArtifacts) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    const auto cfg = (dir / "data" / "config.json").string();
    const auto out = dir / "data" / "out";
    ASSERT_EQ(run_cli({"ablate", "-c", cfg}, dir.path()).exit_code, 0);
    EXPECT_EQ(read_json(out / "ablation.json").size(), 16u);
    // Scales beyond the ten available query views are a range error.
    EXPECT_EQ(run_cli({"sweep", "-c", cfg}, dir.path()).exit_code, 2);
    detail::write_file_bytes(dir / "data" / "sweep.json",
                             R"({"query_store": "query.mvre", "gallery_store": "gallery.mvre",
                                 "query_captions": "queries.jsonl", "gallery_captions": "gallery.jsonl",
                                 "query_view_store": "query_views.mvre", "gallery_view_store": "gallery_views.mvre",
                                 "output_dir": "out", "sweep": {"alphas": [0, 0.75], "betas": [0, 0.3],
                                 "scales": [0, 5, 10]}})");
    const auto sweep_cfg = (dir / "data" / "sweep.json").string();
    ASSERT_EQ(run_cli({"sweep", "-c", sweep_cfg}, dir.path()).exit_code, 0);
    EXPECT_EQ(count_lines(out / "grid.csv"), 5u);
    EXPECT_EQ(count_lines(out / "grid_r1.csv"), 3u);
    EXPECT_EQ(count_lines(out / "scale.csv"), 4u);
    ASSERT_EQ(run_cli({"drift", "-c", cfg}, dir.path()).exit_code, 0);
    const auto drift = read_json(out / "drift.json");
    EXPECT_EQ(drift["captions"].size(), 50u);
    EXPECT_EQ(drift["captions"][0]["l2"].size(), 10u);
    EXPECT_EQ(drift["aggregate"]["l2"]["count"], 500);
    EXPECT_TRUE(std::filesystem::exists(out / "mvr.log"));
}

TEST(Cli, MalformedStoreExitsTwoWithFormatError) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    detail::write_file_bytes(dir / "data" / "query.mvre", "NOTMVRE!garbage");
    const auto r = run_cli({"evaluate", "-c", (dir / "data" / "config.json").string()}, dir.path());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
    try {
        (void)read_store(dir / "data" / "query.mvre");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
    }
}

TEST(Cli, MissingViewsExitTwoAsCacheMiss) {
    TempDir dir;
    ASSERT_EQ(synth(dir).exit_code, 0);
    std::filesystem::remove(dir / "data" / "gallery_views.mvre");
    const auto cfg = (dir / "data" / "config.json").string();
    EXPECT_EQ(run_cli({"evaluate", "-c", cfg}, dir.path()).exit_code, 2);
    EXPECT_EQ(run_cli({"evaluate", "-c", cfg, "--beta", "0.3", "-o", (dir / "o2").string()}, dir.path()).exit_code, 2);
}

TEST(Cli, ReformulateCachesAndRerunIssuesNoRequests) {
    TempDir dir;
    MockLlm llm;
    MockEmbed embed;
    testing::write_toy_corpus(dir / "toy", llm.url(), embed.url());
    const auto cfg = (dir / "toy" / "config.json").string();
    const auto r = run_cli({"reformulate", "-c", cfg}, dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(llm.requests(), 12u);
    const auto cache = dir / "toy" / "out" / "reformulations.jsonl";
    EXPECT_EQ(count_lines(cache), 12u);
    llm.reset_counter();
    const auto again = run_cli({"reformulate", "-c", cfg}, dir.path());
    EXPECT_EQ(again.exit_code, 0);
    EXPECT_EQ(llm.requests(), 0u);
    EXPECT_NE(again.err.find("12 cache hits"), std::string::npos);
}

TEST(Cli, ProviderFailureExitsThree) {
    TempDir dir;
    MockLlm llm;
    llm.always_fail = true;
    testing::write_toy_corpus(dir / "toy", llm.url(), "http://127.0.0.1:9");
    auto cfg = read_json(dir / "toy" / "config.json");
    cfg["providers"][0]["max_retries"] = 1;
    detail::write_file_bytes(dir / "toy" / "config.json", cfg.dump());
    const auto r = run_cli({"reformulate", "-c", (dir / "toy" / "config.json").string()}, dir.path());
    EXPECT_EQ(r.exit_code, 3) << r.err;
}

TEST(Cli, KilledRunResumesFromCache) {
    TempDir dir;
    MockLlm llm;
    llm.delay_ms = 150;
    testing::write_toy_corpus(dir / "toy", llm.url(), "http://127.0.0.1:9");
    const auto cfg = (dir / "toy" / "config.json").string();
    const auto cache = dir / "toy" / "out" / "reformulations.jsonl";
    const pid_t pid = testing::spawn_cli({"reformulate", "-c", cfg}, dir / "k.out", dir / "k.err");
    // Wait for a few completed sets, then kill without warning.
    for (int i = 0; i < 200 && (!std::filesystem::exists(cache) || count_lines(cache) < 3); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ::kill(pid, SIGKILL);
    EXPECT_EQ(testing::wait_exit(pid), -SIGKILL);
    const std::size_t done = count_lines(cache);
    ASSERT_GE(done, 3u);
    ASSERT_LT(done, 12u);

    llm.delay_ms = 0;
    llm.reset_counter();
    const auto resumed = run_cli({"reformulate", "-c", cfg}, dir.path());
    EXPECT_LE(resumed.exit_code, 1) << resumed.err;
    EXPECT_LE(llm.requests(), 12u - done);
    EXPECT_GE(llm.requests(), 12u - done - 1);

    llm.reset_counter();
    EXPECT_LE(run_cli({"reformulate", "-c", cfg}, dir.path()).exit_code, 1);
    EXPECT_EQ(llm.requests(), 0u);
    ReformulationCache reloaded(cache);
    EXPECT_EQ(reloaded.size(), 12u);
}

TEST(Cli, CompensateEmbedsViewsOnceAndIsIdempotent) {
    TempDir dir;
    MockLlm llm;
    MockEmbed embed;
    testing::write_toy_corpus(dir / "toy", llm.url(), embed.url());
    const auto cfg = (dir / "toy" / "config.json").string();
    ASSERT_EQ(run_cli({"reformulate", "-c", cfg}, dir.path()).exit_code, 0);
    const auto r = run_cli({"compensate", "-c", cfg}, dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_GE(embed.requests(), 1u);
    const auto out = dir / "toy" / "out";
    const auto q = read_store(out / "compensated_query.mvre");
    const auto views = read_store(out / "query_views.mvre");
    EXPECT_EQ(q.size(), 3u);
    EXPECT_TRUE(q.normalized());
    EXPECT_EQ(views.size(), 3u * 2u * 4u);
    EXPECT_EQ(read_json(out / "query_views.mvre.sets.json")["q1"]["diverse"], 4);
    const auto bytes_q = read_text(out / "compensated_query.mvre");
    const auto bytes_g = read_text(out / "compensated_gallery.mvre");

    embed.reset_counter();
    ASSERT_EQ(run_cli({"compensate", "-c", cfg}, dir.path()).exit_code, 0);
    EXPECT_EQ(embed.requests(), 0u);
    EXPECT_EQ(read_text(out / "compensated_query.mvre"), bytes_q);
    EXPECT_EQ(read_text(out / "compensated_gallery.mvre"), bytes_g);

    const auto ev = run_cli({"evaluate", "-c", cfg}, dir.path());
    ASSERT_EQ(ev.exit_code, 0) << ev.err;
    EXPECT_EQ(MetricsReport::from_json(read_json(out / "report_compensated.json")).query_count, 3u);
}

TEST(Cli, EmbedServiceDownExitsThree) {
    TempDir dir;
    MockLlm llm;
    testing::write_toy_corpus(dir / "toy", llm.url(), "http://127.0.0.1:9");
    auto cfg = read_json(dir / "toy" / "config.json");
    cfg["embed"]["timeout_ms"] = 500;
    detail::write_file_bytes(dir / "toy" / "config.json", cfg.dump());
    const auto path = (dir / "toy" / "config.json").string();
    ASSERT_EQ(run_cli({"reformulate", "-c", path}, dir.path()).exit_code, 0);
    EXPECT_EQ(run_cli({"compensate", "-c", path}, dir.path()).exit_code, 3);
}

TEST(Keywords, EmptyCaptionFilesGiveEmptyOutput) {
    TempDir dir;
    detail::write_file_bytes(dir / "q.jsonl", "");
    detail::write_file_bytes(dir / "b.jsonl", "");
    RunConfig c;
    c.paths.query_captions = dir / "q.jsonl";
    c.paths.query_token_bundles = dir / "b.jsonl";
    c.output_dir = dir / "out";
    const auto r = cli::cmd_keywords(c);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(read_text(dir / "out" / "keywords.jsonl"), "");
}

}  // namespace
}  // namespace mvr
