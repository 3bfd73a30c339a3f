#include "test_util.hpp"

#include <elastika/pipeline.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace elastika;
using namespace elastika::testing;

namespace {

PipelineConfig small_config(const std::string& name) {
    PipelineConfig cfg;
    cfg.out_dir = scratch_dir(name).string();
    cfg.synth_subjects = 10;
    cfg.k_modes = 2;
    cfg.n_boot = 50;
    cfg.sweep_lambdas = "0,1";
    cfg.max_iters = 5;
    cfg.bins = 40;
    return cfg;
}

std::map<std::string, std::string> output_hashes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
    return out;
}

} // namespace

TEST(Config, ParseSerializeRoundTrip) {
    PipelineConfig cfg = parse_config("# comment\nlambda = 0.5\nk_modes=3\nbootstrap_null=percentile\n\n");
    EXPECT_DOUBLE_EQ(cfg.lambda, 0.5);
    EXPECT_EQ(cfg.k_modes, 3);
    EXPECT_EQ(cfg.bootstrap_null, "percentile");
    const PipelineConfig back = parse_config(serialize_config(cfg));
    EXPECT_EQ(serialize_config(back), serialize_config(cfg));
    EXPECT_THROW(parse_config("no_such_key=1\n"), ConfigError);
    EXPECT_THROW(parse_config("lambda\n"), ConfigError);
    EXPECT_THROW(parse_config("k_modes=two\n"), Error);
}

TEST(Config, ValidationRejectsBadSettings) {
    auto bad = [](auto mutate) {
        PipelineConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](PipelineConfig& c) { c.lambda = -1.0; });
    bad([](PipelineConfig& c) { c.penalty_form = "cubic"; });
    bad([](PipelineConfig& c) { c.k_modes = 0; });
    bad([](PipelineConfig& c) { c.bootstrap_null = "wild"; });
    bad([](PipelineConfig& c) { c.landmark_convention = "nearest"; });
    bad([](PipelineConfig& c) { c.sweep_lambdas = ""; });
    bad([](PipelineConfig& c) { c.synth_template = "flat"; });
    EXPECT_NO_THROW(PipelineConfig{}.validate());
}

TEST(Pipeline, RunsAllStagesAndWritesManifest) {
    const PipelineConfig cfg = small_config("pipe_smoke");
    std::ostringstream log;
    const auto outcome = run_pipeline(cfg, false, log);
    ASSERT_EQ(outcome.status, 0) << outcome.error;
    ASSERT_EQ(outcome.stages.size(), 7u);
    const fs::path root = cfg.out_dir;
    const auto manifest = ojson::parse(read_file(root / "manifest.json"));
    ASSERT_EQ(manifest["stages"].size(), 7u);
    for (const auto& rec : manifest["stages"]) {
        EXPECT_EQ(rec["status"], "ok");
        for (const auto& [path, hash] : rec["outputs"].items()) EXPECT_EQ(sha256_file(root / path), hash.get<std::string>());
    }
    for (const char* f : {"align/mean_curve.csv", "align/warps.csv", "modes/scores.csv", "modes/pns_residuals.csv",
                          "landmarks/landmarks.csv", "compare/r2_scatter.csv", "sweep/sweep.csv"})
        EXPECT_TRUE(fs::exists(root / f)) << f;
}

TEST(Pipeline, DeterministicAcrossRuns) {
    PipelineConfig a = small_config("pipe_det_a");
    PipelineConfig b = small_config("pipe_det_b");
    std::ostringstream log;
    ASSERT_EQ(run_pipeline(a, false, log).status, 0);
    ASSERT_EQ(run_pipeline(b, false, log).status, 0);
    EXPECT_EQ(output_hashes(a.out_dir), output_hashes(b.out_dir));
}

TEST(Pipeline, ResumeReusesValidStagesOnly) {
    const PipelineConfig cfg = small_config("pipe_resume");
    std::ostringstream log;
    ASSERT_EQ(run_pipeline(cfg, false, log).status, 0);
    const auto before = output_hashes(cfg.out_dir);

    auto again = run_pipeline(cfg, true, log);
    ASSERT_EQ(again.status, 0);
    for (const auto& s : again.stages) EXPECT_EQ(s.action, "reused") << s.name;

    fs::remove(fs::path(cfg.out_dir) / "modes" / "scores.csv");
    again = run_pipeline(cfg, true, log);
    ASSERT_EQ(again.status, 0);
    std::map<std::string, std::string> action;
    for (const auto& s : again.stages) action[s.name] = s.action;
    EXPECT_EQ(action["synth"], "reused");
    EXPECT_EQ(action["align"], "reused");
    EXPECT_EQ(action["landmarks"], "reused");
    EXPECT_EQ(action["modes"], "ran");
    // rerun modes restores identical scores, so compare sees unchanged inputs
    EXPECT_EQ(action["compare"], "reused");
    EXPECT_EQ(output_hashes(cfg.out_dir), before);

    PipelineConfig changed = cfg;
    changed.k_modes = 1;
    again = run_pipeline(changed, true, log);
    for (const auto& s : again.stages) EXPECT_EQ(s.action, "ran") << s.name;
}

TEST(Pipeline, FailureNamesTheStage) {
    PipelineConfig cfg = small_config("pipe_fail");
    cfg.input = (fs::path(cfg.out_dir) / "does_not_exist.csv").string();
    cfg.traits = (fs::path(cfg.out_dir) / "traits.csv").string();
    std::ostringstream log;
    const auto outcome = run_pipeline(cfg, false, log);
    EXPECT_EQ(outcome.status, 1);
    EXPECT_NE(outcome.error.find("preprocess"), std::string::npos);
    const auto manifest = ojson::parse(read_file(fs::path(cfg.out_dir) / "manifest.json"));
    EXPECT_EQ(manifest["stages"].back()["status"], "failed");

    PipelineConfig invalid = small_config("pipe_invalid");
    invalid.k_modes = 0;
    EXPECT_EQ(run_pipeline(invalid, false, log).status, 2);
    invalid = small_config("pipe_invalid2");
    invalid.input = "x.csv";
    EXPECT_EQ(run_pipeline(invalid, false, log).status, 2);
}
