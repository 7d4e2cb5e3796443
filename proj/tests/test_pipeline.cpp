#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "distcal/pipeline.hpp"

namespace distcal {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in) << path;
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Tiny but complete run: 4 train configs, 1 unseen-param and 3 ood prompts.
RunConfig tiny_run(const fs::path& out) {
    RunConfig run;
    run.out_dir = out.string();
    run.resolution = 2;
    run.families = {"uniform", "bernoulli"};
    run.seed = 7;
    run.soft.epochs = 2;
    run.hard.epochs = 1;
    run.eval.samples_per_prompt = 50;
    run.eval.n_paths = 2;
    return run;
}

class PipelineTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::path(::testing::TempDir()) / "distcal_pipeline";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

TEST(RunConfigJson, RoundTripPreservesEveryField) {
    RunConfig run;
    run.seed = 42;
    run.resolution = 3;
    run.family_resolution = {{"uniform", 7}, {"gamma", 2}};
    run.families = {"uniform", "gamma", "bernoulli"};
    run.methods = {"hard"};
    run.soft.epochs = 9;
    run.soft.base_lr = 5e-3;
    run.hard.samples_per_prompt = 4;
    run.hard.max_bins = 2048;
    run.eval.samples_per_prompt = 123;
    run.eval.workers = 2;
    run.out_dir = "elsewhere";

    RunConfig back = run_config_from_json(run_config_json(run));
    EXPECT_EQ(run_config_json(back).dump(), run_config_json(run).dump());
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.methods, std::vector<std::string>{"hard"});
    EXPECT_EQ(back.hard.samples_per_prompt, 4);
    EXPECT_DOUBLE_EQ(back.soft.base_lr, 5e-3);
    EXPECT_EQ(back.out_dir, "elsewhere");
}

TEST(RunConfigJson, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"verison": 1})")), ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"version": 2})")), ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"soft": {"lr": 1}})")),
                 ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"eval": {"n_paths": "four"}})")),
                 ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"methods": ["soft","soft"]})")),
                 ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"families": ["gauss"]})")),
                 ConfigError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"resolution": 0})")), ConfigError);

    RunConfig via_string =
        run_config_from_json(nlohmann::json::parse(R"({"seed": "18446744073709551615"})"));
    EXPECT_EQ(via_string.seed, 18446744073709551615ull);
}

TEST(RunConfigJson, HashIgnoresOutputLocationOnly) {
    RunConfig a;
    RunConfig b;
    b.out_dir = "/somewhere/else";
    EXPECT_EQ(config_hash_hex(a), config_hash_hex(b));
    EXPECT_EQ(config_hash_hex(a).size(), 16u);

    b.resolution = 4;
    EXPECT_NE(config_hash_hex(a), config_hash_hex(b));
    RunConfig c;
    c.seed = 1;
    EXPECT_NE(config_hash_hex(a), config_hash_hex(c));
}

TEST(RunConfigJson, SmokeProfileIsValidAndSmall) {
    RunConfig run = smoke_profile();
    run.validate();
    auto grid = pipeline_grid(run);
    EXPECT_EQ(configs_in_split(grid, Split::train).size(), 12u);
    EXPECT_EQ(configs_in_split(grid, Split::unseen_param_test).size(), 2u);
    EXPECT_EQ(configs_in_split(grid, Split::ood_test).size(), 3u);
    EXPECT_EQ(planned_steps(12, run.soft), 200);
    EXPECT_EQ(planned_steps(12, run.hard), 192);
}

TEST_F(PipelineTest, EndToEndWritesEveryArtifact) {
    RunConfig run = tiny_run(dir_);
    PipelineSummary summary = run_pipeline(run);
    EXPECT_EQ(summary.n_train, 4u);
    EXPECT_EQ(summary.n_test, 4u);
    ASSERT_EQ(summary.steps.size(), 2u);
    EXPECT_EQ(summary.steps[0], (std::pair<std::string, int>{"soft", 2}));
    EXPECT_EQ(summary.steps[1], (std::pair<std::string, int>{"hard", 8}));

    RunPaths paths = run_paths(run);
    EXPECT_EQ(paths.dir, summary.dir);
    for (const fs::path& p :
         {paths.config(), paths.benchmark(), paths.trace(TrainMethod::soft),
          paths.trace(TrainMethod::hard), paths.checkpoint(TrainMethod::soft),
          paths.checkpoint(TrainMethod::soft, true), paths.checkpoint(TrainMethod::hard),
          paths.eval_json("base"), paths.eval_json("soft"), paths.eval_json("hard"),
          paths.eval_text("base"), paths.eval_text("soft"), paths.eval_text("hard"),
          paths.report_json(), paths.report_text()})
        EXPECT_TRUE(fs::exists(p)) << p;

    nlohmann::json bench = nlohmann::json::parse(slurp(paths.benchmark()));
    EXPECT_EQ(bench["config_hash"], config_hash_hex(run));
    EXPECT_EQ(bench["seed"], run.seed);
    EXPECT_EQ(bench["counts"]["train"], 4);
    EXPECT_EQ(bench["configs"].size(), 8u);

    nlohmann::json report = nlohmann::json::parse(slurp(paths.report_json()));
    EXPECT_EQ(report["conditions"], (std::vector<std::string>{"base", "soft", "hard"}));
    ASSERT_EQ(report["families"].size(), 2u);
    EXPECT_EQ(report["families"][0]["family"], "uniform");
    EXPECT_EQ(report["families"][0]["split"], "unseen-param-test");
    EXPECT_EQ(report["families"][1]["family"], "bernoulli");
    EXPECT_EQ(report["families"][1]["split"], "ood-test");
    for (const char* cond : {"base", "soft", "hard"}) {
        EXPECT_TRUE(report["families"][0].contains(cond));
        EXPECT_TRUE(report["medians"].contains(cond));
    }

    std::string table = slurp(paths.report_text());
    EXPECT_NE(table.find("W1/q90.soft"), std::string::npos);
    EXPECT_NE(table.find("median"), std::string::npos);

    // The trace is regenerated, not appended, when a run is repeated.
    std::string trace_before = slurp(paths.trace(TrainMethod::soft));
    run_pipeline(run);
    EXPECT_EQ(slurp(paths.trace(TrainMethod::soft)), trace_before);
}

TEST_F(PipelineTest, RerunsAreByteIdentical) {
    RunConfig run = tiny_run(dir_);
    run_pipeline(run);
    RunPaths paths = run_paths(run);
    std::map<std::string, std::string> before;
    for (const auto& entry : fs::directory_iterator(paths.dir))
        before[entry.path().filename().string()] = slurp(entry.path());
    ASSERT_GE(before.size(), 15u);

    run_pipeline(run);
    for (const auto& entry : fs::directory_iterator(paths.dir))
        EXPECT_EQ(slurp(entry.path()), before.at(entry.path().filename().string()))
            << entry.path();
}

TEST_F(PipelineTest, EvalRequiresCheckpointsForRequestedMethods) {
    RunConfig run = tiny_run(dir_);
    auto grid = pipeline_generate(run);
    EXPECT_THROW(pipeline_eval(run, grid), EvaluationError);

    // Base alone needs no checkpoint.
    run.methods = {};
    auto reports = pipeline_eval(run, grid);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].first, "base");
    EXPECT_EQ(reports[0].second.prompts.size(), 4u);
}

TEST_F(PipelineTest, ReportRejectsArtifactsFromAnotherConfiguration) {
    RunConfig run = tiny_run(dir_);
    run.methods = {};
    auto grid = pipeline_generate(run);
    pipeline_eval(run, grid);
    RunPaths paths = run_paths(run);

    nlohmann::json j = nlohmann::json::parse(slurp(paths.eval_json("base")));
    j["config_hash"] = "0000000000000000";
    std::ofstream(paths.eval_json("base"), std::ios::trunc) << j.dump(2) << "\n";
    EXPECT_THROW(pipeline_report(run), EvaluationError);

    fs::remove(paths.eval_json("base"));
    EXPECT_THROW(pipeline_report(run), EvaluationError);
}

TEST_F(PipelineTest, DivergenceSurfacesAfterWritingTheTrace) {
    RunConfig run = tiny_run(dir_);
    run.methods = {"hard"};
    // Decoupled decay at this rate multiplies parameters by about -1e10 per
    // step, overflowing to non-finite within a few dozen steps.
    run.hard.base_lr = 1e12;
    run.hard.warmup_frac = 0.0;
    run.hard.epochs = 8;
    auto grid = pipeline_generate(run);
    EXPECT_THROW(pipeline_train(run, TrainMethod::hard, grid), TrainingDivergedError);
    EXPECT_TRUE(fs::exists(run_paths(run).trace(TrainMethod::hard)));
}

}  // namespace
}  // namespace distcal
