#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distcal/pipeline.hpp"

namespace {

using namespace distcal;

constexpr const char* kOutRootEnv = "DISTCAL_OUT_ROOT";

struct CliOverrides {
    std::uint64_t seed = 0;
    int resolution = 5;
    std::vector<std::string> families;
    std::vector<std::string> family_resolution;  // name=points
    std::string method = "both";
    int decimals = 5;
    int max_bins = 0;
    int epochs = 0;
    int completions = 16;  // R, hard training only
    int batch_size = 8;
    double lr = 2e-4;
    double weight_decay = 0.01;
    int samples_per_prompt = 1000;
    int n_paths = 4;
    int max_tokens = 16;
    int workers = 1;
    std::string out_dir;
};

void apply_selected(RunConfig& run, const std::function<void(TrainingConfig&)>& fn) {
    if (run.wants("soft")) fn(run.soft);
    if (run.wants("hard")) fn(run.hard);
}

void print_eval_summary(const std::vector<std::pair<std::string, EvalReport>>& reports) {
    for (const auto& [name, report] : reports) {
        std::cout << "  " << name << ": median W1/q90="
                  << detail::optional_cell(report.median_w1_norm)
                  << " valid=" << detail::metric_cell(report.median_valid_rate)
                  << " logitKL=" << detail::metric_cell(report.median_logit_kl) << "\n";
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"trains a small transformer to sample from prompted distributions"};
    app.require_subcommand(1);

    CliOverrides o;
    std::string config_path;
    bool smoke = false;

    auto* config_opt = app.add_option("--config", config_path, "JSON run configuration");
    auto* smoke_opt = app.add_flag("--smoke", smoke, "start from the small smoke profile");
    smoke_opt->excludes(config_opt);
    auto* seed_opt = app.add_option("--seed", o.seed, "master seed for the whole run");
    auto* res_opt = app.add_option("--resolution", o.resolution,
                                   "points per continuous training axis");
    auto* fam_opt = app.add_option("--families", o.families,
                                   "restrict to these families (scipy names)")
                        ->delimiter(',');
    auto* famres_opt = app.add_option("--family-resolution", o.family_resolution,
                                      "per-family resolution override, name=points")
                           ->delimiter(',');
    auto* method_opt = app.add_option("--method", o.method, "which objective(s) to train")
                           ->check(CLI::IsMember({"soft", "hard", "both", "none"}));
    auto* d_opt = app.add_option("--d,-d", o.decimals,
                                 "output decimals for the selected method(s)");
    auto* bins_opt = app.add_option("--max-bins", o.max_bins,
                                    "discretization cap for the selected method(s)");
    auto* e_opt = app.add_option("--E,-E", o.epochs, "epochs for the selected method(s)");
    auto* r_opt = app.add_option("--R,-R", o.completions,
                                 "completions per prompt per epoch (hard training)");
    auto* batch_opt = app.add_option("--batch-size", o.batch_size,
                                     "batch size for the selected method(s)");
    auto* lr_opt = app.add_option("--lr", o.lr, "peak learning rate for the selected method(s)");
    auto* wd_opt = app.add_option("--weight-decay", o.weight_decay,
                                  "decoupled weight decay for the selected method(s)");
    auto* spp_opt = app.add_option("--samples-per-prompt", o.samples_per_prompt,
                                   "generations per prompt at evaluation time");
    auto* paths_opt = app.add_option("--n-paths", o.n_paths,
                                     "sampled paths per prompt for the logit KL estimate");
    auto* tokens_opt = app.add_option("--max-tokens", o.max_tokens,
                                      "generation cutoff per completion");
    auto* workers_opt = app.add_option("--workers", o.workers, "evaluation worker threads");
    auto* out_opt = app.add_option("--out", o.out_dir,
                                   std::string("output root (overrides ") + kOutRootEnv + ")");

    auto* cmd_generate =
        app.add_subcommand("generate", "enumerate the benchmark and write benchmark.json");
    auto* cmd_train = app.add_subcommand("train", "train the selected method(s) on the train split");
    auto* cmd_eval =
        app.add_subcommand("eval", "evaluate base and trained checkpoints on the test splits");
    auto* cmd_report =
        app.add_subcommand("report", "fold per-condition evaluations into one comparison");
    auto* cmd_all = app.add_subcommand("all", "generate, train, evaluate, report");
    for (CLI::App* cmd : {cmd_generate, cmd_train, cmd_eval, cmd_report, cmd_all})
        cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig run;
    if (smoke) run = smoke_profile();
    if (config_opt->count()) run = load_run_config(config_path);

    if (seed_opt->count()) run.seed = o.seed;
    if (res_opt->count()) run.resolution = o.resolution;
    if (fam_opt->count()) run.families = o.families;
    if (famres_opt->count()) {
        for (const std::string& spec : o.family_resolution) {
            std::size_t eq = spec.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
                throw ConfigError("expected name=points, got: " + spec);
            run.family_resolution[spec.substr(0, eq)] = std::stoi(spec.substr(eq + 1));
        }
    }
    if (method_opt->count()) {
        if (o.method == "both") run.methods = {"soft", "hard"};
        else if (o.method == "none") run.methods = {};
        else run.methods = {o.method};
    }
    if (d_opt->count()) apply_selected(run, [&](TrainingConfig& t) { t.decimals = o.decimals; });
    if (bins_opt->count()) apply_selected(run, [&](TrainingConfig& t) { t.max_bins = o.max_bins; });
    if (e_opt->count()) apply_selected(run, [&](TrainingConfig& t) { t.epochs = o.epochs; });
    if (r_opt->count()) {
        if (!run.wants("hard")) throw ConfigError("R only applies to hard training");
        run.hard.samples_per_prompt = o.completions;
    }
    if (batch_opt->count())
        apply_selected(run, [&](TrainingConfig& t) { t.batch_size = o.batch_size; });
    if (lr_opt->count()) apply_selected(run, [&](TrainingConfig& t) { t.base_lr = o.lr; });
    if (wd_opt->count())
        apply_selected(run, [&](TrainingConfig& t) { t.weight_decay = o.weight_decay; });
    if (spp_opt->count()) run.eval.samples_per_prompt = o.samples_per_prompt;
    if (paths_opt->count()) run.eval.n_paths = o.n_paths;
    if (tokens_opt->count()) run.eval.max_tokens = o.max_tokens;
    if (workers_opt->count()) run.eval.workers = o.workers;
    if (out_opt->count()) {
        run.out_dir = o.out_dir;
    } else if (const char* env = std::getenv(kOutRootEnv)) {
        run.out_dir = env;
    }
    run.validate();

    RunPaths paths = run_paths(run);
    if (*cmd_generate) {
        auto grid = pipeline_generate(run);
        std::cout << "benchmark: " << paths.benchmark().string() << "\n";
        for (Split s : {Split::train, Split::unseen_param_test, Split::ood_test})
            std::cout << "  " << split_name(s) << ": " << configs_in_split(grid, s).size()
                      << "\n";
    } else if (*cmd_train) {
        auto grid = pipeline_generate(run);
        for (const std::string& name : run.methods) {
            TrainResult result = pipeline_train(run, train_method_from_name(name), grid);
            std::cout << name << ": " << result.steps << " steps, final loss "
                      << (result.trace.empty() ? 0.0 : result.trace.back().loss) << "\n";
        }
        std::cout << "checkpoints in " << paths.dir.string() << "\n";
    } else if (*cmd_eval) {
        auto grid = pipeline_grid(run);
        auto reports = pipeline_eval(run, grid);
        std::cout << "evaluated " << pipeline_eval_prompts(grid).size() << " prompts\n";
        print_eval_summary(reports);
    } else if (*cmd_report) {
        pipeline_report(run);
        std::cout << "report: " << paths.report_json().string() << "\n";
    } else if (*cmd_all) {
        PipelineSummary summary = run_pipeline(run);
        std::cout << "run dir: " << summary.dir.string() << "\n";
        std::cout << "train configs: " << summary.n_train
                  << ", test prompts: " << summary.n_test << "\n";
        for (const auto& [name, steps] : summary.steps)
            std::cout << name << ": " << steps << " steps\n";
        std::cout << "report: " << paths.report_json().string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterDomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const EvaluationError& e) {
        std::cerr << "evaluation failed: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "evaluation failed: " << e.what() << "\n";
        return 4;
    }
}
