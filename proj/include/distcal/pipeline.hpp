#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distcal/benchmark.hpp"
#include "distcal/checkpoint.hpp"
#include "distcal/evaluator.hpp"
#include "distcal/report.hpp"
#include "distcal/trainer.hpp"

namespace distcal {

// Everything a run needs, under one master seed. Training and evaluation
// streams are derived from it, so a RunConfig pins the whole pipeline.
struct RunConfig {
    std::uint64_t seed = 0;
    int resolution = 5;
    std::map<std::string, int> family_resolution;
    std::vector<std::string> families;                 // empty selects all
    std::vector<std::string> methods = {"soft", "hard"};
    TrainingConfig soft = TrainingConfig::soft_defaults();
    TrainingConfig hard = TrainingConfig::hard_defaults();
    PromptEvalSettings eval;
    std::string out_dir = "runs";

    bool wants(const std::string& method) const {
        for (const std::string& m : methods)
            if (m == method) return true;
        return false;
    }

    void validate() const {
        if (resolution < 1) throw ConfigError("grid resolution must be positive");
        for (const auto& [name, res] : family_resolution) {
            family_from_name(name);
            if (res < 1) throw ConfigError("grid resolution must be positive: " + name);
        }
        for (const std::string& name : families) family_from_name(name);
        for (std::size_t i = 0; i < methods.size(); ++i) {
            train_method_from_name(methods[i]);
            for (std::size_t j = 0; j < i; ++j)
                if (methods[i] == methods[j]) throw ConfigError("duplicate method: " + methods[i]);
        }
        if (soft.method != TrainMethod::soft) throw ConfigError("soft block must use method soft");
        if (hard.method != TrainMethod::hard) throw ConfigError("hard block must use method hard");
        soft.validate();
        hard.validate();
        eval.validate();
        if (out_dir.empty()) throw ConfigError("output directory must be set");
    }
};

// Structural check of the run machinery: three families, about twenty
// configs, about two hundred optimizer steps per method, light sampling.
inline RunConfig smoke_profile() {
    RunConfig run;
    run.resolution = 3;
    run.families = {"uniform", "expon", "bernoulli"};
    run.soft.epochs = 100;  // 12 train configs, 2 steps per epoch
    run.hard.epochs = 8;    // 24 steps per epoch at R = 16
    run.eval.samples_per_prompt = 100;
    return run;
}

namespace detail {

inline void training_to_json(nlohmann::ordered_json& j, const TrainingConfig& t) {
    j["decimals"] = t.decimals;
    j["max_bins"] = t.max_bins;
    j["epochs"] = t.epochs;
    j["samples_per_prompt"] = t.samples_per_prompt;
    j["batch_size"] = t.batch_size;
    j["base_lr"] = t.base_lr;
    j["weight_decay"] = t.weight_decay;
    j["warmup_frac"] = t.warmup_frac;
}

inline void training_from_json(const nlohmann::json& j, TrainingConfig& t) {
    for (const auto& [key, value] : j.items()) {
        if (key == "decimals") t.decimals = value.get<int>();
        else if (key == "max_bins") t.max_bins = value.get<int>();
        else if (key == "epochs") t.epochs = value.get<int>();
        else if (key == "samples_per_prompt") t.samples_per_prompt = value.get<int>();
        else if (key == "batch_size") t.batch_size = value.get<int>();
        else if (key == "base_lr") t.base_lr = value.get<double>();
        else if (key == "weight_decay") t.weight_decay = value.get<double>();
        else if (key == "warmup_frac") t.warmup_frac = value.get<double>();
        else throw ConfigError("unknown training key: " + key);
    }
}

inline void eval_to_json(nlohmann::ordered_json& j, const PromptEvalSettings& e) {
    j["samples_per_prompt"] = e.samples_per_prompt;
    j["n_paths"] = e.n_paths;
    j["decimals"] = e.eval_decimals;
    j["max_bins"] = e.eval_max_bins;
    j["max_tokens"] = e.max_tokens;
    j["top_mass_threshold"] = e.top_mass_threshold;
    j["workers"] = e.workers;
}

inline void eval_from_json(const nlohmann::json& j, PromptEvalSettings& e) {
    for (const auto& [key, value] : j.items()) {
        if (key == "samples_per_prompt") e.samples_per_prompt = value.get<int>();
        else if (key == "n_paths") e.n_paths = value.get<int>();
        else if (key == "decimals") e.eval_decimals = value.get<int>();
        else if (key == "max_bins") e.eval_max_bins = value.get<int>();
        else if (key == "max_tokens") e.max_tokens = value.get<int>();
        else if (key == "top_mass_threshold") e.top_mass_threshold = value.get<double>();
        else if (key == "workers") e.workers = value.get<int>();
        else throw ConfigError("unknown eval key: " + key);
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace detail

// The out_dir is excluded so relocating a run does not change its identity.
inline nlohmann::ordered_json run_config_json(const RunConfig& run, bool include_out_dir = true) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["seed"] = run.seed;
    j["resolution"] = run.resolution;
    j["family_resolution"] = nlohmann::ordered_json::object();
    for (const auto& [name, res] : run.family_resolution) j["family_resolution"][name] = res;
    j["families"] = run.families;
    j["methods"] = run.methods;
    j["soft"] = nlohmann::ordered_json::object();
    detail::training_to_json(j["soft"], run.soft);
    j["hard"] = nlohmann::ordered_json::object();
    detail::training_to_json(j["hard"], run.hard);
    j["eval"] = nlohmann::ordered_json::object();
    detail::eval_to_json(j["eval"], run.eval);
    if (include_out_dir) j["out_dir"] = run.out_dir;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig run;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "version") {
                if (value.get<int>() != 1) throw ConfigError("unsupported config version");
            } else if (key == "seed") {
                run.seed = value.is_string() ? std::stoull(value.get<std::string>())
                                             : value.get<std::uint64_t>();
            } else if (key == "resolution") {
                run.resolution = value.get<int>();
            } else if (key == "family_resolution") {
                for (const auto& [name, res] : value.items())
                    run.family_resolution[name] = res.get<int>();
            } else if (key == "families") {
                run.families = value.get<std::vector<std::string>>();
            } else if (key == "methods") {
                run.methods = value.get<std::vector<std::string>>();
            } else if (key == "soft") {
                detail::training_from_json(value, run.soft);
            } else if (key == "hard") {
                detail::training_from_json(value, run.hard);
            } else if (key == "eval") {
                detail::eval_from_json(value, run.eval);
            } else if (key == "out_dir") {
                run.out_dir = value.get<std::string>();
            } else {
                throw ConfigError("unknown config key: " + key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    run.validate();
    return run;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

inline std::string config_hash_hex(const RunConfig& run) {
    std::uint64_t h = fnv1a64(run_config_json(run, false).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path config() const { return dir / "config.json"; }
    std::filesystem::path benchmark() const { return dir / "benchmark.json"; }
    std::filesystem::path trace(TrainMethod m) const {
        return dir / ("trace_" + std::string(train_method_name(m)) + ".csv");
    }
    std::filesystem::path checkpoint(TrainMethod m, bool latest = false) const {
        return dir / ("checkpoint_" + std::string(train_method_name(m)) +
                      (latest ? "_latest.bin" : ".bin"));
    }
    std::filesystem::path eval_json(const std::string& condition) const {
        return dir / ("eval_" + condition + ".json");
    }
    std::filesystem::path eval_text(const std::string& condition) const {
        return dir / ("eval_" + condition + ".txt");
    }
    std::filesystem::path report_json() const { return dir / "report.json"; }
    std::filesystem::path report_text() const { return dir / "report.txt"; }
};

// Artifacts live under a directory named by config hash and seed, so every
// file on disk traces back to the exact configuration that produced it.
inline RunPaths run_paths(const RunConfig& run) {
    return RunPaths{std::filesystem::path(run.out_dir) /
                    ("run-" + config_hash_hex(run) + "-s" + std::to_string(run.seed))};
}

namespace detail {

inline nlohmann::ordered_json provenance_header(const RunConfig& run) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["config_hash"] = config_hash_hex(run);
    j["seed"] = run.seed;
    return j;
}

inline nlohmann::json read_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvaluationError("missing artifact: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw EvaluationError("corrupt artifact " + path.string() + ": " + e.what());
    }
}

}  // namespace detail

inline std::vector<PromptConfig> pipeline_grid(const RunConfig& run) {
    return generate_benchmark(run.resolution, run.family_resolution, run.families);
}

// Stage 1: enumerate the benchmark and persist it with the run's identity.
inline std::vector<PromptConfig> pipeline_generate(const RunConfig& run) {
    run.validate();
    RunPaths paths = run_paths(run);
    std::filesystem::create_directories(paths.dir);
    detail::write_json_file(paths.config(), run_config_json(run));

    std::vector<PromptConfig> grid = pipeline_grid(run);
    nlohmann::ordered_json j = detail::provenance_header(run);
    nlohmann::ordered_json counts;
    for (Split s : {Split::train, Split::unseen_param_test, Split::ood_test})
        counts[split_name(s)] = configs_in_split(grid, s).size();
    j["counts"] = std::move(counts);
    j["configs"] = nlohmann::ordered_json::array();
    for (const PromptConfig& c : grid) {
        nlohmann::ordered_json e;
        e["id"] = c.id;
        e["family"] = std::string(family_info(c.family).name);
        e["split"] = split_name(c.split);
        e["params"] = nlohmann::ordered_json::object();
        for (int i = 0; i < c.spec.info().n_params; ++i)
            e["params"][std::string(c.spec.info().params[static_cast<std::size_t>(i)])] =
                c.spec.param(i);
        e["prompt"] = c.prompt_text;
        j["configs"].push_back(std::move(e));
    }
    detail::write_json_file(paths.benchmark(), j);
    return grid;
}

// All conditions share this initialization; the base condition evaluates it
// untrained, so method deltas are measured against a common starting point.
inline Model pipeline_base_model(const RunConfig& run) {
    return Model(ModelConfig{}, derive_seed(run.seed, "model"));
}

// Stage 2: train one method on the train split, leaving a loss trace, a
// rolling epoch checkpoint, and the final checkpoint behind.
inline TrainResult pipeline_train(const RunConfig& run, TrainMethod method,
                                  const std::vector<PromptConfig>& grid) {
    run.validate();
    RunPaths paths = run_paths(run);
    std::filesystem::create_directories(paths.dir);

    TrainingConfig cfg = method == TrainMethod::soft ? run.soft : run.hard;
    cfg.seed = run.seed;

    Vocabulary vocab;
    std::vector<DistributionSpec> specs;
    for (const PromptConfig& c : configs_in_split(grid, Split::train)) specs.push_back(c.spec);
    std::vector<TrainItem> items = build_train_items(vocab, specs, cfg.decimals, cfg.max_bins,
                                                     method == TrainMethod::soft);

    Model model = pipeline_base_model(run);
    AdamW opt = make_optimizer(cfg, static_cast<int>(items.size()), model.param_count());

    std::filesystem::remove(paths.trace(method));
    EpochCallback on_epoch = [&](int, const Model& m, const AdamW& o) {
        save_checkpoint(paths.checkpoint(method, true).string(), m, vocab, &o);
    };
    TrainResult result = method == TrainMethod::soft
                             ? train_soft(model, opt, items, vocab, cfg, on_epoch)
                             : train_hard(model, opt, items, vocab, cfg, on_epoch);
    append_loss_trace_csv(paths.trace(method).string(), result.trace);
    if (result.diverged)
        throw TrainingDivergedError("training diverged at step " +
                                    std::to_string(result.steps) + "; trace written to " +
                                    paths.trace(method).string());
    save_checkpoint(paths.checkpoint(method).string(), model, vocab, &opt);
    return result;
}

inline std::vector<EvalPrompt> pipeline_eval_prompts(const std::vector<PromptConfig>& grid) {
    std::vector<EvalPrompt> prompts;
    for (const PromptConfig& c : grid)
        if (c.split != Split::train) prompts.push_back(EvalPrompt{c.id, c.spec});
    return prompts;
}

// Stage 3: evaluate base plus every requested trained condition on the two
// test splits, writing one machine and one text report per condition.
inline std::vector<std::pair<std::string, EvalReport>> pipeline_eval(
    const RunConfig& run, const std::vector<PromptConfig>& grid) {
    run.validate();
    RunPaths paths = run_paths(run);
    std::filesystem::create_directories(paths.dir);

    PromptEvalSettings settings = run.eval;
    settings.seed = run.seed;
    Vocabulary vocab;
    std::vector<EvalPrompt> prompts = pipeline_eval_prompts(grid);

    std::vector<std::pair<std::string, Model>> conditions;
    conditions.emplace_back("base", pipeline_base_model(run));
    for (const std::string& name : run.methods) {
        std::filesystem::path ck = paths.checkpoint(train_method_from_name(name));
        if (!std::filesystem::exists(ck))
            throw EvaluationError("no checkpoint for condition " + name + ": " + ck.string());
        conditions.emplace_back(name, model_from_checkpoint(load_checkpoint(ck.string())));
    }

    std::vector<std::pair<std::string, EvalReport>> reports;
    for (const auto& [name, model] : conditions) {
        EvalReport report = aggregate(evaluate_prompts(model, vocab, prompts, settings));
        nlohmann::ordered_json j = detail::provenance_header(run);
        j["condition"] = name;
        j["report"] = eval_report_json(report);
        detail::write_json_file(paths.eval_json(name), j);
        detail::write_text_file(paths.eval_text(name), eval_report_text(report));
        reports.emplace_back(name, std::move(report));
    }
    return reports;
}

// Stage 4: fold the per-condition evaluations into one comparison table.
inline void pipeline_report(const RunConfig& run) {
    run.validate();
    RunPaths paths = run_paths(run);
    std::vector<std::string> conditions = {"base"};
    for (const std::string& m : run.methods) conditions.push_back(m);

    std::vector<nlohmann::json> evals;
    for (const std::string& name : conditions) {
        nlohmann::json j = detail::read_artifact(paths.eval_json(name));
        if (j.value("config_hash", "") != config_hash_hex(run))
            throw EvaluationError("eval artifact for " + name +
                                  " belongs to a different configuration");
        evals.push_back(std::move(j));
    }

    std::vector<std::string> family_order;
    for (const auto& f : evals[0]["report"]["families"])
        family_order.push_back(f["family"].get<std::string>());
    for (const nlohmann::json& e : evals) {
        std::vector<std::string> order;
        for (const auto& f : e["report"]["families"])
            order.push_back(f["family"].get<std::string>());
        if (order != family_order)
            throw EvaluationError("conditions disagree on evaluated families");
    }

    nlohmann::ordered_json out = detail::provenance_header(run);
    out["conditions"] = conditions;
    out["families"] = nlohmann::ordered_json::array();
    for (std::size_t fi = 0; fi < family_order.size(); ++fi) {
        Family family = family_from_name(family_order[fi]);
        nlohmann::ordered_json row;
        row["family"] = family_order[fi];
        row["split"] = family_info(family).ood ? split_name(Split::ood_test)
                                               : split_name(Split::unseen_param_test);
        for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            const nlohmann::json& agg = evals[ci]["report"]["families"][fi];
            nlohmann::ordered_json cell;
            cell["mean_w1_norm"] = agg["mean_w1_norm"];
            cell["mean_valid_rate"] = agg["mean_valid_rate"];
            cell["mean_logit_kl"] = agg["mean_logit_kl"];
            cell["n_prompts"] = agg["n_prompts"];
            cell["n_finite_w1"] = agg["n_finite_w1"];
            row[conditions[ci]] = std::move(cell);
        }
        out["families"].push_back(std::move(row));
    }
    out["medians"] = nlohmann::ordered_json::object();
    for (std::size_t ci = 0; ci < conditions.size(); ++ci)
        out["medians"][conditions[ci]] = evals[ci]["report"]["aggregates"];
    detail::write_json_file(paths.report_json(), out);

    auto cell_text = [](const nlohmann::json& v) {
        return v.is_null() ? std::string("---") : detail::metric_cell(v.get<double>());
    };
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"family", "split"};
    for (const char* metric : {"W1/q90", "valid", "logitKL"})
        for (const std::string& c : conditions) header.push_back(std::string(metric) + "." + c);
    rows.push_back(header);
    for (const auto& row : out["families"]) {
        std::vector<std::string> r = {row["family"].get<std::string>(),
                                      row["split"].get<std::string>()};
        for (const char* key : {"mean_w1_norm", "mean_valid_rate", "mean_logit_kl"})
            for (const std::string& c : conditions) r.push_back(cell_text(row[c][key]));
        rows.push_back(std::move(r));
    }
    std::vector<std::string> medians = {"median", "all"};
    for (const char* key : {"median_w1_norm", "median_valid_rate", "median_logit_kl"})
        for (const std::string& c : conditions) medians.push_back(cell_text(out["medians"][c][key]));
    rows.push_back(std::move(medians));

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string text;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            text += row[c];
            if (c + 1 < row.size()) text += std::string(width[c] - row[c].size() + 2, ' ');
        }
        text += '\n';
    }
    detail::write_text_file(paths.report_text(), text);
}

struct PipelineSummary {
    std::filesystem::path dir;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::pair<std::string, int>> steps;  // per trained method
};

// generate, train every requested method, evaluate all conditions, report.
inline PipelineSummary run_pipeline(const RunConfig& run) {
    run.validate();
    std::vector<PromptConfig> grid = pipeline_generate(run);
    PipelineSummary summary;
    summary.dir = run_paths(run).dir;
    summary.n_train = configs_in_split(grid, Split::train).size();
    summary.n_test = pipeline_eval_prompts(grid).size();
    for (const std::string& name : run.methods) {
        TrainResult result = pipeline_train(run, train_method_from_name(name), grid);
        summary.steps.emplace_back(name, result.steps);
    }
    pipeline_eval(run, grid);
    pipeline_report(run);
    return summary;
}

}  // namespace distcal
