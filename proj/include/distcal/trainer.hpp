#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"
#include "distcal/model.hpp"
#include "distcal/optimizer.hpp"
#include "distcal/output_space.hpp"
#include "distcal/random.hpp"
#include "distcal/token_trie.hpp"
#include "distcal/vocabulary.hpp"

namespace distcal {

enum class TrainMethod { soft, hard };

inline const char* train_method_name(TrainMethod m) {
    return m == TrainMethod::soft ? "soft" : "hard";
}

inline TrainMethod train_method_from_name(const std::string& name) {
    if (name == "soft") return TrainMethod::soft;
    if (name == "hard") return TrainMethod::hard;
    throw ConfigError("unknown training method: " + name);
}

struct TrainingConfig {
    TrainMethod method = TrainMethod::soft;
    int decimals = 5;
    int max_bins = 1001;
    int epochs = 3;
    int samples_per_prompt = 1;  // per-prompt completions drawn each epoch (R)
    int batch_size = 8;
    std::uint64_t seed = 0;
    double base_lr = 2e-4;
    double weight_decay = 0.01;
    double warmup_frac = 0.03;

    static TrainingConfig soft_defaults() { return TrainingConfig{}; }

    static TrainingConfig hard_defaults() {
        TrainingConfig t;
        t.method = TrainMethod::hard;
        t.max_bins = 16384;
        t.epochs = 2;
        t.samples_per_prompt = 16;
        return t;
    }

    void validate() const {
        if (decimals < 0 || decimals > 6) throw ConfigError("decimals must be in [0, 6]");
        if (max_bins < 2) throw ConfigError("max_bins must be at least 2");
        if (epochs < 0) throw ConfigError("epochs must be nonnegative");
        if (samples_per_prompt < 1) throw ConfigError("samples_per_prompt must be at least 1");
        if (method == TrainMethod::soft && samples_per_prompt != 1)
            throw ConfigError("soft training draws exactly one path per prompt per epoch");
        if (batch_size < 1) throw ConfigError("batch_size must be positive");
        if (base_lr <= 0.0) throw ConfigError("base_lr must be positive");
    }
};

// One prompt with its discretized target. The trie is only populated when the
// consumer needs prefix targets (soft training, logit-KL evaluation); hard
// training samples straight from the output space.
struct TrainItem {
    DistributionSpec spec;
    std::vector<int> prompt;
    OutputSpace space;
    TokenTrie trie;
};

inline TrainItem make_train_item(const Vocabulary& vocab, const DistributionSpec& spec,
                                 int decimals, int max_bins, bool with_trie) {
    OutputSpace space = build_output_space(spec, decimals, max_bins);
    TokenTrie trie;
    if (with_trie) trie = build_trie(space, vocab);
    return TrainItem{spec, encode_prompt(vocab, spec), std::move(space), std::move(trie)};
}

inline std::vector<TrainItem> build_train_items(const Vocabulary& vocab,
                                                const std::vector<DistributionSpec>& specs,
                                                int decimals, int max_bins, bool with_trie) {
    std::vector<TrainItem> items;
    items.reserve(specs.size());
    for (const auto& spec : specs)
        items.push_back(make_train_item(vocab, spec, decimals, max_bins, with_trie));
    return items;
}

// Round-robin over families with each family's queue independently shuffled.
// The family cycle is shuffled once per call and held fixed across rounds, so
// equal-sized queues interleave exactly; successive epochs reshuffle by
// calling again with the advanced rng.
inline std::vector<int> family_balanced_order(const std::vector<Family>& families, Rng& rng) {
    std::vector<Family> seen;
    std::vector<std::vector<int>> queues;
    for (std::size_t i = 0; i < families.size(); ++i) {
        std::size_t f = 0;
        while (f < seen.size() && seen[f] != families[i]) ++f;
        if (f == seen.size()) {
            seen.push_back(families[i]);
            queues.emplace_back();
        }
        queues[f].push_back(static_cast<int>(i));
    }
    for (auto& q : queues) shuffle_in_place(q, rng);
    std::vector<std::size_t> cycle(queues.size());
    for (std::size_t f = 0; f < cycle.size(); ++f) cycle[f] = f;
    shuffle_in_place(cycle, rng);

    std::vector<int> order;
    order.reserve(families.size());
    for (std::size_t round = 0; order.size() < families.size(); ++round)
        for (std::size_t f : cycle)
            if (round < queues[f].size()) order.push_back(queues[f][round]);
    return order;
}

struct StepRecord {
    int step;
    int epoch;
    double loss;
    double lr;
};

struct TrainResult {
    std::vector<StepRecord> trace;
    int steps = 0;  // optimizer steps actually applied
    bool diverged = false;
};

// Per-epoch optimizer steps: ceil(N * R / batch). Soft training has R = 1.
inline int steps_per_epoch(int n_items, const TrainingConfig& cfg) {
    long long instances = static_cast<long long>(n_items) * cfg.samples_per_prompt;
    return static_cast<int>((instances + cfg.batch_size - 1) / cfg.batch_size);
}

inline int planned_steps(int n_items, const TrainingConfig& cfg) {
    return steps_per_epoch(n_items, cfg) * cfg.epochs;
}

// Optimizer whose cosine schedule spans exactly the planned step budget.
inline AdamW make_optimizer(const TrainingConfig& cfg, int n_items, std::size_t n_params) {
    OptimizerConfig oc;
    oc.base_lr = cfg.base_lr;
    oc.weight_decay = cfg.weight_decay;
    oc.warmup_frac = cfg.warmup_frac;
    oc.total_steps = std::max(1, planned_steps(n_items, cfg));
    return AdamW(oc, n_params);
}

using EpochCallback = std::function<void(int epoch, const Model& model, const AdamW& opt)>;

namespace detail {

// Shared epoch/batch driver. `reps` expands each item into that many epoch
// instances; `item_loss(item, rng, grad, weight)` computes one instance's
// loss and adds `weight` times its gradient into `grad`.
template <typename LossFn>
TrainResult run_training(Model& model, AdamW& opt, const std::vector<TrainItem>& items,
                         const TrainingConfig& cfg, int reps, LossFn&& item_loss,
                         const EpochCallback& on_epoch_end) {
    cfg.validate();
    if (items.empty()) throw ConfigError("training requires at least one item");
    for (const TrainItem& item : items) {
        if (item.space.decimals != cfg.decimals || item.space.max_bins != cfg.max_bins)
            throw ConfigError("item output space was built with different discretization settings");
    }

    Rng rng(derive_seed(cfg.seed, train_method_name(cfg.method)));
    std::vector<Family> instance_family;
    std::vector<int> instance_item;
    instance_family.reserve(items.size() * static_cast<std::size_t>(reps));
    for (std::size_t i = 0; i < items.size(); ++i)
        for (int r = 0; r < reps; ++r) {
            instance_family.push_back(items[i].spec.family());
            instance_item.push_back(static_cast<int>(i));
        }

    TrainResult result;
    std::vector<double> grad(model.param_count(), 0.0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = family_balanced_order(instance_family, rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            double weight = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t pos = start; pos < stop; ++pos) {
                const TrainItem& item =
                    items[static_cast<std::size_t>(instance_item[static_cast<std::size_t>(
                        order[pos])])];
                loss += weight * item_loss(item, rng, grad, weight);
            }
            result.trace.push_back({result.steps, epoch, loss, opt.schedule(opt.step_count())});
            if (!std::isfinite(loss)) {
                result.diverged = true;
                return result;
            }
            try {
                opt.step(model, grad);
            } catch (const TrainingDivergedError&) {
                result.diverged = true;
                return result;
            }
            ++result.steps;
        }
        if (on_epoch_end) on_epoch_end(epoch, model, opt);
    }
    return result;
}

}  // namespace detail

// Soft-target loop: each epoch reorders the prompts family-balanced, draws
// one path per prompt from its discretized law, and descends the trie KL.
inline TrainResult train_soft(Model& model, AdamW& opt, const std::vector<TrainItem>& items,
                              const Vocabulary& vocab, const TrainingConfig& cfg,
                              const EpochCallback& on_epoch_end = {}) {
    if (cfg.method != TrainMethod::soft)
        throw ConfigError("train_soft requires method = soft");
    for (const TrainItem& item : items)
        if (item.trie.node_count() == 0)
            throw ConfigError("soft training requires items built with tries");
    return detail::run_training(
        model, opt, items, cfg, 1,
        [&model, &vocab](const TrainItem& item, Rng& rng, std::vector<double>& grad,
                         double weight) {
            std::vector<int> path = tokenize_output(vocab, sample_canonical(item.space, rng));
            return soft_loss(model, item.prompt, item.trie, path, &grad, weight);
        },
        on_epoch_end);
}

// Hard-target loop: each epoch forms the R-fold prompt multiset, reorders it
// family-balanced, resamples every completion, and descends masked CE.
inline TrainResult train_hard(Model& model, AdamW& opt, const std::vector<TrainItem>& items,
                              const Vocabulary& vocab, const TrainingConfig& cfg,
                              const EpochCallback& on_epoch_end = {}) {
    if (cfg.method != TrainMethod::hard)
        throw ConfigError("train_hard requires method = hard");
    return detail::run_training(
        model, opt, items, cfg, cfg.samples_per_prompt,
        [&model, &vocab](const TrainItem& item, Rng& rng, std::vector<double>& grad,
                         double weight) {
            std::vector<int> completion =
                tokenize_output(vocab, sample_canonical(item.space, rng));
            return hard_loss(model, item.prompt, completion, &grad, weight);
        },
        on_epoch_end);
}

inline void append_loss_trace_csv(const std::string& path, const std::vector<StepRecord>& trace) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw ConfigError("cannot open loss trace file: " + path);
    out.seekp(0, std::ios::end);
    if (out.tellp() == 0) out << "step,epoch,loss,lr\n";
    char buf[128];
    for (const StepRecord& r : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", r.step, r.epoch, r.loss, r.lr);
        out << buf;
    }
    if (!out) throw ConfigError("failed writing loss trace file: " + path);
}

}  // namespace distcal
