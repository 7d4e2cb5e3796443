#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"
#include "distcal/metrics.hpp"
#include "distcal/model.hpp"
#include "distcal/output_space.hpp"
#include "distcal/random.hpp"
#include "distcal/token_trie.hpp"
#include "distcal/vocabulary.hpp"

namespace distcal {

struct Generation {
    std::string text;
    bool complete;  // EOS reached within the token budget
};

namespace detail {

inline int sample_token(const std::vector<double>& probs, UniformSource& rng) {
    double u = rng.next();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

inline int argmax_token(const std::vector<double>& probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

// Runs one completion; control tokens render as '?' so malformed generations
// stay representable and fail numeric parsing instead of crashing.
template <typename PickFn>
Generation run_completion(const NextTokenModel& model, const Vocabulary& vocab,
                          const std::vector<int>& prompt, int max_tokens, PickFn&& pick) {
    std::unique_ptr<TokenStream> stream = model.stream();
    std::vector<double> probs;
    for (int t : prompt) probs = stream->feed(t);
    Generation gen{"", false};
    for (int i = 0; i < max_tokens; ++i) {
        int tok = pick(probs);
        if (tok == Vocabulary::kEos) {
            gen.complete = true;
            return gen;
        }
        gen.text += vocab.is_char(tok) ? vocab.id_char(tok) : '?';
        probs = stream->feed(tok);
    }
    return gen;
}

}  // namespace detail

// Ancestral sampling at the model's own temperature: full softmax, no
// top-p/top-k truncation, independent completions.
inline std::vector<Generation> sample_from_model(const NextTokenModel& model,
                                                 const Vocabulary& vocab,
                                                 const std::vector<int>& prompt, int n,
                                                 UniformSource& rng, int max_tokens = 16) {
    if (n < 1) throw ConfigError("sample_from_model requires n >= 1");
    std::vector<Generation> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(detail::run_completion(
            model, vocab, prompt, max_tokens,
            [&rng](const std::vector<double>& p) { return detail::sample_token(p, rng); }));
    return out;
}

inline Generation greedy_completion(const NextTokenModel& model, const Vocabulary& vocab,
                                    const std::vector<int>& prompt, int max_tokens = 16) {
    return detail::run_completion(
        model, vocab, prompt, max_tokens,
        [](const std::vector<double>& p) { return detail::argmax_token(p); });
}

// Mean over Monte Carlo paths (y ~ P_Y from the evaluation space) of the
// per-path mean-over-prefixes KL(q || pi). The evaluation trie is always the
// shared high-resolution one, independent of how the model was trained.
inline double logit_kl(const NextTokenModel& model, const Vocabulary& vocab,
                       const std::vector<int>& prompt, const OutputSpace& eval_space,
                       const TokenTrie& eval_trie, int n_paths, UniformSource& rng) {
    if (n_paths < 1) throw ConfigError("logit_kl requires n_paths >= 1");
    double total = 0.0;
    for (int i = 0; i < n_paths; ++i) {
        std::vector<int> path = tokenize_output(vocab, sample_canonical(eval_space, rng));
        total += soft_loss_value(model, prompt, eval_trie, path);
    }
    return total / static_cast<double>(n_paths);
}

struct PromptEvalSettings {
    int samples_per_prompt = 1000;
    int n_paths = 4;
    int eval_decimals = 5;
    int eval_max_bins = 16384;
    int max_tokens = 16;
    double top_mass_threshold = 0.9;
    std::uint64_t seed = 0;
    int workers = 1;

    void validate() const {
        if (samples_per_prompt < 1) throw ConfigError("samples_per_prompt must be positive");
        if (n_paths < 1) throw ConfigError("n_paths must be positive");
        if (eval_decimals < 0 || eval_decimals > 6)
            throw ConfigError("eval_decimals must be in [0, 6]");
        if (eval_max_bins < 2) throw ConfigError("eval_max_bins must be at least 2");
        if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
        if (workers < 1) throw ConfigError("workers must be positive");
    }
};

struct EvalPrompt {
    std::string id;
    DistributionSpec spec;
};

struct PromptRecord {
    std::string id;
    Family family;
    int n_samples;
    double valid_rate;
    std::optional<double> w1_raw;   // absent when no sample is valid
    std::optional<double> w1_norm;  // additionally absent for degenerate targets
    double logit_kl;
    double unique_frac;
    int top_mass_support;  // first-token tokens covering the mass threshold
};

// Evaluates one prompt with metric-specific rng streams derived from the
// prompt id, so results are independent of evaluation order and worker count.
inline PromptRecord evaluate_prompt(const NextTokenModel& model, const Vocabulary& vocab,
                                    const EvalPrompt& prompt, const PromptEvalSettings& settings) {
    settings.validate();
    std::vector<int> tokens = encode_prompt(vocab, prompt.spec);
    OutputSpace eval_space =
        build_output_space(prompt.spec, settings.eval_decimals, settings.eval_max_bins);
    TokenTrie eval_trie = build_trie(eval_space, vocab);

    PromptRecord rec{prompt.id,
                     prompt.spec.family(),
                     settings.samples_per_prompt,
                     0.0,
                     std::nullopt,
                     std::nullopt,
                     0.0,
                     0.0,
                     0};

    Rng kl_rng(derive_seed(settings.seed, prompt.id + "/kl"));
    rec.logit_kl = logit_kl(model, vocab, tokens, eval_space, eval_trie, settings.n_paths, kl_rng);

    Rng gen_rng(derive_seed(settings.seed, prompt.id + "/gen"));
    std::vector<Generation> gens = sample_from_model(model, vocab, tokens,
                                                     settings.samples_per_prompt, gen_rng,
                                                     settings.max_tokens);
    SupportInfo sup = support(prompt.spec);
    std::vector<double> valid_values;
    std::vector<std::string> texts;
    texts.reserve(gens.size());
    int valid = 0;
    for (const Generation& g : gens) {
        texts.push_back(g.text);
        if (!g.complete) continue;
        std::optional<double> value = parse_numeric(g.text);
        if (value && *value >= sup.lower && *value <= sup.upper) {
            ++valid;
            valid_values.push_back(*value);
        }
    }
    rec.valid_rate = static_cast<double>(valid) / static_cast<double>(gens.size());
    if (!valid_values.empty()) {
        rec.w1_raw = wasserstein_w1(valid_values, prompt.spec);
        rec.w1_norm = normalized_w1(*rec.w1_raw, prompt.spec);
    }
    rec.unique_frac = unique_fraction(texts);

    std::unique_ptr<TokenStream> stream = model.stream();
    std::vector<double> first_probs;
    for (int t : tokens) first_probs = stream->feed(t);
    rec.top_mass_support = support_size_top_mass(first_probs, settings.top_mass_threshold);
    return rec;
}

inline std::vector<PromptRecord> evaluate_prompts(const NextTokenModel& model,
                                                  const Vocabulary& vocab,
                                                  const std::vector<EvalPrompt>& prompts,
                                                  const PromptEvalSettings& settings) {
    settings.validate();
    std::vector<PromptRecord> records;
    records.reserve(prompts.size());
    if (settings.workers == 1 || prompts.size() < 2) {
        for (const EvalPrompt& p : prompts)
            records.push_back(evaluate_prompt(model, vocab, p, settings));
        return records;
    }

    // Per-prompt evaluations are pure; workers claim strided slots.
    std::vector<std::optional<PromptRecord>> slots(prompts.size());
    std::vector<std::thread> pool;
    int workers = std::min<int>(settings.workers, static_cast<int>(prompts.size()));
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < prompts.size();
                     i += static_cast<std::size_t>(workers))
                    slots[i] = evaluate_prompt(model, vocab, prompts[i], settings);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    for (std::optional<PromptRecord>& slot : slots) records.push_back(std::move(*slot));
    return records;
}

struct FamilyAggregate {
    Family family;
    int n_prompts;
    double mean_valid_rate;
    double mean_logit_kl;
    std::optional<double> mean_w1_norm;  // over finite per-prompt estimates
    int n_finite_w1;
};

struct EvalReport {
    std::vector<PromptRecord> prompts;
    std::vector<FamilyAggregate> families;
    std::optional<double> median_w1_norm;  // defined only when every family has one
    double median_valid_rate = 0.0;
    double median_logit_kl = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

// Family means over finite normalized W1, then the cross-family median; the
// median is undefined whenever any family lacks a finite estimate.
inline EvalReport aggregate(const std::vector<PromptRecord>& records) {
    if (records.empty()) throw EvaluationError("aggregate requires at least one record");
    EvalReport report;
    report.prompts = records;

    std::vector<Family> order;
    for (const PromptRecord& r : records)
        if (std::find(order.begin(), order.end(), r.family) == order.end())
            order.push_back(r.family);

    std::vector<double> family_w1;
    std::vector<double> family_valid;
    std::vector<double> family_kl;
    bool all_defined = true;
    for (Family f : order) {
        FamilyAggregate agg{f, 0, 0.0, 0.0, std::nullopt, 0};
        double w1_sum = 0.0;
        for (const PromptRecord& r : records) {
            if (r.family != f) continue;
            ++agg.n_prompts;
            agg.mean_valid_rate += r.valid_rate;
            agg.mean_logit_kl += r.logit_kl;
            if (r.w1_norm && std::isfinite(*r.w1_norm)) {
                ++agg.n_finite_w1;
                w1_sum += *r.w1_norm;
            }
        }
        agg.mean_valid_rate /= agg.n_prompts;
        agg.mean_logit_kl /= agg.n_prompts;
        if (agg.n_finite_w1 > 0) agg.mean_w1_norm = w1_sum / agg.n_finite_w1;
        family_valid.push_back(agg.mean_valid_rate);
        family_kl.push_back(agg.mean_logit_kl);
        if (agg.mean_w1_norm)
            family_w1.push_back(*agg.mean_w1_norm);
        else
            all_defined = false;
        report.families.push_back(agg);
    }

    if (all_defined) report.median_w1_norm = detail::median_of(family_w1);
    report.median_valid_rate = detail::median_of(family_valid);
    report.median_logit_kl = detail::median_of(family_kl);
    return report;
}

}  // namespace distcal
