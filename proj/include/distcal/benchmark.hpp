#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"

namespace distcal {

enum class Split { train, unseen_param_test, ood_test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::unseen_param_test: return "unseen-param-test";
        case Split::ood_test: return "ood-test";
    }
    return "?";
}

inline Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "unseen-param-test") return Split::unseen_param_test;
    if (name == "ood-test") return Split::ood_test;
    throw ConfigError("unknown split: " + name);
}

struct PromptConfig {
    std::string id;
    Family family;
    DistributionSpec spec;
    Split split;
    std::string prompt_text;
};

namespace detail {

inline std::string short_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string param_pairs(const DistributionSpec& spec) {
    const FamilyInfo& info = spec.info();
    std::string out;
    for (int i = 0; i < info.n_params; ++i) {
        if (i) out += ", ";
        out += std::string(info.params[static_cast<std::size_t>(i)]) + "=" +
               short_value(spec.param(i));
    }
    return out;
}

// One axis of a family's training region: either a value list taken verbatim
// from the benchmark table or a continuous range to be discretized.
struct ParamAxis {
    bool continuous;
    double lo;
    double hi;
    std::vector<double> values;

    static ParamAxis range(double lo, double hi) { return {true, lo, hi, {}}; }
    static ParamAxis list(std::vector<double> v) { return {false, 0.0, 0.0, std::move(v)}; }

    std::vector<double> materialize(int resolution) const {
        if (!continuous) return values;
        if (resolution < 1) throw ConfigError("grid resolution must be positive");
        if (resolution == 1) return {0.5 * (lo + hi)};
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(resolution));
        for (int j = 0; j < resolution; ++j)
            out.push_back(lo + (hi - lo) * static_cast<double>(j) /
                                   static_cast<double>(resolution - 1));
        return out;
    }
};

inline const std::vector<double>& binom_p_set() {
    static const std::vector<double> p = {0.2, 0.25, 0.3, 0.35, 0.4, 0.5,
                                          0.6, 0.65, 0.7, 0.75, 0.8};
    return p;
}

inline std::vector<ParamAxis> train_axes(Family family) {
    switch (family) {
        case Family::uniform:
            return {ParamAxis::range(-5.0, 2.0), ParamAxis::range(1.0, 5.0)};
        case Family::norm:
            return {ParamAxis::range(-2.0, 2.0), ParamAxis::range(0.5, 2.0)};
        case Family::beta:
            return {ParamAxis::range(0.5, 5.0), ParamAxis::range(0.5, 5.0)};
        case Family::binom:
            return {ParamAxis::list({5, 10, 15, 20}), ParamAxis::list(binom_p_set())};
        case Family::expon:
            return {ParamAxis::range(0.5, 5.0)};
        case Family::geom:
            return {ParamAxis::list(
                {0.2, 0.225, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.65, 0.7, 0.75, 0.775, 0.8})};
        case Family::nbinom:
            return {ParamAxis::list({3, 5, 8, 12}), ParamAxis::list(binom_p_set())};
        case Family::lognorm:
            return {ParamAxis::range(-1.0, 1.5), ParamAxis::range(0.25, 1.25)};
        case Family::triang:
            return {ParamAxis::range(-3.0, 1.0), ParamAxis::range(1.0, 5.0),
                    ParamAxis::list({0.1, 0.3, 0.5, 0.7, 0.9})};
        case Family::rayleigh:
            return {ParamAxis::range(0.5, 2.0)};
        case Family::cauchy:
            return {ParamAxis::range(-2.0, 2.0), ParamAxis::range(0.5, 2.0)};
        case Family::t:
            return {ParamAxis::list({2.5, 2.75, 3, 3.5, 4, 4.5, 5, 6, 7, 8, 9, 10})};
        case Family::chi2:
            return {ParamAxis::list({2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 18, 20})};
        case Family::f:
            return {ParamAxis::list({3, 5, 7, 10}), ParamAxis::list({5, 10, 15, 20})};
        case Family::gamma:
            return {ParamAxis::range(1.0, 5.0), ParamAxis::range(1.0, 5.0)};
        case Family::laplace:
            return {ParamAxis::range(-2.0, 2.0), ParamAxis::range(0.5, 2.0)};
        case Family::logistic:
            return {ParamAxis::range(-2.0, 2.0), ParamAxis::range(0.5, 2.0)};
        case Family::pareto:
            return {ParamAxis::list({2, 2.25, 2.5, 2.75, 3, 3.5, 4, 4.5, 5}),
                    ParamAxis::range(0.5, 2.0)};
        case Family::hypergeom:
            // Handled separately: K derives from the K/M ratio per M.
            return {};
        case Family::gumbel_r:
            return {ParamAxis::range(-2.0, 2.0), ParamAxis::range(0.5, 2.0)};
        case Family::skellam:
            return {ParamAxis::range(1.0, 8.0), ParamAxis::range(1.0, 8.0)};
        case Family::betabinom:
            return {ParamAxis::list({10, 20, 30}), ParamAxis::range(0.5, 5.0),
                    ParamAxis::range(0.5, 5.0)};
        case Family::lomax:
            return {ParamAxis::range(1.5, 4.0), ParamAxis::range(0.5, 3.0)};
        case Family::invgauss:
            return {ParamAxis::range(0.5, 3.0), ParamAxis::range(0.5, 5.0)};
        default:
            throw ConfigError("family has no training region: " +
                              std::string(family_info(family).name));
    }
}

inline std::vector<std::vector<double>> hypergeom_train_tuples() {
    std::vector<std::vector<double>> out;
    for (double m : {30.0, 50.0, 80.0})
        for (double n : {5.0, 10.0, 15.0})
            for (double ratio : {0.2, 0.35, 0.5, 0.65, 0.8})
                out.push_back({m, n, static_cast<double>(std::llround(ratio * m))});
    return out;
}

// Paper-selected evaluation settings per family (the benchmark's Test column).
inline std::vector<std::vector<double>> test_tuples(Family family) {
    switch (family) {
        case Family::uniform: return {{3.5, 7}};
        case Family::norm: return {{3.5, 3}};
        case Family::bernoulli: return {{0.1}, {0.5}, {0.9}};
        case Family::beta: return {{7, 7}};
        case Family::binom: return {{25, 0.5}};
        case Family::expon: return {{7}};
        case Family::geom: return {{0.125}};
        case Family::nbinom: return {{15, 0.15}};
        case Family::lognorm: return {{2.5, 2}};
        case Family::triang: return {{2.5, 7, 0.5}};
        case Family::rayleigh: return {{3}};
        case Family::poisson: return {{1}, {4}, {12}};
        case Family::maxwell: return {{0.75}, {1.5}, {2.5}};
        case Family::cauchy: return {{3.5, 3}};
        case Family::t: return {{16}};
        case Family::chi: return {{2}, {5}, {10}};
        case Family::chi2: return {{32}};
        case Family::f: return {{12, 24}};
        case Family::gamma: return {{7, 7}};
        case Family::weibull_min: return {{0.5, 0.5}, {1.5, 1.5}, {3, 3}};
        case Family::truncnorm: return {{0, 1, -1, 1}, {0, 1, -2, 2}, {1, 1.5, -1, 2}};
        case Family::laplace: return {{3.5, 3}};
        case Family::logistic: return {{3.5, 3}};
        case Family::pareto: return {{6.5, 3.5}};
        case Family::hypergeom: return {{100, 20, 50}};
        case Family::gumbel_r: return {{3.5, 3}};
        case Family::skellam: return {{10.5, 10.5}};
        case Family::betabinom: return {{40, 6.5, 6.5}};
        case Family::lomax: return {{6, 4.5}};
        case Family::invgauss: return {{5, 7}};
    }
    throw ConfigError("unknown family in test table");
}

inline void cartesian(const std::vector<std::vector<double>>& axes, std::vector<double>& current,
                      std::size_t depth, std::vector<std::vector<double>>& out) {
    if (depth == axes.size()) {
        out.push_back(current);
        return;
    }
    for (double v : axes[depth]) {
        current.push_back(v);
        cartesian(axes, current, depth + 1, out);
        current.pop_back();
    }
}

}  // namespace detail

// Exact benchmark prompt template; the transformer consumes encode_prompt,
// this text is kept for report readability.
inline std::string render_prompt(const DistributionSpec& spec) {
    return "Generate exactly ONE random number from a " +
           std::string(spec.info().display_name) + " distribution with parameters " +
           detail::param_pairs(spec) + ". Output ONLY the number.";
}

inline std::string config_id(Split split, const DistributionSpec& spec) {
    return std::string(split_name(split)) + "/" + std::string(spec.info().name) + "(" +
           detail::param_pairs(spec) + ")";
}

inline PromptConfig make_prompt_config(Split split, const DistributionSpec& spec) {
    return PromptConfig{config_id(split, spec), spec.family(), spec, split, render_prompt(spec)};
}

// Deterministic Table 3 enumeration. Continuous axes get `resolution` evenly
// spaced points (endpoints included); listed sets are verbatim; per-family
// overrides take precedence. `families` filters by scipy name when non-empty.
inline std::vector<PromptConfig> generate_benchmark(
    int resolution, const std::map<std::string, int>& family_resolution = {},
    const std::vector<std::string>& families = {}) {
    if (resolution < 1) throw ConfigError("grid resolution must be positive");
    for (const auto& [name, res] : family_resolution) {
        family_from_name(name);
        if (res < 1) throw ConfigError("grid resolution must be positive: " + name);
    }
    std::vector<bool> keep(static_cast<std::size_t>(kFamilyCount), families.empty());
    for (const std::string& name : families)
        keep[static_cast<std::size_t>(family_from_name(name))] = true;

    std::vector<PromptConfig> out;
    for (const FamilyInfo& info : family_table()) {
        if (!keep[static_cast<std::size_t>(info.family)]) continue;
        if (!info.ood) {
            int res = resolution;
            auto it = family_resolution.find(std::string(info.name));
            if (it != family_resolution.end()) res = it->second;

            std::vector<std::vector<double>> tuples;
            if (info.family == Family::hypergeom) {
                tuples = detail::hypergeom_train_tuples();
            } else {
                std::vector<std::vector<double>> axes;
                for (const detail::ParamAxis& axis : detail::train_axes(info.family))
                    axes.push_back(axis.materialize(res));
                std::vector<double> current;
                detail::cartesian(axes, current, 0, tuples);
            }
            for (const std::vector<double>& params : tuples)
                out.push_back(
                    make_prompt_config(Split::train, DistributionSpec(info.family, params)));
        }
        Split test_split = info.ood ? Split::ood_test : Split::unseen_param_test;
        for (const std::vector<double>& params : detail::test_tuples(info.family))
            out.push_back(make_prompt_config(test_split, DistributionSpec(info.family, params)));
    }
    return out;
}

inline std::vector<PromptConfig> configs_in_split(const std::vector<PromptConfig>& configs,
                                                  Split split) {
    std::vector<PromptConfig> out;
    for (const PromptConfig& c : configs)
        if (c.split == split) out.push_back(c);
    return out;
}

}  // namespace distcal
