#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"

namespace distcal {

// Whole-string finite decimal or scientific-notation literal; anything else
// (surrounding words, hex, inf/nan, overflow) is empty. Leading/trailing
// whitespace is ignored.
inline std::optional<double> parse_numeric(const std::string& text) {
    std::size_t lo = 0;
    std::size_t hi = text.size();
    auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    };
    while (lo < hi && is_space(text[lo])) ++lo;
    while (hi > lo && is_space(text[hi - 1])) --hi;
    if (lo == hi) return std::nullopt;
    if (text[lo] == '+') ++lo;  // from_chars rejects an explicit plus
    if (lo == hi) return std::nullopt;

    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data() + lo, text.data() + hi, value);
    if (ec != std::errc() || end != text.data() + hi) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

// Mean absolute deviation between the sorted samples and the target quantiles
// at levels (i - 0.5) / N.
inline double wasserstein_w1(const std::vector<double>& samples, const DistributionSpec& spec) {
    if (samples.empty()) throw EvaluationError("wasserstein_w1 requires at least one sample");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double total = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        total += std::fabs(sorted[i] - ppf(spec, (static_cast<double>(i) + 0.5) / n));
    return total / n;
}

// Raw W1 divided by the target's central-90% width; empty when the width is
// degenerate (point-mass within the quantile band).
inline std::optional<double> normalized_w1(double w1, const DistributionSpec& spec) {
    double width = ppf(spec, 0.95) - ppf(spec, 0.05);
    if (!(width > 0.0)) return std::nullopt;
    return w1 / width;
}

// Fraction of generations that parse and land within the raw support bounds.
inline double valid_rate(const std::vector<std::string>& generations,
                         const DistributionSpec& spec) {
    if (generations.empty()) return 0.0;
    SupportInfo sup = support(spec);
    int valid = 0;
    for (const std::string& text : generations) {
        std::optional<double> value = parse_numeric(text);
        if (value && *value >= sup.lower && *value <= sup.upper) ++valid;
    }
    return static_cast<double>(valid) / static_cast<double>(generations.size());
}

// Total variation distance between empirical frequencies and uniform over the
// K positions.
inline double tv_uniform(const std::vector<long long>& counts) {
    if (counts.empty()) throw EvaluationError("tv_uniform requires at least one position");
    long long total = 0;
    for (long long c : counts) {
        if (c < 0) throw EvaluationError("tv_uniform requires nonnegative counts");
        total += c;
    }
    if (total == 0) throw EvaluationError("tv_uniform requires at least one observation");
    const double k = static_cast<double>(counts.size());
    double tv = 0.0;
    for (long long c : counts)
        tv += std::fabs(static_cast<double>(c) / static_cast<double>(total) - 1.0 / k);
    return 0.5 * tv;
}

// Minimal number of highest-probability tokens covering `threshold` mass;
// ties broken by ascending token id.
inline int support_size_top_mass(const std::vector<double>& probs, double threshold = 0.9) {
    if (probs.empty()) throw EvaluationError("support_size_top_mass requires a distribution");
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw EvaluationError("support_size_top_mass requires probabilities");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
        throw EvaluationError("support_size_top_mass requires mass summing to 1");

    std::vector<int> ids(probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    });
    double cum = 0.0;
    int count = 0;
    for (int id : ids) {
        cum += probs[static_cast<std::size_t>(id)];
        ++count;
        if (cum >= threshold - 1e-9) return count;
    }
    return count;
}

// Distinct fraction after trimming whitespace and ASCII case-folding.
inline double unique_fraction(const std::vector<std::string>& samples) {
    if (samples.empty()) throw EvaluationError("unique_fraction requires at least one sample");
    std::set<std::string> distinct;
    for (const std::string& s : samples) {
        std::size_t lo = 0;
        std::size_t hi = s.size();
        while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
        while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
        std::string norm;
        norm.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i)
            norm += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
        distinct.insert(std::move(norm));
    }
    return static_cast<double>(distinct.size()) / static_cast<double>(samples.size());
}

}  // namespace distcal
