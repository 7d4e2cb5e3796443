#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"
#include "distcal/random.hpp"

// Canonical output space construction: quantile-bounded decimal grids for
// continuous families and enumerated integer supports for discrete ones,
// with tail mass folded into the edge bins.

namespace distcal {

inline constexpr double kQuantileLo = 0.001;
inline constexpr double kQuantileHi = 0.999;

struct SpaceEntry {
    std::string canonical;
    double mass;
    double center;
};

struct OutputSpace {
    std::vector<SpaceEntry> entries;
    int decimals = 0;
    int max_bins = 0;
    double lower = 0.0;  // quantile interval after support intersection
    double upper = 0.0;
    bool is_discrete = false;
};

// Fixed-point rendering of idx * 10^-decimals with exactly `decimals`
// fractional digits; idx = 0 always renders without a sign.
inline std::string canonical_from_index(long long idx, int decimals) {
    unsigned long long mag =
        idx < 0 ? static_cast<unsigned long long>(-(idx + 1)) + 1ull
                : static_cast<unsigned long long>(idx);
    unsigned long long pow10 = 1;
    for (int i = 0; i < decimals; ++i) pow10 *= 10ull;
    std::string out;
    if (idx < 0) out += '-';
    out += std::to_string(mag / pow10);
    if (decimals > 0) {
        std::string frac = std::to_string(mag % pow10);
        out += '.';
        out.append(static_cast<std::size_t>(decimals) - frac.size(), '0');
        out += frac;
    }
    return out;
}

// Nearest grid value rendered canonically; negative zero collapses to zero.
inline std::string canonical_value(double x, int decimals) {
    double scale = std::pow(10.0, decimals);
    return canonical_from_index(std::llround(x * scale), decimals);
}

namespace detail {

// Smallest grid index >= x, snapping values a hair above an integer back down
// so quantiles like 0.001 * 1e5 = 100.00000000000001 land on the grid.
inline long long grid_ceil(double x) {
    double tol = 1e-9 + 1e-12 * std::fabs(x);
    return static_cast<long long>(std::ceil(x - tol));
}

inline long long grid_floor(double x) {
    double tol = 1e-9 + 1e-12 * std::fabs(x);
    return static_cast<long long>(std::floor(x + tol));
}

}  // namespace detail

inline OutputSpace build_output_space(const DistributionSpec& spec, int decimals, int max_bins) {
    if (decimals < 0 || decimals > 6) throw ConfigError("decimals must lie in [0, 6]");
    if (max_bins < 2) throw ConfigError("max_bins must be at least 2");

    SupportInfo sup = support(spec);
    OutputSpace space;
    space.decimals = decimals;
    space.max_bins = max_bins;
    space.is_discrete = sup.discrete;

    if (sup.discrete) {
        long long lo, hi;
        if (std::isfinite(sup.lower) && std::isfinite(sup.upper)) {
            lo = static_cast<long long>(sup.lower);
            hi = static_cast<long long>(sup.upper);
        } else {
            lo = static_cast<long long>(ppf(spec, kQuantileLo));
            hi = static_cast<long long>(ppf(spec, kQuantileHi));
        }
        if (hi - lo + 1 > max_bins) hi = lo + max_bins - 1;
        space.lower = static_cast<double>(lo);
        space.upper = static_cast<double>(hi);
        for (long long k = lo; k <= hi; ++k) {
            double v = static_cast<double>(k);
            double mass;
            if (lo == hi) {
                mass = 1.0;
            } else if (k == lo) {
                mass = cdf(spec, v);  // includes any mass below the first value
            } else if (k == hi) {
                mass = 1.0 - cdf(spec, v - 1.0);  // includes the upper tail
            } else {
                mass = density(spec, v);
            }
            space.entries.push_back({std::to_string(k), std::max(mass, 0.0), v});
        }
        return space;
    }

    double l = std::max(ppf(spec, kQuantileLo), sup.lower);
    double r = std::min(ppf(spec, kQuantileHi), sup.upper);
    if (!(l < r)) throw DegenerateTargetError("quantile interval is empty after support intersection");
    space.lower = l;
    space.upper = r;

    double scale = std::pow(10.0, decimals);
    long long first = detail::grid_ceil(l * scale);
    long long last = detail::grid_floor(r * scale);
    if (first > last)
        throw DegenerateTargetError("no grid point inside the quantile interval");

    long long grid_points = last - first + 1;
    int bins = grid_points < max_bins ? static_cast<int>(grid_points) : max_bins;

    std::vector<long long> idx(static_cast<std::size_t>(bins));
    if (grid_points == bins) {
        for (int j = 0; j < bins; ++j) idx[static_cast<std::size_t>(j)] = first + j;
    } else {
        // Evenly spaced retained indices including both endpoints. The
        // products stay far below 2^53, keeping the rounding exact.
        for (int j = 0; j < bins; ++j)
            idx[static_cast<std::size_t>(j)] =
                first + std::llround(static_cast<double>(j) *
                                     static_cast<double>(grid_points - 1) /
                                     static_cast<double>(bins - 1));
    }

    if (bins == 1) {
        double c = static_cast<double>(idx[0]) / scale;
        space.entries.push_back({canonical_from_index(idx[0], decimals), 1.0, c});
        return space;
    }

    std::vector<double> boundary(static_cast<std::size_t>(bins) - 1);
    for (int j = 0; j + 1 < bins; ++j)
        boundary[static_cast<std::size_t>(j)] =
            0.5 * static_cast<double>(idx[static_cast<std::size_t>(j)] +
                                      idx[static_cast<std::size_t>(j) + 1]) /
            scale;

    double prev_cdf = 0.0;
    for (int j = 0; j < bins; ++j) {
        double upper_cdf = j + 1 < bins ? cdf(spec, boundary[static_cast<std::size_t>(j)]) : 1.0;
        double mass = std::max(upper_cdf - prev_cdf, 0.0);
        prev_cdf = upper_cdf;
        double c = static_cast<double>(idx[static_cast<std::size_t>(j)]) / scale;
        space.entries.push_back({canonical_from_index(idx[static_cast<std::size_t>(j)], decimals),
                                 mass, c});
    }
    return space;
}

// Inverse-CDF draw over the cumulative mass array.
inline const std::string& sample_canonical(const OutputSpace& space, UniformSource& rng) {
    double u = rng.next();
    if (u <= 0.0) u = 0x1.0p-53;
    double total = 0.0;
    for (const auto& e : space.entries) total += e.mass;
    double target = u * total;
    double cum = 0.0;
    for (const auto& e : space.entries) {
        cum += e.mass;
        if (cum >= target) return e.canonical;
    }
    return space.entries.back().canonical;
}

// Structured text form consumed by golden-file tests; %.17g keeps doubles
// round-trippable.
inline std::string serialize_output_space(const OutputSpace& space) {
    char buf[96];
    std::string out = "output_space v1\n";
    std::snprintf(buf, sizeof(buf), "decimals %d\nmax_bins %d\ndiscrete %d\n", space.decimals,
                  space.max_bins, space.is_discrete ? 1 : 0);
    out += buf;
    std::snprintf(buf, sizeof(buf), "bounds %.17g %.17g\n", space.lower, space.upper);
    out += buf;
    std::snprintf(buf, sizeof(buf), "entries %zu\n", space.entries.size());
    out += buf;
    for (const auto& e : space.entries) {
        std::snprintf(buf, sizeof(buf), " %.17g %.17g\n", e.mass, e.center);
        out += e.canonical;
        out += buf;
    }
    return out;
}

}  // namespace distcal
