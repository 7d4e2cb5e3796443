#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "distcal/errors.hpp"
#include "distcal/random.hpp"
#include "distcal/special_functions.hpp"

// The 30 benchmark distribution families: density/mass, CDF, quantile, exact
// inverse-transform sampling, and support metadata. Families follow the
// scipy.stats parameterizations except where noted on FamilyInfo.

namespace distcal {

enum class Family : int {
    uniform,
    norm,
    bernoulli,
    beta,
    binom,
    expon,
    geom,
    nbinom,
    lognorm,
    triang,
    rayleigh,
    poisson,
    maxwell,
    cauchy,
    t,
    chi,
    chi2,
    f,
    gamma,
    weibull_min,
    truncnorm,
    laplace,
    logistic,
    pareto,
    hypergeom,
    gumbel_r,
    skellam,
    betabinom,
    lomax,
    invgauss,
};

inline constexpr int kFamilyCount = 30;

struct FamilyInfo {
    Family family;
    std::string_view name;          // scipy name, used in configs and reports
    std::string_view display_name;  // used in rendered prompt text
    bool discrete;
    bool ood;  // held out of training, evaluated only at test time
    std::array<std::string_view, 4> params;
    int n_params;
};

// Parameter conventions that scipy leaves to loc/scale plumbing:
//   uniform   (a, w)        support [a, a+w]
//   expon     lambda        rate, cdf = 1 - exp(-lambda x)
//   gamma     (alpha, beta) beta is a rate, pdf ~ x^(alpha-1) exp(-beta x)
//   lomax     (alpha, lambda) lambda is the scale, cdf = 1 - (1 + x/lambda)^-alpha
//   triang    (a, w, f_mode) support [a, a+w], mode at a + f_mode*w
//   truncnorm (mu, sigma, a, b) with raw (unstandardized) bounds a < b
//   hypergeom (M, N, K)     M population, N draws, K tagged members
//   invgauss  (mu, lambda)  Wald parameterization
inline const std::array<FamilyInfo, kFamilyCount>& family_table() {
    static const std::array<FamilyInfo, kFamilyCount> table = {{
        {Family::uniform, "uniform", "Uniform", false, false, {"a", "w"}, 2},
        {Family::norm, "norm", "Gaussian", false, false, {"mu", "sigma"}, 2},
        {Family::bernoulli, "bernoulli", "Bernoulli", true, true, {"p"}, 1},
        {Family::beta, "beta", "Beta", false, false, {"alpha", "beta"}, 2},
        {Family::binom, "binom", "Binomial", true, false, {"n", "p"}, 2},
        {Family::expon, "expon", "Exponential", false, false, {"lambda"}, 1},
        {Family::geom, "geom", "Geometric", true, false, {"p"}, 1},
        {Family::nbinom, "nbinom", "Negative Binomial", true, false, {"r", "p"}, 2},
        {Family::lognorm, "lognorm", "LogNormal", false, false, {"mu", "sigma"}, 2},
        {Family::triang, "triang", "Triangular", false, false, {"a", "w", "f_mode"}, 3},
        {Family::rayleigh, "rayleigh", "Rayleigh", false, false, {"sigma"}, 1},
        {Family::poisson, "poisson", "Poisson", true, true, {"lambda"}, 1},
        {Family::maxwell, "maxwell", "Maxwell", false, true, {"sigma"}, 1},
        {Family::cauchy, "cauchy", "Cauchy", false, false, {"x0", "gamma"}, 2},
        {Family::t, "t", "Student's t", false, false, {"nu"}, 1},
        {Family::chi, "chi", "Chi", false, true, {"nu"}, 1},
        {Family::chi2, "chi2", "Chi-Square", false, false, {"nu"}, 1},
        {Family::f, "f", "F-Distribution", false, false, {"d1", "d2"}, 2},
        {Family::gamma, "gamma", "Gamma", false, false, {"alpha", "beta"}, 2},
        {Family::weibull_min, "weibull_min", "Weibull", false, true, {"k", "lambda"}, 2},
        {Family::truncnorm, "truncnorm", "TruncNorm", false, true, {"mu", "sigma", "a", "b"}, 4},
        {Family::laplace, "laplace", "Laplace", false, false, {"mu", "b"}, 2},
        {Family::logistic, "logistic", "Logistic", false, false, {"mu", "s"}, 2},
        {Family::pareto, "pareto", "Pareto", false, false, {"alpha", "x_m"}, 2},
        {Family::hypergeom, "hypergeom", "Hypergeometric", true, false, {"M", "N", "K"}, 3},
        {Family::gumbel_r, "gumbel_r", "Gumbel", false, false, {"mu", "beta"}, 2},
        {Family::skellam, "skellam", "Skellam", true, false, {"mu1", "mu2"}, 2},
        {Family::betabinom, "betabinom", "Beta-Binomial", true, false, {"n", "alpha", "beta"}, 3},
        {Family::lomax, "lomax", "Lomax", false, false, {"alpha", "lambda"}, 2},
        {Family::invgauss, "invgauss", "Inverse Gaussian", false, false, {"mu", "lambda"}, 2},
    }};
    return table;
}

inline const FamilyInfo& family_info(Family f) {
    return family_table()[static_cast<std::size_t>(f)];
}

inline Family family_from_name(std::string_view name) {
    for (const auto& info : family_table()) {
        if (info.name == name) return info.family;
    }
    throw ConfigError("unknown distribution family: " + std::string(name));
}

struct SupportInfo {
    double lower;
    double upper;
    bool discrete;  // integer-valued support
};

namespace detail {

inline bool is_integer_valued(double v) {
    return std::isfinite(v) && std::floor(v) == v && std::fabs(v) < 1e15;
}

}  // namespace detail

class DistributionSpec {
  public:
    DistributionSpec(Family family, const std::map<std::string, double>& params)
        : family_(family) {
        const auto& info = family_info(family);
        if (static_cast<int>(params.size()) != info.n_params)
            throw ParameterDomainError(std::string(info.name) + ": expected " +
                                       std::to_string(info.n_params) + " parameters, got " +
                                       std::to_string(params.size()));
        for (int i = 0; i < info.n_params; ++i) {
            auto it = params.find(std::string(info.params[i]));
            if (it == params.end())
                throw ParameterDomainError(std::string(info.name) + ": missing parameter " +
                                           std::string(info.params[i]));
            p_[i] = it->second;
        }
        validate();
    }

    // Values given in the family's canonical parameter order.
    DistributionSpec(Family family, const std::vector<double>& values) : family_(family) {
        const auto& info = family_info(family);
        if (static_cast<int>(values.size()) != info.n_params)
            throw ParameterDomainError(std::string(info.name) + ": expected " +
                                       std::to_string(info.n_params) + " parameters, got " +
                                       std::to_string(values.size()));
        for (int i = 0; i < info.n_params; ++i) p_[i] = values[i];
        validate();
    }

    DistributionSpec(Family family, std::initializer_list<double> values)
        : DistributionSpec(family, std::vector<double>(values)) {}

    Family family() const { return family_; }
    const FamilyInfo& info() const { return family_info(family_); }

    double param(int i) const { return p_[static_cast<std::size_t>(i)]; }

    double param(std::string_view name) const {
        const auto& info = this->info();
        for (int i = 0; i < info.n_params; ++i) {
            if (info.params[i] == name) return p_[i];
        }
        throw ParameterDomainError(std::string(info.name) + ": no parameter named " +
                                   std::string(name));
    }

    std::map<std::string, double> params() const {
        const auto& info = this->info();
        std::map<std::string, double> out;
        for (int i = 0; i < info.n_params; ++i) out[std::string(info.params[i])] = p_[i];
        return out;
    }

  private:
    void require(bool ok, const char* what) const {
        if (!ok)
            throw ParameterDomainError(std::string(family_info(family_).name) + ": " + what);
    }

    void validate() const {
        for (int i = 0; i < info().n_params; ++i) require(std::isfinite(p_[i]), "non-finite parameter");
        switch (family_) {
            case Family::uniform:
                require(p_[1] > 0.0, "width w must be positive");
                break;
            case Family::norm:
            case Family::lognorm:
                require(p_[1] > 0.0, "sigma must be positive");
                break;
            case Family::bernoulli:
            case Family::geom:
                require(p_[0] > 0.0 && p_[0] < 1.0, "p must lie in (0,1)");
                break;
            case Family::beta:
                require(p_[0] > 0.0 && p_[1] > 0.0, "alpha and beta must be positive");
                break;
            case Family::binom:
                require(detail::is_integer_valued(p_[0]) && p_[0] >= 1.0, "n must be a positive integer");
                require(p_[1] > 0.0 && p_[1] < 1.0, "p must lie in (0,1)");
                break;
            case Family::expon:
                require(p_[0] > 0.0, "lambda must be positive");
                break;
            case Family::nbinom:
                require(p_[0] > 0.0, "r must be positive");
                require(p_[1] > 0.0 && p_[1] < 1.0, "p must lie in (0,1)");
                break;
            case Family::triang:
                require(p_[1] > 0.0, "width w must be positive");
                require(p_[2] > 0.0 && p_[2] < 1.0, "f_mode must lie in (0,1)");
                break;
            case Family::rayleigh:
            case Family::maxwell:
                require(p_[0] > 0.0, "sigma must be positive");
                break;
            case Family::poisson:
                require(p_[0] > 0.0, "lambda must be positive");
                break;
            case Family::cauchy:
                require(p_[1] > 0.0, "gamma must be positive");
                break;
            case Family::t:
            case Family::chi:
            case Family::chi2:
                require(p_[0] > 0.0, "nu must be positive");
                break;
            case Family::f:
                require(p_[0] > 0.0 && p_[1] > 0.0, "d1 and d2 must be positive");
                break;
            case Family::gamma:
                require(p_[0] > 0.0 && p_[1] > 0.0, "alpha and beta must be positive");
                break;
            case Family::weibull_min:
                require(p_[0] > 0.0 && p_[1] > 0.0, "k and lambda must be positive");
                break;
            case Family::truncnorm:
                require(p_[1] > 0.0, "sigma must be positive");
                require(p_[2] < p_[3], "bounds must satisfy a < b");
                break;
            case Family::laplace:
                require(p_[1] > 0.0, "b must be positive");
                break;
            case Family::logistic:
                require(p_[1] > 0.0, "s must be positive");
                break;
            case Family::pareto:
                require(p_[0] > 0.0, "alpha must be positive");
                require(p_[1] > 0.0, "x_m must be positive");
                break;
            case Family::hypergeom: {
                require(detail::is_integer_valued(p_[0]) && p_[0] >= 1.0, "M must be a positive integer");
                require(detail::is_integer_valued(p_[1]) && p_[1] >= 1.0, "N must be a positive integer");
                require(detail::is_integer_valued(p_[2]) && p_[2] >= 0.0, "K must be a nonnegative integer");
                require(p_[1] <= p_[0], "N must not exceed M");
                require(p_[2] <= p_[0], "K must not exceed M");
                break;
            }
            case Family::gumbel_r:
                require(p_[1] > 0.0, "beta must be positive");
                break;
            case Family::skellam:
                require(p_[0] > 0.0 && p_[1] > 0.0, "mu1 and mu2 must be positive");
                break;
            case Family::betabinom:
                require(detail::is_integer_valued(p_[0]) && p_[0] >= 1.0, "n must be a positive integer");
                require(p_[1] > 0.0 && p_[2] > 0.0, "alpha and beta must be positive");
                break;
            case Family::lomax:
                require(p_[0] > 0.0 && p_[1] > 0.0, "alpha and lambda must be positive");
                break;
            case Family::invgauss:
                require(p_[0] > 0.0 && p_[1] > 0.0, "mu and lambda must be positive");
                break;
        }
    }

    Family family_;
    std::array<double, 4> p_{};
};

inline SupportInfo support(const DistributionSpec& spec) {
    const double inf = std::numeric_limits<double>::infinity();
    switch (spec.family()) {
        case Family::uniform: return {spec.param(0), spec.param(0) + spec.param(1), false};
        case Family::norm: return {-inf, inf, false};
        case Family::bernoulli: return {0.0, 1.0, true};
        case Family::beta: return {0.0, 1.0, false};
        case Family::binom: return {0.0, spec.param(0), true};
        case Family::expon: return {0.0, inf, false};
        case Family::geom: return {1.0, inf, true};
        case Family::nbinom: return {0.0, inf, true};
        case Family::lognorm: return {0.0, inf, false};
        case Family::triang: return {spec.param(0), spec.param(0) + spec.param(1), false};
        case Family::rayleigh: return {0.0, inf, false};
        case Family::poisson: return {0.0, inf, true};
        case Family::maxwell: return {0.0, inf, false};
        case Family::cauchy: return {-inf, inf, false};
        case Family::t: return {-inf, inf, false};
        case Family::chi: return {0.0, inf, false};
        case Family::chi2: return {0.0, inf, false};
        case Family::f: return {0.0, inf, false};
        case Family::gamma: return {0.0, inf, false};
        case Family::weibull_min: return {0.0, inf, false};
        case Family::truncnorm: return {spec.param(2), spec.param(3), false};
        case Family::laplace: return {-inf, inf, false};
        case Family::logistic: return {-inf, inf, false};
        case Family::pareto: return {spec.param(1), inf, false};
        case Family::hypergeom: {
            double M = spec.param(0), N = spec.param(1), K = spec.param(2);
            return {std::max(0.0, N - (M - K)), std::min(N, K), true};
        }
        case Family::gumbel_r: return {-inf, inf, false};
        case Family::skellam: return {-inf, inf, true};
        case Family::betabinom: return {0.0, spec.param(0), true};
        case Family::lomax: return {0.0, inf, false};
        case Family::invgauss: return {0.0, inf, false};
    }
    throw ParameterDomainError("unreachable family");
}

namespace detail {

// Exact binomial coefficient as a double; n is small enough throughout the
// benchmark (n <= 60 guard keeps products inside the 53-bit mantissa).
inline double choose_exact(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

inline double binom_pmf(double n_, double p, double k_) {
    int n = static_cast<int>(n_);
    if (!is_integer_valued(k_) || k_ < 0.0 || k_ > n_) return 0.0;
    int k = static_cast<int>(k_);
    if (n <= 60) {
        double c = choose_exact(n, k);
        return c * std::pow(p, k) * std::pow(1.0 - p, n - k);
    }
    return std::exp(log_choose(n_, k_) + k_ * std::log(p) + (n_ - k_) * std::log1p(-p));
}

inline double geom_pmf(double p, double k) {
    if (!is_integer_valued(k) || k < 1.0) return 0.0;
    return p * std::pow(1.0 - p, k - 1.0);
}

inline double nbinom_pmf(double r, double p, double k) {
    if (!is_integer_valued(k) || k < 0.0) return 0.0;
    return std::exp(log_choose(k + r - 1.0, k) + r * std::log(p) + k * std::log1p(-p));
}

inline double poisson_pmf(double lambda, double k) {
    if (!is_integer_valued(k) || k < 0.0) return 0.0;
    return std::exp(k * std::log(lambda) - lambda - log_gamma(k + 1.0));
}

inline double hypergeom_pmf(double M, double N, double K, double k) {
    if (!is_integer_valued(k)) return 0.0;
    if (k < std::max(0.0, N - (M - K)) || k > std::min(N, K)) return 0.0;
    return std::exp(log_choose(K, k) + log_choose(M - K, N - k) - log_choose(M, N));
}

inline double betabinom_pmf(double n, double a, double b, double k) {
    if (!is_integer_valued(k) || k < 0.0 || k > n) return 0.0;
    return std::exp(log_choose(n, k) + log_beta(k + a, n - k + b) - log_beta(a, b));
}

// Skellam masses by direct convolution of two truncated Poisson laws; the
// truncation keeps well below 1e-12 of mass outside the table.
struct SkellamTable {
    long long lo = 0;  // value of the first table entry
    std::vector<double> pmf;
};

inline SkellamTable make_skellam_table(double mu1, double mu2) {
    auto hi_bound = [](double mu) {
        return static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(mu) + 30.0));
    };
    int n1 = hi_bound(mu1);
    int n2 = hi_bound(mu2);
    std::vector<double> p1(static_cast<std::size_t>(n1) + 1);
    std::vector<double> p2(static_cast<std::size_t>(n2) + 1);
    p1[0] = std::exp(-mu1);
    for (int i = 1; i <= n1; ++i) p1[i] = p1[i - 1] * mu1 / i;
    p2[0] = std::exp(-mu2);
    for (int j = 1; j <= n2; ++j) p2[j] = p2[j - 1] * mu2 / j;
    SkellamTable t;
    t.lo = -n2;
    t.pmf.assign(static_cast<std::size_t>(n1) + n2 + 1, 0.0);
    for (int j = 0; j <= n2; ++j) {
        for (int i = 0; i <= n1; ++i) t.pmf[static_cast<std::size_t>(i - j + n2)] += p1[i] * p2[j];
    }
    return t;
}

inline const SkellamTable& skellam_table(double mu1, double mu2) {
    thread_local double cached_mu1 = -1.0, cached_mu2 = -1.0;
    thread_local SkellamTable table;
    if (cached_mu1 != mu1 || cached_mu2 != mu2) {
        table = make_skellam_table(mu1, mu2);
        cached_mu1 = mu1;
        cached_mu2 = mu2;
    }
    return table;
}

inline double skellam_pmf(double mu1, double mu2, double k) {
    if (!is_integer_valued(k)) return 0.0;
    const SkellamTable& t = skellam_table(mu1, mu2);
    long long idx = static_cast<long long>(k) - t.lo;
    if (idx < 0 || idx >= static_cast<long long>(t.pmf.size())) return 0.0;
    return t.pmf[static_cast<std::size_t>(idx)];
}

inline double pmf(const DistributionSpec& spec, double k) {
    switch (spec.family()) {
        case Family::bernoulli:
            if (k == 0.0) return 1.0 - spec.param(0);
            if (k == 1.0) return spec.param(0);
            return 0.0;
        case Family::binom: return binom_pmf(spec.param(0), spec.param(1), k);
        case Family::geom: return geom_pmf(spec.param(0), k);
        case Family::nbinom: return nbinom_pmf(spec.param(0), spec.param(1), k);
        case Family::poisson: return poisson_pmf(spec.param(0), k);
        case Family::hypergeom:
            return hypergeom_pmf(spec.param(0), spec.param(1), spec.param(2), k);
        case Family::skellam: return skellam_pmf(spec.param(0), spec.param(1), k);
        case Family::betabinom:
            return betabinom_pmf(spec.param(0), spec.param(1), spec.param(2), k);
        default: throw ParameterDomainError("pmf requested for a continuous family");
    }
}

// First integer with nonzero mass; skellam scans start at its truncated table.
inline double discrete_scan_origin(const DistributionSpec& spec) {
    if (spec.family() == Family::skellam)
        return static_cast<double>(skellam_table(spec.param(0), spec.param(1)).lo);
    return support(spec).lower;
}

inline double continuous_pdf(const DistributionSpec& spec, double x) {
    switch (spec.family()) {
        case Family::uniform: {
            double a = spec.param(0), w = spec.param(1);
            return (x >= a && x <= a + w) ? 1.0 / w : 0.0;
        }
        case Family::norm: {
            double mu = spec.param(0), sigma = spec.param(1);
            return normal_pdf((x - mu) / sigma) / sigma;
        }
        case Family::beta: {
            double a = spec.param(0), b = spec.param(1);
            if (x < 0.0 || x > 1.0) return 0.0;
            if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity()
                                         : (a == 1.0 ? b : 0.0);
            if (x == 1.0) return b < 1.0 ? std::numeric_limits<double>::infinity()
                                         : (b == 1.0 ? a : 0.0);
            return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
        }
        case Family::expon: {
            double lambda = spec.param(0);
            return x < 0.0 ? 0.0 : lambda * std::exp(-lambda * x);
        }
        case Family::lognorm: {
            double mu = spec.param(0), sigma = spec.param(1);
            if (x <= 0.0) return 0.0;
            return normal_pdf((std::log(x) - mu) / sigma) / (x * sigma);
        }
        case Family::triang: {
            double a = spec.param(0), w = spec.param(1), m = a + spec.param(2) * w;
            if (x < a || x > a + w) return 0.0;
            if (x <= m) return 2.0 * (x - a) / (w * (m - a));
            return 2.0 * (a + w - x) / (w * (a + w - m));
        }
        case Family::rayleigh: {
            double s = spec.param(0);
            if (x < 0.0) return 0.0;
            return x / (s * s) * std::exp(-0.5 * x * x / (s * s));
        }
        case Family::maxwell: {
            double s = spec.param(0);
            if (x < 0.0) return 0.0;
            return std::sqrt(2.0 / kPi) * x * x * std::exp(-0.5 * x * x / (s * s)) / (s * s * s);
        }
        case Family::cauchy: {
            double x0 = spec.param(0), g = spec.param(1);
            double z = (x - x0) / g;
            return 1.0 / (kPi * g * (1.0 + z * z));
        }
        case Family::t: {
            double nu = spec.param(0);
            return std::exp(log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) -
                            0.5 * std::log(nu * kPi) -
                            0.5 * (nu + 1.0) * std::log1p(x * x / nu));
        }
        case Family::chi: {
            double nu = spec.param(0);
            if (x < 0.0) return 0.0;
            if (x == 0.0) return nu < 1.0 ? std::numeric_limits<double>::infinity()
                                          : (nu == 1.0 ? std::sqrt(2.0 / kPi) : 0.0);
            return std::exp((nu - 1.0) * std::log(x) - 0.5 * x * x -
                            (0.5 * nu - 1.0) * std::log(2.0) - log_gamma(0.5 * nu));
        }
        case Family::chi2: {
            double nu = spec.param(0);
            if (x < 0.0) return 0.0;
            if (x == 0.0) return nu < 2.0 ? std::numeric_limits<double>::infinity()
                                          : (nu == 2.0 ? 0.5 : 0.0);
            return std::exp((0.5 * nu - 1.0) * std::log(x) - 0.5 * x - 0.5 * nu * std::log(2.0) -
                            log_gamma(0.5 * nu));
        }
        case Family::f: {
            double d1 = spec.param(0), d2 = spec.param(1);
            if (x < 0.0) return 0.0;
            if (x == 0.0) return d1 < 2.0 ? std::numeric_limits<double>::infinity()
                                          : (d1 == 2.0 ? 1.0 : 0.0);
            return std::exp(0.5 * d1 * std::log(d1 * x) + 0.5 * d2 * std::log(d2) -
                            0.5 * (d1 + d2) * std::log(d1 * x + d2) - std::log(x) -
                            log_beta(0.5 * d1, 0.5 * d2));
        }
        case Family::gamma: {
            double a = spec.param(0), rate = spec.param(1);
            if (x < 0.0) return 0.0;
            if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity()
                                         : (a == 1.0 ? rate : 0.0);
            return std::exp(a * std::log(rate) + (a - 1.0) * std::log(x) - rate * x -
                            log_gamma(a));
        }
        case Family::weibull_min: {
            double k = spec.param(0), lam = spec.param(1);
            if (x < 0.0) return 0.0;
            if (x == 0.0) return k < 1.0 ? std::numeric_limits<double>::infinity()
                                         : (k == 1.0 ? 1.0 / lam : 0.0);
            double z = x / lam;
            return k / lam * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
        }
        case Family::truncnorm: {
            double mu = spec.param(0), sigma = spec.param(1), a = spec.param(2), b = spec.param(3);
            if (x < a || x > b) return 0.0;
            double z_mass = normal_cdf((b - mu) / sigma) - normal_cdf((a - mu) / sigma);
            return normal_pdf((x - mu) / sigma) / (sigma * z_mass);
        }
        case Family::laplace: {
            double mu = spec.param(0), b = spec.param(1);
            return std::exp(-std::fabs(x - mu) / b) / (2.0 * b);
        }
        case Family::logistic: {
            double mu = spec.param(0), s = spec.param(1);
            double e = std::exp(-std::fabs(x - mu) / s);
            return e / (s * (1.0 + e) * (1.0 + e));
        }
        case Family::pareto: {
            double a = spec.param(0), xm = spec.param(1);
            if (x < xm) return 0.0;
            return a * std::pow(xm, a) / std::pow(x, a + 1.0);
        }
        case Family::gumbel_r: {
            double mu = spec.param(0), beta = spec.param(1);
            double z = (x - mu) / beta;
            return std::exp(-z - std::exp(-z)) / beta;
        }
        case Family::lomax: {
            double a = spec.param(0), lam = spec.param(1);
            if (x < 0.0) return 0.0;
            return a / lam * std::pow(1.0 + x / lam, -a - 1.0);
        }
        case Family::invgauss: {
            double mu = spec.param(0), lam = spec.param(1);
            if (x <= 0.0) return 0.0;
            return std::sqrt(lam / (2.0 * kPi * x * x * x)) *
                   std::exp(-lam * (x - mu) * (x - mu) / (2.0 * mu * mu * x));
        }
        default: throw ParameterDomainError("pdf requested for a discrete family");
    }
}

inline double continuous_cdf(const DistributionSpec& spec, double x) {
    switch (spec.family()) {
        case Family::uniform: {
            double a = spec.param(0), w = spec.param(1);
            return std::clamp((x - a) / w, 0.0, 1.0);
        }
        case Family::norm: {
            return normal_cdf((x - spec.param(0)) / spec.param(1));
        }
        case Family::beta: {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return inc_beta(spec.param(0), spec.param(1), x);
        }
        case Family::expon: {
            if (x <= 0.0) return 0.0;
            return -std::expm1(-spec.param(0) * x);
        }
        case Family::lognorm: {
            if (x <= 0.0) return 0.0;
            return normal_cdf((std::log(x) - spec.param(0)) / spec.param(1));
        }
        case Family::triang: {
            double a = spec.param(0), w = spec.param(1), m = a + spec.param(2) * w;
            if (x <= a) return 0.0;
            if (x >= a + w) return 1.0;
            if (x <= m) return (x - a) * (x - a) / (w * (m - a));
            return 1.0 - (a + w - x) * (a + w - x) / (w * (a + w - m));
        }
        case Family::rayleigh: {
            double s = spec.param(0);
            if (x <= 0.0) return 0.0;
            return -std::expm1(-0.5 * x * x / (s * s));
        }
        case Family::maxwell: {
            double s = spec.param(0);
            if (x <= 0.0) return 0.0;
            return gamma_p(1.5, 0.5 * x * x / (s * s));
        }
        case Family::cauchy: {
            double x0 = spec.param(0), g = spec.param(1);
            return 0.5 + std::atan((x - x0) / g) / kPi;
        }
        case Family::t: {
            double nu = spec.param(0);
            if (x == 0.0) return 0.5;
            double w = inc_beta(0.5 * nu, 0.5, nu / (nu + x * x));
            return x > 0.0 ? 1.0 - 0.5 * w : 0.5 * w;
        }
        case Family::chi: {
            double nu = spec.param(0);
            if (x <= 0.0) return 0.0;
            return gamma_p(0.5 * nu, 0.5 * x * x);
        }
        case Family::chi2: {
            double nu = spec.param(0);
            if (x <= 0.0) return 0.0;
            return gamma_p(0.5 * nu, 0.5 * x);
        }
        case Family::f: {
            double d1 = spec.param(0), d2 = spec.param(1);
            if (x <= 0.0) return 0.0;
            return inc_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
        }
        case Family::gamma: {
            double a = spec.param(0), rate = spec.param(1);
            if (x <= 0.0) return 0.0;
            return gamma_p(a, rate * x);
        }
        case Family::weibull_min: {
            double k = spec.param(0), lam = spec.param(1);
            if (x <= 0.0) return 0.0;
            return -std::expm1(-std::pow(x / lam, k));
        }
        case Family::truncnorm: {
            double mu = spec.param(0), sigma = spec.param(1), a = spec.param(2), b = spec.param(3);
            if (x <= a) return 0.0;
            if (x >= b) return 1.0;
            double fa = normal_cdf((a - mu) / sigma);
            double fb = normal_cdf((b - mu) / sigma);
            return (normal_cdf((x - mu) / sigma) - fa) / (fb - fa);
        }
        case Family::laplace: {
            double mu = spec.param(0), b = spec.param(1);
            if (x < mu) return 0.5 * std::exp((x - mu) / b);
            return 1.0 - 0.5 * std::exp(-(x - mu) / b);
        }
        case Family::logistic: {
            double mu = spec.param(0), s = spec.param(1);
            return 1.0 / (1.0 + std::exp(-(x - mu) / s));
        }
        case Family::pareto: {
            double a = spec.param(0), xm = spec.param(1);
            if (x <= xm) return 0.0;
            return -std::expm1(a * std::log(xm / x));
        }
        case Family::gumbel_r: {
            double mu = spec.param(0), beta = spec.param(1);
            return std::exp(-std::exp(-(x - mu) / beta));
        }
        case Family::lomax: {
            double a = spec.param(0), lam = spec.param(1);
            if (x <= 0.0) return 0.0;
            return -std::expm1(-a * std::log1p(x / lam));
        }
        case Family::invgauss: {
            double mu = spec.param(0), lam = spec.param(1);
            if (x <= 0.0) return 0.0;
            double r = std::sqrt(lam / x);
            return normal_cdf(r * (x / mu - 1.0)) +
                   std::exp(2.0 * lam / mu) * normal_cdf(-r * (x / mu + 1.0));
        }
        default: throw ParameterDomainError("cdf requested for a discrete family");
    }
}

// Rough location/spread used to seed the quantile bracket expansion.
inline void bracket_hint(const DistributionSpec& spec, double& center, double& scale) {
    switch (spec.family()) {
        case Family::beta: {
            double a = spec.param(0), b = spec.param(1);
            center = a / (a + b);
            scale = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
            break;
        }
        case Family::maxwell: {
            double s = spec.param(0);
            center = 2.0 * s * std::sqrt(2.0 / kPi);
            scale = s;
            break;
        }
        case Family::t: {
            double nu = spec.param(0);
            center = 0.0;
            scale = nu > 2.5 ? std::sqrt(nu / (nu - 2.0)) : 2.0;
            break;
        }
        case Family::chi: {
            center = std::sqrt(spec.param(0));
            scale = 1.0;
            break;
        }
        case Family::chi2: {
            double nu = spec.param(0);
            center = nu;
            scale = std::sqrt(2.0 * nu);
            break;
        }
        case Family::f: {
            center = 1.0;
            scale = 2.0;
            break;
        }
        case Family::gamma: {
            double a = spec.param(0), rate = spec.param(1);
            center = a / rate;
            scale = std::sqrt(a) / rate;
            break;
        }
        case Family::invgauss: {
            double mu = spec.param(0), lam = spec.param(1);
            center = mu;
            scale = std::sqrt(mu * mu * mu / lam);
            break;
        }
        default: {
            center = 0.0;
            scale = 1.0;
            break;
        }
    }
}

// Bracketed bisection with safeguarded Newton refinement; the bracket is grown
// geometrically from the hint until it straddles u.
inline double invert_continuous_cdf(const DistributionSpec& spec, double u) {
    SupportInfo sup = support(spec);
    double center, scale;
    bracket_hint(spec, center, scale);
    if (scale <= 0.0 || !std::isfinite(scale)) scale = 1.0;

    double lo, hi;
    if (std::isfinite(sup.lower) && continuous_cdf(spec, sup.lower) >= u) {
        // Mass starts exactly at the boundary; nothing to search for.
        return sup.lower;
    }
    if (std::isfinite(sup.lower)) {
        lo = sup.lower;
    } else {
        double step = scale;
        lo = center - step;
        int guard = 0;
        while (continuous_cdf(spec, lo) > u) {
            step *= 2.0;
            lo = center - step;
            if (++guard > 200) throw DomainError("quantile bracket expansion failed (lower)");
        }
    }
    {
        double step = scale;
        hi = std::max(center + step, lo + scale);
        int guard = 0;
        while (continuous_cdf(spec, hi) < u) {
            step *= 2.0;
            hi = center + step;
            if (std::isfinite(sup.upper) && hi >= sup.upper) {
                hi = sup.upper;
                break;
            }
            if (++guard > 200) throw DomainError("quantile bracket expansion failed (upper)");
        }
    }

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double c = continuous_cdf(spec, x);
        if (std::fabs(c - u) < 1e-15) return x;
        if (c < u) lo = x; else hi = x;
        if (hi - lo <= 1e-12 * std::max({1.0, std::fabs(lo), std::fabs(hi)})) break;
        double d = continuous_pdf(spec, x);
        double newton = (d > 1e-300 && std::isfinite(d)) ? x - (c - u) / d
                                                         : std::numeric_limits<double>::quiet_NaN();
        x = (std::isfinite(newton) && newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    }
    return 0.5 * (lo + hi);
}

inline double continuous_ppf(const DistributionSpec& spec, double u) {
    switch (spec.family()) {
        case Family::uniform: return spec.param(0) + u * spec.param(1);
        case Family::norm: return spec.param(0) + spec.param(1) * probit(u);
        case Family::expon: return -std::log1p(-u) / spec.param(0);
        case Family::lognorm: return std::exp(spec.param(0) + spec.param(1) * probit(u));
        case Family::triang: {
            double a = spec.param(0), w = spec.param(1), f = spec.param(2);
            if (u <= f) return a + std::sqrt(u * f) * w;
            return a + w - std::sqrt((1.0 - u) * (1.0 - f)) * w;
        }
        case Family::rayleigh: return spec.param(0) * std::sqrt(-2.0 * std::log1p(-u));
        case Family::cauchy:
            return spec.param(0) + spec.param(1) * std::tan(kPi * (u - 0.5));
        case Family::weibull_min:
            return spec.param(1) * std::pow(-std::log1p(-u), 1.0 / spec.param(0));
        case Family::truncnorm: {
            double mu = spec.param(0), sigma = spec.param(1), a = spec.param(2), b = spec.param(3);
            double fa = normal_cdf((a - mu) / sigma);
            double fb = normal_cdf((b - mu) / sigma);
            return mu + sigma * probit(fa + u * (fb - fa));
        }
        case Family::laplace: {
            double mu = spec.param(0), b = spec.param(1);
            if (u < 0.5) return mu + b * std::log(2.0 * u);
            return mu - b * std::log(2.0 * (1.0 - u));
        }
        case Family::logistic:
            return spec.param(0) + spec.param(1) * std::log(u / (1.0 - u));
        case Family::pareto:
            return spec.param(1) * std::exp(-std::log1p(-u) / spec.param(0));
        case Family::gumbel_r:
            return spec.param(0) - spec.param(1) * std::log(-std::log(u));
        case Family::lomax:
            return spec.param(1) * std::expm1(-std::log1p(-u) / spec.param(0));
        default: return invert_continuous_cdf(spec, u);
    }
}

}  // namespace detail

// PMF for discrete families, PDF for continuous ones.
inline double density(const DistributionSpec& spec, double x) {
    if (spec.info().discrete) return detail::pmf(spec, x);
    return detail::continuous_pdf(spec, x);
}

inline double cdf(const DistributionSpec& spec, double x) {
    if (!spec.info().discrete) return detail::continuous_cdf(spec, x);
    double k = std::floor(x);
    SupportInfo sup = support(spec);
    if (k < detail::discrete_scan_origin(spec)) return 0.0;
    if (std::isfinite(sup.upper) && k >= sup.upper) return 1.0;
    double origin = detail::discrete_scan_origin(spec);
    double sum = 0.0;
    for (double v = origin; v <= k; v += 1.0) sum += detail::pmf(spec, v);
    return std::min(sum, 1.0);
}

// Smallest x with cdf(x) >= u; discrete families scan the support directly.
inline double ppf(const DistributionSpec& spec, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("ppf: u must lie in (0,1)");
    if (!spec.info().discrete) return detail::continuous_ppf(spec, u);
    SupportInfo sup = support(spec);
    double v = detail::discrete_scan_origin(spec);
    double sum = 0.0;
    for (long long steps = 0; steps < 10000000; ++steps) {
        sum += detail::pmf(spec, v);
        if (sum >= u) return v;
        if (std::isfinite(sup.upper) && v >= sup.upper) return sup.upper;
        v += 1.0;
    }
    throw DomainError("ppf: discrete scan exceeded step cap");
}

// Inverse-transform sampling; one uniform variate per draw.
inline double sample(const DistributionSpec& spec, UniformSource& rng) {
    double u = rng.next();
    if (u <= 0.0) u = 0x1.0p-53;
    return ppf(spec, u);
}

}  // namespace distcal
