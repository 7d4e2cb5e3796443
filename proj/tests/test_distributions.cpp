#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/random.hpp"

using namespace distcal;

namespace {

// One test configuration per family, matching the benchmark's held-out
// parameter settings.
std::vector<DistributionSpec> test_configs() {
    std::vector<DistributionSpec> v;
    v.emplace_back(Family::uniform, std::vector<double>{3.5, 7.0});
    v.emplace_back(Family::norm, std::vector<double>{3.5, 3.0});
    v.emplace_back(Family::bernoulli, std::vector<double>{0.5});
    v.emplace_back(Family::beta, std::vector<double>{7.0, 7.0});
    v.emplace_back(Family::binom, std::vector<double>{25.0, 0.5});
    v.emplace_back(Family::expon, std::vector<double>{7.0});
    v.emplace_back(Family::geom, std::vector<double>{0.125});
    v.emplace_back(Family::nbinom, std::vector<double>{15.0, 0.15});
    v.emplace_back(Family::lognorm, std::vector<double>{2.5, 2.0});
    v.emplace_back(Family::triang, std::vector<double>{2.5, 7.0, 0.5});
    v.emplace_back(Family::rayleigh, std::vector<double>{3.0});
    v.emplace_back(Family::poisson, std::vector<double>{4.0});
    v.emplace_back(Family::maxwell, std::vector<double>{1.5});
    v.emplace_back(Family::cauchy, std::vector<double>{3.5, 3.0});
    v.emplace_back(Family::t, std::vector<double>{16.0});
    v.emplace_back(Family::chi, std::vector<double>{5.0});
    v.emplace_back(Family::chi2, std::vector<double>{32.0});
    v.emplace_back(Family::f, std::vector<double>{12.0, 24.0});
    v.emplace_back(Family::gamma, std::vector<double>{7.0, 7.0});
    v.emplace_back(Family::weibull_min, std::vector<double>{1.5, 1.5});
    v.emplace_back(Family::truncnorm, std::vector<double>{0.0, 1.0, -2.0, 2.0});
    v.emplace_back(Family::laplace, std::vector<double>{3.5, 3.0});
    v.emplace_back(Family::logistic, std::vector<double>{3.5, 3.0});
    v.emplace_back(Family::pareto, std::vector<double>{6.5, 3.5});
    v.emplace_back(Family::hypergeom, std::vector<double>{100.0, 20.0, 50.0});
    v.emplace_back(Family::gumbel_r, std::vector<double>{3.5, 3.0});
    v.emplace_back(Family::skellam, std::vector<double>{10.5, 10.5});
    v.emplace_back(Family::betabinom, std::vector<double>{40.0, 6.5, 6.5});
    v.emplace_back(Family::lomax, std::vector<double>{6.0, 4.5});
    v.emplace_back(Family::invgauss, std::vector<double>{5.0, 7.0});
    return v;
}

}  // namespace

TEST(Distributions, FamilyTableIsComplete) {
    const auto& table = family_table();
    ASSERT_EQ(table.size(), 30u);
    for (int i = 0; i < kFamilyCount; ++i) {
        EXPECT_EQ(static_cast<int>(table[static_cast<std::size_t>(i)].family), i);
        EXPECT_TRUE(family_from_name(table[static_cast<std::size_t>(i)].name) ==
                    table[static_cast<std::size_t>(i)].family);
    }
    EXPECT_THROW(family_from_name("zipf"), ConfigError);
    int ood = 0;
    for (const auto& info : table) ood += info.ood ? 1 : 0;
    EXPECT_EQ(ood, 6);
}

TEST(Distributions, DensityExamples) {
    EXPECT_DOUBLE_EQ(density(DistributionSpec(Family::binom, {2.0, 0.5}), 1.0), 0.5);
    EXPECT_DOUBLE_EQ(density(DistributionSpec(Family::uniform, {0.0, 1.0}), 0.25), 1.0);
    EXPECT_NEAR(density(DistributionSpec(Family::norm, {0.0, 1.0}), 0.0), 0.3989423, 1e-6);
    EXPECT_DOUBLE_EQ(density(DistributionSpec(Family::binom, {2.0, 0.5}), 0.0), 0.25);
    EXPECT_DOUBLE_EQ(density(DistributionSpec(Family::binom, {2.0, 0.5}), 3.0), 0.0);
    EXPECT_DOUBLE_EQ(density(DistributionSpec(Family::binom, {2.0, 0.5}), 0.5), 0.0);
}

TEST(Distributions, CdfExamples) {
    EXPECT_DOUBLE_EQ(cdf(DistributionSpec(Family::norm, {0.0, 1.0}), 0.0), 0.5);
    EXPECT_NEAR(cdf(DistributionSpec(Family::expon, {1.0}), 1.0), 0.6321206, 1e-6);

    // Brute-force oracle: P(X <= 3) for Poisson(4) summed term by term.
    double oracle = 0.0, term = std::exp(-4.0);
    for (int k = 0; k <= 3; ++k) {
        oracle += term;
        term *= 4.0 / (k + 1);
    }
    EXPECT_NEAR(oracle, 0.4334701, 1e-6);
    DistributionSpec pois(Family::poisson, {4.0});
    EXPECT_NEAR(cdf(pois, 3.0), oracle, 1e-12);
    EXPECT_NEAR(cdf(pois, 3.7), oracle, 1e-12);  // evaluated at floor(x)
    EXPECT_DOUBLE_EQ(cdf(pois, -1.0), 0.0);
}

TEST(Distributions, PpfExamples) {
    EXPECT_NEAR(ppf(DistributionSpec(Family::uniform, {0.0, 1.0}), 0.999), 0.999, 1e-12);

    // Bisection oracle on the CDF, independent of the closed-form inverse.
    DistributionSpec norm01(Family::norm, {0.0, 1.0});
    double lo = -10.0, hi = 10.0;
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        (cdf(norm01, mid) < 0.999 ? lo : hi) = mid;
    }
    double oracle = 0.5 * (lo + hi);
    EXPECT_NEAR(oracle, 3.0902323, 1e-5);
    EXPECT_NEAR(ppf(norm01, 0.999), oracle, 1e-9);

    // Enumeration oracle for the geometric quantile with support {1, 2, ...}:
    // P(X<=1)=0.5 < 0.6 and P(X<=2)=0.75 >= 0.6, so the 0.6-quantile is 2.
    double p = 0.5, cum = 0.0, k = 1.0;
    while (cum + p * std::pow(1.0 - p, k - 1.0) < 0.6) {
        cum += p * std::pow(1.0 - p, k - 1.0);
        k += 1.0;
    }
    EXPECT_DOUBLE_EQ(k, 2.0);
    EXPECT_DOUBLE_EQ(ppf(DistributionSpec(Family::geom, {0.5}), 0.6), k);

    EXPECT_THROW(ppf(norm01, 0.0), DomainError);
    EXPECT_THROW(ppf(norm01, 1.0), DomainError);
    EXPECT_THROW(ppf(norm01, -0.3), DomainError);
}

TEST(Distributions, SampleExamples) {
    SequenceSource stream({0.25});
    EXPECT_DOUBLE_EQ(sample(DistributionSpec(Family::uniform, {0.0, 1.0}), stream), 0.25);

    DistributionSpec near_sure(Family::bernoulli, {0.999999});
    Rng rng(1234);
    for (int i = 0; i < 64; ++i) EXPECT_DOUBLE_EQ(sample(near_sure, rng), 1.0);

    DistributionSpec norm01(Family::norm, {0.0, 1.0});
    Rng rng2(20240915);
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) mean += sample(norm01, rng2);
    mean /= 100000.0;
    EXPECT_NEAR(mean, 0.0, 0.02);
}

TEST(Distributions, SupportExamples) {
    SupportInfo b = support(DistributionSpec(Family::binom, {5.0, 0.3}));
    EXPECT_TRUE(b.discrete);
    EXPECT_DOUBLE_EQ(b.lower, 0.0);
    EXPECT_DOUBLE_EQ(b.upper, 5.0);

    SupportInfo pa = support(DistributionSpec(Family::pareto, {3.0, 1.0}));
    EXPECT_FALSE(pa.discrete);
    EXPECT_DOUBLE_EQ(pa.lower, 1.0);
    EXPECT_TRUE(std::isinf(pa.upper) && pa.upper > 0.0);

    SupportInfo sk = support(DistributionSpec(Family::skellam, {2.0, 3.0}));
    EXPECT_TRUE(sk.discrete);
    EXPECT_TRUE(std::isinf(sk.lower) && sk.lower < 0.0);
    EXPECT_TRUE(std::isinf(sk.upper) && sk.upper > 0.0);

    SupportInfo hg = support(DistributionSpec(Family::hypergeom, {30.0, 15.0, 20.0}));
    EXPECT_DOUBLE_EQ(hg.lower, 5.0);  // at least 15 - (30 - 20) draws are tagged
    EXPECT_DOUBLE_EQ(hg.upper, 15.0);
}

TEST(Distributions, ParameterValidation) {
    EXPECT_THROW(DistributionSpec(Family::norm, {0.0, -1.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::norm, {0.0, 0.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::bernoulli, {0.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::bernoulli, {1.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::binom, {2.5, 0.5}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::truncnorm, {0.0, 1.0, 2.0, 2.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::hypergeom, {30.0, 40.0, 10.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::uniform, {1.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::uniform, {1.0, 2.0, 3.0}), ParameterDomainError);
    EXPECT_THROW(DistributionSpec(Family::norm,
                                  std::map<std::string, double>{{"mu", 0.0}, {"s", 1.0}}),
                 ParameterDomainError);

    DistributionSpec named(Family::norm, std::map<std::string, double>{{"mu", 1.5}, {"sigma", 2.0}});
    EXPECT_DOUBLE_EQ(named.param("mu"), 1.5);
    EXPECT_DOUBLE_EQ(named.param("sigma"), 2.0);
    auto back = named.params();
    EXPECT_EQ(back.size(), 2u);
    EXPECT_DOUBLE_EQ(back.at("mu"), 1.5);
}

TEST(Distributions, CdfMonotonicity) {
    Rng rng(777);
    for (const auto& spec : test_configs()) {
        for (int i = 0; i < 1000; ++i) {
            double u1 = 0.0005 + 0.999 * rng.next();
            double u2 = 0.0005 + 0.999 * rng.next();
            double x1 = ppf(spec, u1) + (rng.next() - 0.5);
            double x2 = ppf(spec, u2) + (rng.next() - 0.5);
            if (x1 > x2) std::swap(x1, x2);
            EXPECT_LE(cdf(spec, x1), cdf(spec, x2))
                << spec.info().name << " x1=" << x1 << " x2=" << x2;
        }
    }
}

TEST(Distributions, PpfCdfRoundTrip) {
    std::vector<double> grid;
    for (double u : {0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999})
        grid.push_back(u);
    for (const auto& spec : test_configs()) {
        if (spec.info().discrete) continue;
        for (double u : grid) {
            double x = ppf(spec, u);
            EXPECT_NEAR(cdf(spec, x), u, 1e-8) << spec.info().name << " u=" << u;
        }
    }
}

TEST(Distributions, DiscreteMassConsistency) {
    for (const auto& spec : test_configs()) {
        if (!spec.info().discrete) continue;
        SupportInfo sup = support(spec);
        if (std::isfinite(sup.upper)) {
            double total = 0.0;
            for (double k = sup.lower; k <= sup.upper; k += 1.0) total += density(spec, k);
            EXPECT_NEAR(total, 1.0, 1e-10) << spec.info().name;
        } else {
            double hi = ppf(spec, 1.0 - 1e-9);
            double lo = spec.family() == Family::skellam ? -ppf(DistributionSpec(Family::skellam,
                                                                                 {spec.param(1), spec.param(0)}),
                                                                1.0 - 1e-9)
                                                         : sup.lower;
            double total = 0.0;
            for (double k = lo; k <= hi; k += 1.0) total += density(spec, k);
            EXPECT_GE(total, 1.0 - 1e-8) << spec.info().name;
        }
    }
}

TEST(Distributions, SamplingMatchesAnalyticCdf) {
    const int n = 100000;
    for (const auto& spec : test_configs()) {
        Rng rng(derive_seed(0x5eedULL, spec.info().name));
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = sample(spec, rng);
        std::sort(xs.begin(), xs.end());
        double d = 0.0;
        if (!spec.info().discrete) {
            for (int i = 0; i < n; ++i) {
                double c = cdf(spec, xs[static_cast<std::size_t>(i)]);
                d = std::max(d, std::fabs((i + 1.0) / n - c));
                d = std::max(d, std::fabs(static_cast<double>(i) / n - c));
            }
        } else {
            // Compare step functions at each distinct support value observed.
            std::size_t i = 0;
            while (i < xs.size()) {
                std::size_t j = i;
                while (j < xs.size() && xs[j] == xs[i]) ++j;
                double v = xs[i];
                d = std::max(d, std::fabs(static_cast<double>(j) / n - cdf(spec, v)));
                d = std::max(d, std::fabs(static_cast<double>(i) / n - cdf(spec, v - 1.0)));
                i = j;
            }
        }
        EXPECT_LE(d, 0.01) << spec.info().name;
    }
}

TEST(Distributions, SkellamConvolutionMatchesCrossCheck) {
    // P(X - Y = k) with X~Poisson(2), Y~Poisson(3) cross-checked by a direct
    // double loop over a wide truncation, written independently of the engine.
    DistributionSpec sk(Family::skellam, {2.0, 3.0});
    for (int k = -8; k <= 8; ++k) {
        double ref = 0.0;
        for (int i = 0; i <= 80; ++i) {
            int j = i - k;
            if (j < 0 || j > 80) continue;
            double logp = i * std::log(2.0) - 2.0 - std::lgamma(i + 1.0) + j * std::log(3.0) -
                          3.0 - std::lgamma(j + 1.0);
            ref += std::exp(logp);
        }
        EXPECT_NEAR(density(sk, k), ref, 1e-13) << "k=" << k;
    }
    double mean = 0.0;
    for (int k = -60; k <= 60; ++k) mean += k * density(sk, k);
    EXPECT_NEAR(mean, -1.0, 1e-9);
}

TEST(Distributions, DiscreteCdfStepsAtIntegers) {
    DistributionSpec b(Family::binom, {5.0, 0.3});
    EXPECT_DOUBLE_EQ(cdf(b, 2.0), cdf(b, 2.999));
    EXPECT_LT(cdf(b, 2.999), cdf(b, 3.0));
    EXPECT_DOUBLE_EQ(cdf(b, 5.0), 1.0);
    EXPECT_DOUBLE_EQ(cdf(b, 17.0), 1.0);
}
