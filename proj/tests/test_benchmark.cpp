#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "distcal/benchmark.hpp"
#include "distcal/vocabulary.hpp"

namespace distcal {
namespace {

std::vector<PromptConfig> default_grid() { return generate_benchmark(5); }

TEST(RenderPrompt, MatchesTemplateExamples) {
    EXPECT_EQ(render_prompt(DistributionSpec(Family::norm, {3.5, 3})),
              "Generate exactly ONE random number from a Gaussian distribution "
              "with parameters mu=3.5, sigma=3. Output ONLY the number.");
    EXPECT_EQ(render_prompt(DistributionSpec(Family::uniform, {3.5, 7})),
              "Generate exactly ONE random number from a Uniform distribution "
              "with parameters a=3.5, w=7. Output ONLY the number.");
    EXPECT_EQ(render_prompt(DistributionSpec(Family::geom, {0.125})),
              "Generate exactly ONE random number from a Geometric distribution "
              "with parameters p=0.125. Output ONLY the number.");
    EXPECT_EQ(render_prompt(DistributionSpec(Family::truncnorm, {1, 1.5, -1, 2})),
              "Generate exactly ONE random number from a TruncNorm distribution "
              "with parameters mu=1, sigma=1.5, a=-1, b=2. Output ONLY the number.");
}

TEST(RenderPrompt, ConfigIdCarriesSplitFamilyAndParams) {
    PromptConfig c = make_prompt_config(Split::ood_test, DistributionSpec(Family::bernoulli, {0.1}));
    EXPECT_EQ(c.id, "ood-test/bernoulli(p=0.1)");
    EXPECT_EQ(split_from_name("ood-test"), Split::ood_test);
    EXPECT_EQ(split_from_name(split_name(Split::unseen_param_test)), Split::unseen_param_test);
    EXPECT_THROW(split_from_name("holdout"), ConfigError);
}

TEST(GenerateBenchmark, SplitSizesAtDefaultResolution) {
    auto grid = default_grid();
    auto train = configs_in_split(grid, Split::train);
    auto unseen = configs_in_split(grid, Split::unseen_param_test);
    auto ood = configs_in_split(grid, Split::ood_test);
    EXPECT_EQ(train.size() + unseen.size() + ood.size(), grid.size());

    // 12 two-range families, expon and rayleigh single-range, verbatim sets
    // for the count-parameter families, and three mixed-axis families.
    EXPECT_EQ(train.size(), 742u);
    EXPECT_EQ(unseen.size(), 24u);
    EXPECT_EQ(ood.size(), 18u);
}

TEST(GenerateBenchmark, OodSplitIsExactlyTheHeldOutFamilies) {
    const std::set<std::string> expected = {"bernoulli",    "poisson", "maxwell",
                                            "chi",          "weibull_min",
                                            "truncnorm"};
    std::set<std::string> seen;
    for (const auto& c : configs_in_split(default_grid(), Split::ood_test)) {
        EXPECT_TRUE(family_info(c.family).ood) << c.id;
        seen.insert(std::string(family_info(c.family).name));
    }
    EXPECT_EQ(seen, expected);
}

TEST(GenerateBenchmark, SplitHygiene) {
    auto grid = default_grid();
    std::set<std::string> train_tuples;
    for (const auto& c : configs_in_split(grid, Split::train)) {
        EXPECT_FALSE(family_info(c.family).ood) << c.id;
        std::string key = std::string(family_info(c.family).name);
        for (int i = 0; i < c.spec.info().n_params; ++i)
            key += "|" + std::to_string(c.spec.param(i));
        train_tuples.insert(key);
    }
    for (const auto& c : configs_in_split(grid, Split::unseen_param_test)) {
        std::string key = std::string(family_info(c.family).name);
        for (int i = 0; i < c.spec.info().n_params; ++i)
            key += "|" + std::to_string(c.spec.param(i));
        EXPECT_EQ(train_tuples.count(key), 0u) << c.id;
    }
}

TEST(GenerateBenchmark, UnseenParamSplitCoversEverySeenFamilyOnce) {
    std::map<std::string, int> per_family;
    for (const auto& c : configs_in_split(default_grid(), Split::unseen_param_test))
        per_family[std::string(family_info(c.family).name)]++;
    EXPECT_EQ(per_family.size(), 24u);
    for (const auto& [name, count] : per_family) EXPECT_EQ(count, 1) << name;
}

TEST(GenerateBenchmark, IdsPromptsAndTokenizationsAreInjective) {
    Vocabulary vocab;
    auto grid = default_grid();
    std::set<std::string> ids, prompts;
    std::set<std::vector<int>> encodings;
    for (const auto& c : grid) {
        EXPECT_TRUE(ids.insert(c.id).second) << c.id;
        EXPECT_TRUE(prompts.insert(c.prompt_text).second) << c.id;
        EXPECT_TRUE(encodings.insert(encode_prompt(vocab, c.spec)).second) << c.id;
    }
    EXPECT_EQ(ids.size(), grid.size());
}

TEST(GenerateBenchmark, DeterministicAcrossCalls) {
    auto a = default_grid();
    auto b = default_grid();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].prompt_text, b[i].prompt_text);
    }
}

TEST(GenerateBenchmark, ResolutionControlsContinuousAxesOnly) {
    auto res2 = generate_benchmark(2);
    auto res3 = generate_benchmark(3);
    auto count = [](const std::vector<PromptConfig>& grid, Family f) {
        std::size_t n = 0;
        for (const auto& c : configs_in_split(grid, Split::train))
            if (c.family == f) ++n;
        return n;
    };
    EXPECT_EQ(count(res2, Family::uniform), 4u);
    EXPECT_EQ(count(res3, Family::uniform), 9u);
    // Verbatim parameter sets are unaffected by the resolution knob.
    EXPECT_EQ(count(res2, Family::geom), 13u);
    EXPECT_EQ(count(res3, Family::geom), 13u);
    EXPECT_EQ(count(res2, Family::binom), 44u);
    EXPECT_EQ(count(res3, Family::f), 16u);
    EXPECT_EQ(count(res3, Family::hypergeom), 45u);

    // Endpoints included; a single-point axis collapses to the midpoint.
    auto train2 = configs_in_split(res2, Split::train);
    std::set<double> a_values;
    for (const auto& c : train2)
        if (c.family == Family::uniform) a_values.insert(c.spec.param(0));
    EXPECT_EQ(a_values, (std::set<double>{-5.0, 2.0}));
    auto res1 = generate_benchmark(1, {}, {"uniform"});
    auto train1 = configs_in_split(res1, Split::train);
    ASSERT_EQ(train1.size(), 1u);
    EXPECT_DOUBLE_EQ(train1[0].spec.param(0), -1.5);
    EXPECT_DOUBLE_EQ(train1[0].spec.param(1), 3.0);
}

TEST(GenerateBenchmark, FamilyFilterAndOverrides) {
    auto grid = generate_benchmark(5, {{"uniform", 2}}, {"uniform", "bernoulli"});
    EXPECT_EQ(configs_in_split(grid, Split::train).size(), 4u);
    EXPECT_EQ(configs_in_split(grid, Split::unseen_param_test).size(), 1u);
    EXPECT_EQ(configs_in_split(grid, Split::ood_test).size(), 3u);
    for (const auto& c : grid)
        EXPECT_TRUE(c.family == Family::uniform || c.family == Family::bernoulli) << c.id;

    EXPECT_THROW(generate_benchmark(5, {}, {"gauss"}), ConfigError);
    EXPECT_THROW(generate_benchmark(0), ConfigError);
    EXPECT_THROW(generate_benchmark(5, {{"uniform", 0}}, {}), ConfigError);
    EXPECT_THROW(generate_benchmark(5, {{"gauss", 3}}, {}), ConfigError);
}

TEST(GenerateBenchmark, HypergeomTaggedCountsDeriveFromRatios) {
    auto grid = generate_benchmark(5, {}, {"hypergeom"});
    auto train = configs_in_split(grid, Split::train);
    ASSERT_EQ(train.size(), 45u);
    std::set<std::vector<double>> tuples;
    for (const auto& c : train) {
        double M = c.spec.param(0), N = c.spec.param(1), K = c.spec.param(2);
        EXPECT_EQ(K, std::round(K));
        EXPECT_LE(N, M);
        EXPECT_LE(K, M);
        tuples.insert({M, N, K});
    }
    EXPECT_EQ(tuples.size(), 45u);
    EXPECT_TRUE(tuples.count({30, 5, 6}));
    EXPECT_TRUE(tuples.count({80, 15, 52}));
}

}  // namespace
}  // namespace distcal
