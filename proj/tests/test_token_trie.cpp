#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "distcal/token_trie.hpp"
#include "distcal/vocabulary.hpp"

using namespace distcal;

namespace {

OutputSpace literal_space(std::vector<std::pair<std::string, double>> items) {
    OutputSpace s;
    double c = 0.0;
    for (auto& [canon, mass] : items) s.entries.push_back({canon, mass, c++});
    return s;
}

// Every root-to-leaf path with its probability under step-wise q products.
void enumerate_paths(const TokenTrie& trie, const Vocabulary& vocab, int idx, double prob,
                     std::string prefix, std::map<std::string, double>& out) {
    const TrieNode& n = trie.node(idx);
    if (n.children.empty()) {
        out[prefix] += prob;
        return;
    }
    for (const auto& [tok, child] : n.children) {
        double q = trie.node(child).mass / n.mass;
        std::string next = prefix;
        if (tok != Vocabulary::kEos) next += vocab.id_char(tok);
        enumerate_paths(trie, vocab, child, prob * q, next, out);
    }
}

int count_leaves(const TokenTrie& trie, int idx) {
    const TrieNode& n = trie.node(idx);
    if (n.children.empty()) return 1;
    int total = 0;
    for (const auto& [tok, child] : n.children) total += count_leaves(trie, child);
    return total;
}

void check_child_normalization(const TokenTrie& trie, int idx, const char* label) {
    const TrieNode& n = trie.node(idx);
    if (n.children.empty()) return;
    double q_sum = 0.0, mass_sum = 0.0;
    for (const auto& [tok, child] : n.children) {
        q_sum += trie.node(child).mass / n.mass;
        mass_sum += trie.node(child).mass;
    }
    ASSERT_NEAR(q_sum, 1.0, 1e-12) << label;
    ASSERT_NEAR(mass_sum, n.mass, 1e-12 * std::max(1.0, n.mass)) << label;
    for (const auto& [tok, child] : n.children) check_child_normalization(trie, child, label);
}

}  // namespace

TEST(Vocabulary, LayoutAndReservedTokens) {
    Vocabulary vocab;
    EXPECT_EQ(vocab.size(), 70);
    EXPECT_EQ(vocab.char_id('0'), 0);
    EXPECT_EQ(vocab.char_id('9'), 9);
    EXPECT_EQ(vocab.char_id('.'), 10);
    EXPECT_EQ(vocab.char_id('-'), 11);
    EXPECT_EQ(Vocabulary::kEos, 12);
    EXPECT_EQ(Vocabulary::kBos, 13);
    EXPECT_EQ(Vocabulary::kSep, 14);
    EXPECT_EQ(vocab.family_id(Family::uniform), 15);
    EXPECT_EQ(vocab.family_id(Family::invgauss), 44);
    EXPECT_EQ(vocab.token_name(15), "fam:uniform");
    EXPECT_EQ(vocab.token_name(45), "par:a");

    std::set<std::string> names;
    for (int i = 0; i < vocab.size(); ++i) names.insert(vocab.token_name(i));
    EXPECT_EQ(static_cast<int>(names.size()), vocab.size());
    EXPECT_THROW(vocab.char_id('x'), VocabularyError);
    EXPECT_THROW(vocab.param_id("zeta"), VocabularyError);
}

TEST(Tokenizer, OutputExamplesAndRoundTrip) {
    Vocabulary vocab;
    EXPECT_EQ(tokenize_output(vocab, "0"), (std::vector<int>{0, 12}));
    EXPECT_EQ(tokenize_output(vocab, "-3.09023"),
              (std::vector<int>{11, 3, 10, 0, 9, 0, 2, 3, 12}));
    EXPECT_THROW(tokenize_output(vocab, "1x2"), VocabularyError);

    OutputSpace s = build_output_space(DistributionSpec(Family::norm, {3.5, 3.0}), 5, 1001);
    for (const auto& e : s.entries)
        EXPECT_EQ(detokenize(vocab, tokenize_output(vocab, e.canonical)), e.canonical);
}

TEST(Tokenizer, PromptEncoding) {
    Vocabulary vocab;
    std::vector<int> got = encode_prompt(vocab, DistributionSpec(Family::bernoulli, {0.5}));
    std::vector<int> want = {Vocabulary::kBos, vocab.family_id(Family::bernoulli),
                             vocab.param_id("p"), 0, 10, 5, 0, 0, 0, 0, Vocabulary::kSep};
    EXPECT_EQ(got, want);

    // One changed parameter digit moves exactly one token.
    std::vector<int> a = encode_prompt(vocab, DistributionSpec(Family::norm, {3.5, 3.0}));
    std::vector<int> b = encode_prompt(vocab, DistributionSpec(Family::norm, {3.6, 3.0}));
    ASSERT_EQ(a.size(), b.size());
    int diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i] ? 1 : 0;
    EXPECT_EQ(diff, 1);

    // Injective over a cross-family sample of configs.
    std::vector<DistributionSpec> sample = {
        DistributionSpec(Family::uniform, {3.5, 7.0}),
        DistributionSpec(Family::uniform, {3.5, 7.00001}),
        DistributionSpec(Family::norm, {3.5, 3.0}),
        DistributionSpec(Family::laplace, {3.5, 3.0}),
        DistributionSpec(Family::logistic, {3.5, 3.0}),
        DistributionSpec(Family::gumbel_r, {3.5, 3.0}),
        DistributionSpec(Family::cauchy, {3.5, 3.0}),
        DistributionSpec(Family::gamma, {7.0, 7.0}),
        DistributionSpec(Family::beta, {7.0, 7.0}),
        DistributionSpec(Family::f, {12.0, 24.0}),
    };
    std::set<std::vector<int>> seen;
    for (const auto& spec : sample) EXPECT_TRUE(seen.insert(encode_prompt(vocab, spec)).second);
    EXPECT_EQ(seen.size(), sample.size());
}

TEST(TokenTrie, BuildExamples) {
    Vocabulary vocab;
    TokenTrie flat = build_trie(literal_space({{"0", 0.5}, {"1", 0.5}}), vocab);
    EXPECT_NEAR(flat.root().mass, 1.0, 1e-9);
    ASSERT_EQ(flat.root().children.size(), 2u);
    int n0 = flat.child(0, 0), n1 = flat.child(0, 1);
    ASSERT_GE(n0, 0);
    ASSERT_GE(n1, 0);
    EXPECT_DOUBLE_EQ(flat.node(n0).mass, 0.5);
    EXPECT_DOUBLE_EQ(flat.node(n1).mass, 0.5);
    ASSERT_EQ(flat.node(n0).children.size(), 1u);
    EXPECT_GE(flat.child(n0, Vocabulary::kEos), 0);

    TokenTrie nested =
        build_trie(literal_space({{"10", 0.5}, {"11", 0.25}, {"12", 0.25}}), vocab);
    ASSERT_EQ(nested.root().children.size(), 1u);
    int one = nested.child(0, 1);
    ASSERT_GE(one, 0);
    EXPECT_DOUBLE_EQ(nested.node(one).mass, 1.0);
    EXPECT_DOUBLE_EQ(nested.node(nested.child(one, 0)).mass, 0.5);
    EXPECT_DOUBLE_EQ(nested.node(nested.child(one, 1)).mass, 0.25);
    EXPECT_DOUBLE_EQ(nested.node(nested.child(one, 2)).mass, 0.25);
}

TEST(TokenTrie, NextTokenTargetExamples) {
    Vocabulary vocab;
    OutputSpace bern = build_output_space(DistributionSpec(Family::bernoulli, {0.3}), 5, 1001);
    TokenTrie trie = build_trie(bern, vocab);

    std::map<int, double> root_q = trie.next_token_target({});
    ASSERT_EQ(root_q.size(), 2u);
    EXPECT_NEAR(root_q.at(0), 0.7, 1e-12);
    EXPECT_NEAR(root_q.at(1), 0.3, 1e-12);

    std::map<int, double> after_zero = trie.next_token_target({0});
    ASSERT_EQ(after_zero.size(), 1u);
    EXPECT_DOUBLE_EQ(after_zero.at(Vocabulary::kEos), 1.0);

    EXPECT_THROW(trie.next_token_target({5}), TriePathError);
    EXPECT_THROW(trie.next_token_target({0, 0}), TriePathError);
}

TEST(TokenTrie, PathProductRecoversEntryMass) {
    Vocabulary vocab;
    std::vector<DistributionSpec> specs = {
        DistributionSpec(Family::bernoulli, {0.3}),
        DistributionSpec(Family::binom, {2.0, 0.5}),
        DistributionSpec(Family::binom, {25.0, 0.5}),
        DistributionSpec(Family::norm, {3.5, 3.0}),
        DistributionSpec(Family::lognorm, {2.5, 2.0}),
        DistributionSpec(Family::skellam, {10.5, 10.5}),
    };
    for (const auto& spec : specs) {
        OutputSpace space = build_output_space(spec, 5, 16384);
        TokenTrie trie = build_trie(space, vocab);
        for (const auto& entry : space.entries) {
            if (entry.mass <= 0.0) continue;
            std::vector<int> path = tokenize_output(vocab, entry.canonical);
            int cur = 0;
            double prod = 1.0;
            for (int tok : path) {
                int nxt = trie.child(cur, tok);
                ASSERT_GE(nxt, 0) << entry.canonical;
                prod *= trie.node(nxt).mass / trie.node(cur).mass;
                cur = nxt;
            }
            ASSERT_NEAR(prod, entry.mass, 1e-12) << spec.info().name << " " << entry.canonical;
        }
    }
}

TEST(TokenTrie, ChildNormalizationAtScale) {
    Vocabulary vocab;
    std::vector<DistributionSpec> specs = {
        DistributionSpec(Family::uniform, {3.5, 7.0}),
        DistributionSpec(Family::norm, {3.5, 3.0}),
        DistributionSpec(Family::lognorm, {2.5, 2.0}),
        DistributionSpec(Family::cauchy, {3.5, 3.0}),
        DistributionSpec(Family::nbinom, {15.0, 0.15}),
        DistributionSpec(Family::hypergeom, {100.0, 20.0, 50.0}),
        DistributionSpec(Family::betabinom, {40.0, 6.5, 6.5}),
        DistributionSpec(Family::invgauss, {5.0, 7.0}),
    };
    for (const auto& spec : specs) {
        OutputSpace space = build_output_space(spec, 5, 16384);
        TokenTrie trie = build_trie(space, vocab);
        EXPECT_NEAR(trie.root().mass, 1.0, 1e-9) << spec.info().name;
        check_child_normalization(trie, 0, spec.info().name.data());
        int positive = 0;
        for (const auto& e : space.entries) positive += e.mass > 0.0 ? 1 : 0;
        EXPECT_EQ(count_leaves(trie, 0), positive) << spec.info().name;
    }
}

TEST(TokenTrie, StepwiseSamplingReproducesSpaceMasses) {
    Vocabulary vocab;
    std::vector<DistributionSpec> specs = {
        DistributionSpec(Family::binom, {25.0, 0.5}),
        DistributionSpec(Family::geom, {0.125}),
        DistributionSpec(Family::uniform, {0.0, 1.0}),
    };
    std::vector<int> decimals = {5, 5, 2};
    for (std::size_t i = 0; i < specs.size(); ++i) {
        OutputSpace space = build_output_space(specs[i], decimals[i], 1000);
        ASSERT_LE(space.entries.size(), 1000u);
        TokenTrie trie = build_trie(space, vocab);
        std::map<std::string, double> paths;
        enumerate_paths(trie, vocab, 0, 1.0, "", paths);
        int positive = 0;
        for (const auto& e : space.entries) {
            if (e.mass <= 0.0) continue;
            ++positive;
            auto it = paths.find(e.canonical);
            ASSERT_NE(it, paths.end()) << e.canonical;
            EXPECT_NEAR(it->second, e.mass, 1e-12) << specs[i].info().name << " " << e.canonical;
        }
        EXPECT_EQ(static_cast<int>(paths.size()), positive);
    }
}

TEST(TokenTrie, SerializationGolden) {
    Vocabulary vocab;
    TokenTrie trie = build_trie(literal_space({{"10", 0.5}, {"11", 0.25}, {"12", 0.25}}), vocab);
    std::string got = serialize_trie(trie, vocab);
    EXPECT_EQ(got,
              "trie v1 root 1\n"
              "  1 1\n"
              "    0 0.5\n"
              "      <eos> 0.5\n"
              "    1 0.25\n"
              "      <eos> 0.25\n"
              "    2 0.25\n"
              "      <eos> 0.25\n");
    EXPECT_EQ(got, serialize_trie(build_trie(literal_space({{"10", 0.5}, {"11", 0.25}, {"12", 0.25}}),
                                             vocab),
                                  vocab));
}
