#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "distcal/errors.hpp"
#include "distcal/output_space.hpp"
#include "distcal/vocabulary.hpp"

// Prefix trie over tokenized canonical outputs. Every node stores the total
// mass of entries passing through it; next-token targets are the ratios of
// child mass to node mass.

namespace distcal {

struct TrieNode {
    double mass = 0.0;
    std::map<int, int> children;  // token id -> node index, ordered by id
};

class TokenTrie {
  public:
    const TrieNode& root() const { return nodes_[0]; }
    const TrieNode& node(int idx) const { return nodes_[static_cast<std::size_t>(idx)]; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Index of the node reached by following `prefix` from the root, or -1.
    int find(const std::vector<int>& prefix) const {
        int cur = 0;
        for (int tok : prefix) {
            const auto& ch = nodes_[static_cast<std::size_t>(cur)].children;
            auto it = ch.find(tok);
            if (it == ch.end()) return -1;
            cur = it->second;
        }
        return cur;
    }

    std::map<int, double> next_token_target(const std::vector<int>& prefix) const {
        int idx = find(prefix);
        if (idx < 0) throw TriePathError("prefix is not a trie path");
        return target_at(idx);
    }

    std::map<int, double> target_at(int node_idx) const {
        const TrieNode& n = nodes_[static_cast<std::size_t>(node_idx)];
        std::map<int, double> q;
        for (const auto& [tok, child] : n.children)
            q[tok] = nodes_[static_cast<std::size_t>(child)].mass / n.mass;
        return q;
    }

    int child(int node_idx, int token) const {
        const auto& ch = nodes_[static_cast<std::size_t>(node_idx)].children;
        auto it = ch.find(token);
        return it == ch.end() ? -1 : it->second;
    }

    friend TokenTrie build_trie(const OutputSpace& space, const Vocabulary& vocab);

  private:
    // Parent mass is recomputed as the sum of child masses in token order so
    // the child-sum invariant holds exactly, independent of insertion order.
    double recompute(int idx) {
        TrieNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.children.empty()) return n.mass;
        double sum = 0.0;
        for (const auto& [tok, child] : n.children) sum += recompute(child);
        n.mass = sum;
        return sum;
    }

    std::vector<TrieNode> nodes_;
};

inline TokenTrie build_trie(const OutputSpace& space, const Vocabulary& vocab) {
    TokenTrie trie;
    trie.nodes_.emplace_back();
    for (const auto& entry : space.entries) {
        if (entry.mass <= 0.0) continue;
        int cur = 0;
        trie.nodes_[0].mass += entry.mass;
        for (int tok : tokenize_output(vocab, entry.canonical)) {
            auto& children = trie.nodes_[static_cast<std::size_t>(cur)].children;
            auto it = children.find(tok);
            if (it == children.end()) {
                int fresh = static_cast<int>(trie.nodes_.size());
                children.emplace(tok, fresh);
                trie.nodes_.emplace_back();
                cur = fresh;
            } else {
                cur = it->second;
            }
            trie.nodes_[static_cast<std::size_t>(cur)].mass += entry.mass;
        }
    }
    if (trie.nodes_.size() > 1) trie.recompute(0);
    return trie;
}

namespace detail {

inline void serialize_trie_node(const TokenTrie& trie, const Vocabulary& vocab, int idx, int depth,
                                std::string& out) {
    const TrieNode& n = trie.node(idx);
    for (const auto& [tok, child] : n.children) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), " %.12g\n", trie.node(child).mass);
        out.append(static_cast<std::size_t>(depth) * 2, ' ');
        out += vocab.token_name(tok);
        out += buf;
        serialize_trie_node(trie, vocab, child, depth + 1, out);
    }
}

}  // namespace detail

// Nested text form for golden-file tests; one node per line, mass at 12
// significant digits, children in token-id order.
inline std::string serialize_trie(const TokenTrie& trie, const Vocabulary& vocab) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "trie v1 root %.12g\n", trie.root().mass);
    std::string out = buf;
    detail::serialize_trie_node(trie, vocab, 0, 1, out);
    return out;
}

}  // namespace distcal
