#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "distcal/distributions.hpp"
#include "distcal/errors.hpp"
#include "distcal/output_space.hpp"

// Character-level vocabulary: digits and numeric punctuation, the three
// reserved control tokens, one tag per family, one tag per parameter name.

namespace distcal {

class Vocabulary {
  public:
    static constexpr int kEos = 12;
    static constexpr int kBos = 13;
    static constexpr int kSep = 14;

    Vocabulary() {
        for (char c = '0'; c <= '9'; ++c) add(std::string(1, c));
        add(".");
        add("-");
        add("<eos>");
        add("<bos>");
        add("<sep>");
        for (const auto& info : family_table()) {
            family_id_[static_cast<std::size_t>(info.family)] = static_cast<int>(tokens_.size());
            add("fam:" + std::string(info.name));
        }
        for (const auto& info : family_table()) {
            for (int i = 0; i < info.n_params; ++i) {
                std::string name(info.params[static_cast<std::size_t>(i)]);
                if (param_id_.count(name) == 0) {
                    param_id_[name] = static_cast<int>(tokens_.size());
                    add("par:" + name);
                }
            }
        }
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    const std::string& token_name(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    int char_id(char c) const {
        if (c >= '0' && c <= '9') return c - '0';
        if (c == '.') return 10;
        if (c == '-') return 11;
        throw VocabularyError(std::string("no token for character '") + c + "'");
    }

    bool is_char(int id) const { return id >= 0 && id <= 11; }

    char id_char(int id) const {
        if (id >= 0 && id <= 9) return static_cast<char>('0' + id);
        if (id == 10) return '.';
        if (id == 11) return '-';
        throw VocabularyError("token " + std::to_string(id) + " is not a character token");
    }

    int family_id(Family f) const { return family_id_[static_cast<std::size_t>(f)]; }

    int param_id(const std::string& name) const {
        auto it = param_id_.find(name);
        if (it == param_id_.end()) throw VocabularyError("no token for parameter " + name);
        return it->second;
    }

  private:
    void add(std::string name) { tokens_.push_back(std::move(name)); }

    std::vector<std::string> tokens_;
    std::array<int, kFamilyCount> family_id_{};
    std::map<std::string, int> param_id_;
};

inline std::vector<int> tokenize_output(const Vocabulary& vocab, const std::string& canonical) {
    std::vector<int> out;
    out.reserve(canonical.size() + 1);
    for (char c : canonical) out.push_back(vocab.char_id(c));
    out.push_back(Vocabulary::kEos);
    return out;
}

// Inverse of tokenize_output; a trailing EOS is dropped if present.
inline std::string detokenize(const Vocabulary& vocab, const std::vector<int>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == Vocabulary::kEos && i + 1 == tokens.size()) break;
        out += vocab.id_char(tokens[i]);
    }
    return out;
}

// [BOS, family tag, then per parameter: tag, value digits at 5 decimals, SEP].
inline std::vector<int> encode_prompt(const Vocabulary& vocab, const DistributionSpec& spec) {
    std::vector<int> out;
    out.push_back(Vocabulary::kBos);
    out.push_back(vocab.family_id(spec.family()));
    const auto& info = spec.info();
    for (int i = 0; i < info.n_params; ++i) {
        out.push_back(vocab.param_id(std::string(info.params[static_cast<std::size_t>(i)])));
        for (char c : canonical_value(spec.param(i), 5)) out.push_back(vocab.char_id(c));
        out.push_back(Vocabulary::kSep);
    }
    return out;
}

}  // namespace distcal
