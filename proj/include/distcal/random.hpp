#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

namespace distcal {

// Source of uniform variates in [0, 1). Tests substitute a fixed sequence;
// everything downstream (sampling, shuffling, initialization) draws from this
// interface so runs are reproducible from a single seed.
class UniformSource {
  public:
    virtual ~UniformSource() = default;
    virtual double next() = 0;
};

class Rng final : public UniformSource {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // 53-bit mantissa construction; identical output for a given seed on any
    // platform, unlike std::generate_canonical.
    double next() override { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

// Replays a caller-supplied u-stream; throws when exhausted so a test that
// consumes more randomness than it budgeted fails loudly.
class SequenceSource final : public UniformSource {
  public:
    explicit SequenceSource(std::vector<double> values) : values_(std::move(values)) {}

    double next() override {
        if (pos_ >= values_.size()) throw std::logic_error("SequenceSource exhausted");
        return values_[pos_++];
    }

  private:
    std::vector<double> values_;
    std::size_t pos_ = 0;
};

// FNV-1a, used for deriving per-prompt seeds and hashing canonical configs.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stable per-key seed: independent prompts get independent streams while the
// whole run remains a function of one root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view key) {
    return splitmix64(root ^ fnv1a64(key));
}

// Fisher-Yates with an explicit u-stream (std::shuffle's draw pattern is
// implementation-defined, which would break cross-build determinism).
template <typename T>
void shuffle_in_place(std::vector<T>& items, UniformSource& u) {
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(u.next() * static_cast<double>(i));
        if (j >= i) j = i - 1;
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace distcal
