#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "distcal/errors.hpp"
#include "distcal/model.hpp"
#include "distcal/optimizer.hpp"
#include "distcal/vocabulary.hpp"

// Versioned binary checkpoints: model shape, vocabulary names, parameters,
// and (optionally) optimizer state, with bit-exact double round trips.

namespace distcal {

struct Checkpoint {
    ModelConfig config;
    std::vector<std::string> vocab_names;
    std::vector<double> params;
    bool has_optimizer = false;
    OptimizerConfig opt_config;
    long long opt_step = 0;
    std::vector<double> opt_m, opt_v;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'D', 'C', 'A', 'L', 'C', 'K', 'P', '1'};

class ByteWriter {
  public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
    void u8(std::uint8_t v) { out_.push_back(v); }
    void i32(std::int32_t v) { raw(static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)), 4); }
    void i64(std::int64_t v) { raw(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { raw(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s) {
        i32(static_cast<std::int32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }

  private:
    void raw(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t>& out_;
};

class ByteReader {
  public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    std::uint8_t u8() { return data_[need(1)]; }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(raw(4))); }
    std::int64_t i64() { return static_cast<std::int64_t>(raw(8)); }
    double f64() { return std::bit_cast<double>(raw(8)); }
    std::string str() {
        std::int32_t n = i32();
        if (n < 0) throw ConfigError("corrupt checkpoint: negative string length");
        std::size_t at = need(static_cast<std::size_t>(n));
        return std::string(reinterpret_cast<const char*>(data_ + at), static_cast<std::size_t>(n));
    }
    bool done() const { return pos_ == size_; }

  private:
    std::size_t need(std::size_t n) {
        if (pos_ + n > size_) throw ConfigError("corrupt checkpoint: truncated data");
        std::size_t at = pos_;
        pos_ += n;
        return at;
    }
    std::uint64_t raw(int bytes) {
        std::size_t at = need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(data_[at + static_cast<std::size_t>(i)]) << (8 * i);
        return v;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Model& model, const Vocabulary& vocab,
                                                   const AdamW* opt = nullptr) {
    std::vector<std::uint8_t> out;
    detail::ByteWriter w(out);
    for (char c : detail::kCkptMagic) w.u8(static_cast<std::uint8_t>(c));
    const ModelConfig& cfg = model.config();
    w.i32(cfg.vocab_size);
    w.i32(cfg.context_length);
    w.i32(cfg.d_model);
    w.i32(cfg.n_heads);
    w.i32(cfg.n_layers);
    w.i32(cfg.d_ff);
    w.f64(cfg.temperature);
    w.i32(vocab.size());
    for (int i = 0; i < vocab.size(); ++i) w.str(vocab.token_name(i));
    w.i64(static_cast<std::int64_t>(model.param_count()));
    for (double p : model.params()) w.f64(p);
    w.u8(opt ? 1 : 0);
    if (opt) {
        const OptimizerConfig& oc = opt->config();
        w.f64(oc.base_lr);
        w.f64(oc.weight_decay);
        w.f64(oc.beta1);
        w.f64(oc.beta2);
        w.f64(oc.eps);
        w.f64(oc.warmup_frac);
        w.i32(oc.total_steps);
        w.i64(opt->step_count());
        for (double m : opt->first_moment()) w.f64(m);
        for (double v : opt->second_moment()) w.f64(v);
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes.data(), bytes.size());
    for (char c : detail::kCkptMagic)
        if (r.u8() != static_cast<std::uint8_t>(c))
            throw ConfigError("not a model checkpoint (bad magic)");
    Checkpoint ck;
    ck.config.vocab_size = r.i32();
    ck.config.context_length = r.i32();
    ck.config.d_model = r.i32();
    ck.config.n_heads = r.i32();
    ck.config.n_layers = r.i32();
    ck.config.d_ff = r.i32();
    ck.config.temperature = r.f64();
    std::int32_t vn = r.i32();
    for (std::int32_t i = 0; i < vn; ++i) ck.vocab_names.push_back(r.str());
    std::int64_t np = r.i64();
    ck.params.resize(static_cast<std::size_t>(np));
    for (auto& p : ck.params) p = r.f64();
    ck.has_optimizer = r.u8() != 0;
    if (ck.has_optimizer) {
        ck.opt_config.base_lr = r.f64();
        ck.opt_config.weight_decay = r.f64();
        ck.opt_config.beta1 = r.f64();
        ck.opt_config.beta2 = r.f64();
        ck.opt_config.eps = r.f64();
        ck.opt_config.warmup_frac = r.f64();
        ck.opt_config.total_steps = r.i32();
        ck.opt_step = r.i64();
        ck.opt_m.resize(static_cast<std::size_t>(np));
        for (auto& m : ck.opt_m) m = r.f64();
        ck.opt_v.resize(static_cast<std::size_t>(np));
        for (auto& v : ck.opt_v) v = r.f64();
    }
    if (!r.done()) throw ConfigError("corrupt checkpoint: trailing data");
    return ck;
}

inline Model model_from_checkpoint(const Checkpoint& ck) {
    Model model(ck.config, 0);
    if (model.param_count() != ck.params.size())
        throw ConfigError("checkpoint parameter count does not match its configuration");
    model.params() = ck.params;
    return model;
}

inline AdamW optimizer_from_checkpoint(const Checkpoint& ck) {
    if (!ck.has_optimizer) throw ConfigError("checkpoint carries no optimizer state");
    AdamW opt(ck.opt_config, ck.opt_m.size());
    opt.restore(ck.opt_step, ck.opt_m, ck.opt_v);
    return opt;
}

inline void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                            const AdamW* opt = nullptr) {
    std::vector<std::uint8_t> bytes = encode_checkpoint(model, vocab, opt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace distcal
