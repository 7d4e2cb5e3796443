#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "distcal/errors.hpp"
#include "distcal/random.hpp"
#include "distcal/token_trie.hpp"
#include "distcal/vocabulary.hpp"

// Small causal transformer over the token vocabulary, with hand-written
// analytic gradients. Parameters live in one flat vector so the optimizer
// and finite-difference checks can treat the model as a plain function.

namespace distcal {

struct ModelConfig {
    int vocab_size = 70;
    int context_length = 64;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    double temperature = 1.0;
};

// Generation-time view of a model: one stream per sampled sequence.
class TokenStream {
  public:
    virtual ~TokenStream() = default;
    // Consumes one token and returns the distribution over the next token.
    virtual std::vector<double> feed(int token) = 0;
};

class NextTokenModel {
  public:
    virtual ~NextTokenModel() = default;
    virtual int vocab_size() const = 0;
    virtual std::unique_ptr<TokenStream> stream() const = 0;
};

namespace detail {

inline void softmax_in_place(std::vector<double>& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

}  // namespace detail

// Distribution over next tokens from one logit row at temperature tau.
inline std::vector<double> probs_from_logits(const double* logits, int v, double tau) {
    std::vector<double> p(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) p[static_cast<std::size_t>(i)] = logits[i] / tau;
    detail::softmax_in_place(p);
    return p;
}

// Per-sequence activations retained for the backward pass.
struct ForwardPass {
    std::vector<int> tokens;
    int T = 0;

    struct LayerCache {
        std::vector<double> x_in;      // [T,d] residual stream entering the block
        std::vector<double> ln1_hat;   // [T,d] normalized ln1 activations
        std::vector<double> ln1_istd;  // [T]
        std::vector<double> q, k, v;   // [T,d]
        std::vector<double> probs;     // [heads,T,T] causal attention weights
        std::vector<double> att;       // [T,d] concatenated head outputs
        std::vector<double> x_mid;     // [T,d] after attention residual
        std::vector<double> ln2_hat;   // [T,d]
        std::vector<double> ln2_istd;  // [T]
        std::vector<double> ff_pre;    // [T,d_ff]
        std::vector<double> ff_act;    // [T,d_ff]
    };
    std::vector<LayerCache> layers;

    std::vector<double> x_final;   // [T,d] residual stream after the blocks
    std::vector<double> lnf_hat;   // [T,d]
    std::vector<double> lnf_istd;  // [T]
    std::vector<double> logits;    // [T,V]
};

class Model final : public NextTokenModel {
  public:
    explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        if (cfg.d_model % cfg.n_heads != 0)
            throw ConfigError("d_model must be divisible by n_heads");
        if (cfg.temperature <= 0.0) throw ConfigError("temperature must be positive");
        build_layout();
        params_.assign(total_params_, 0.0);
        init_weights(seed);
    }

    const ModelConfig& config() const { return cfg_; }
    int vocab_size() const override { return cfg_.vocab_size; }
    std::size_t param_count() const { return total_params_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    void set_temperature(double tau) {
        if (tau <= 0.0) throw ConfigError("temperature must be positive");
        cfg_.temperature = tau;
    }

    ForwardPass forward(const std::vector<int>& tokens) const {
        const int T = static_cast<int>(tokens.size());
        const int d = cfg_.d_model, H = cfg_.n_heads, dh = d / H, F = cfg_.d_ff,
                  V = cfg_.vocab_size;
        if (T < 1 || T > cfg_.context_length)
            throw ContextLengthError("sequence length " + std::to_string(T) +
                                     " outside [1, " + std::to_string(cfg_.context_length) + "]");
        for (int t : tokens)
            if (t < 0 || t >= V) throw VocabularyError("token id out of range: " + std::to_string(t));

        ForwardPass fp;
        fp.tokens = tokens;
        fp.T = T;
        std::vector<double> x(static_cast<std::size_t>(T) * d);
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < d; ++i)
                x[idx(t, i, d)] = params_[tok_emb_ + idx(tokens[static_cast<std::size_t>(t)], i, d)] +
                                  params_[pos_emb_ + idx(t, i, d)];

        fp.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
        for (int l = 0; l < cfg_.n_layers; ++l) {
            auto& c = fp.layers[static_cast<std::size_t>(l)];
            const Layer& L = layers_[static_cast<std::size_t>(l)];
            c.x_in = x;

            c.ln1_hat.resize(x.size());
            c.ln1_istd.resize(static_cast<std::size_t>(T));
            std::vector<double> h(x.size());
            layer_norm(x, L.ln1_g, L.ln1_b, T, d, h, c.ln1_hat, c.ln1_istd);

            c.q.assign(x.size(), 0.0);
            c.k.assign(x.size(), 0.0);
            c.v.assign(x.size(), 0.0);
            linear(h, L.wq, L.bq, T, d, d, c.q);
            linear(h, L.wk, L.bk, T, d, d, c.k);
            linear(h, L.wv, L.bv, T, d, d, c.v);

            c.probs.assign(static_cast<std::size_t>(H) * T * T, 0.0);
            c.att.assign(x.size(), 0.0);
            const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
            for (int hd = 0; hd < H; ++hd) {
                const int col = hd * dh;
                for (int t = 0; t < T; ++t) {
                    double* row = &c.probs[(static_cast<std::size_t>(hd) * T + t) * T];
                    double m = -1e300;
                    for (int u = 0; u <= t; ++u) {
                        double s = 0.0;
                        for (int i = 0; i < dh; ++i)
                            s += c.q[idx(t, col + i, d)] * c.k[idx(u, col + i, d)];
                        row[u] = s * scale;
                        m = std::max(m, row[u]);
                    }
                    double sum = 0.0;
                    for (int u = 0; u <= t; ++u) {
                        row[u] = std::exp(row[u] - m);
                        sum += row[u];
                    }
                    for (int u = 0; u <= t; ++u) row[u] /= sum;
                    for (int u = 0; u <= t; ++u)
                        for (int i = 0; i < dh; ++i)
                            c.att[idx(t, col + i, d)] += row[u] * c.v[idx(u, col + i, d)];
                }
            }

            std::vector<double> proj(x.size(), 0.0);
            linear(c.att, L.wo, L.bo, T, d, d, proj);
            c.x_mid = x;
            for (std::size_t i = 0; i < x.size(); ++i) c.x_mid[i] += proj[i];

            c.ln2_hat.resize(x.size());
            c.ln2_istd.resize(static_cast<std::size_t>(T));
            std::vector<double> h2(x.size());
            layer_norm(c.x_mid, L.ln2_g, L.ln2_b, T, d, h2, c.ln2_hat, c.ln2_istd);

            c.ff_pre.assign(static_cast<std::size_t>(T) * F, 0.0);
            linear(h2, L.w1, L.b1, T, d, F, c.ff_pre);
            c.ff_act.resize(c.ff_pre.size());
            for (std::size_t i = 0; i < c.ff_pre.size(); ++i) c.ff_act[i] = gelu(c.ff_pre[i]);

            std::vector<double> ff_out(x.size(), 0.0);
            linear(c.ff_act, L.w2, L.b2, T, F, d, ff_out);
            x = c.x_mid;
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += ff_out[i];
        }

        fp.x_final = x;
        fp.lnf_hat.resize(x.size());
        fp.lnf_istd.resize(static_cast<std::size_t>(T));
        std::vector<double> hf(x.size());
        layer_norm(x, lnf_g_, lnf_b_, T, d, hf, fp.lnf_hat, fp.lnf_istd);

        fp.logits.assign(static_cast<std::size_t>(T) * V, 0.0);
        linear(hf, w_out_, b_out_, T, d, V, fp.logits);
        return fp;
    }

    // Accumulates parameter gradients for dL/dlogits into `grad`.
    void backward(const ForwardPass& fp, const std::vector<double>& dlogits,
                  std::vector<double>& grad) const {
        const int T = fp.T, d = cfg_.d_model, H = cfg_.n_heads, dh = d / H, F = cfg_.d_ff,
                  V = cfg_.vocab_size;
        if (grad.size() != total_params_) grad.assign(total_params_, 0.0);

        std::vector<double> lnf_out(static_cast<std::size_t>(T) * d);
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < d; ++i)
                lnf_out[idx(t, i, d)] =
                    params_[lnf_g_ + static_cast<std::size_t>(i)] * fp.lnf_hat[idx(t, i, d)] +
                    params_[lnf_b_ + static_cast<std::size_t>(i)];

        std::vector<double> d_lnf_out(static_cast<std::size_t>(T) * d, 0.0);
        linear_backward(lnf_out, dlogits, w_out_, b_out_, T, d, V, d_lnf_out, grad);

        std::vector<double> dx(static_cast<std::size_t>(T) * d, 0.0);
        layer_norm_backward(fp.x_final, fp.lnf_hat, fp.lnf_istd, d_lnf_out, lnf_g_, lnf_b_, T, d,
                            dx, grad);

        for (int l = cfg_.n_layers - 1; l >= 0; --l) {
            const auto& c = fp.layers[static_cast<std::size_t>(l)];
            const Layer& L = layers_[static_cast<std::size_t>(l)];

            // dx currently holds the gradient at the block output.
            std::vector<double> d_ff_act(static_cast<std::size_t>(T) * F, 0.0);
            std::vector<double> ln2_out(static_cast<std::size_t>(T) * d);
            for (int t = 0; t < T; ++t)
                for (int i = 0; i < d; ++i)
                    ln2_out[idx(t, i, d)] =
                        params_[L.ln2_g + static_cast<std::size_t>(i)] * c.ln2_hat[idx(t, i, d)] +
                        params_[L.ln2_b + static_cast<std::size_t>(i)];
            linear_backward(c.ff_act, dx, L.w2, L.b2, T, F, d, d_ff_act, grad);

            std::vector<double> d_ff_pre(d_ff_act.size());
            for (std::size_t i = 0; i < d_ff_act.size(); ++i)
                d_ff_pre[i] = d_ff_act[i] * gelu_grad(c.ff_pre[i]);

            std::vector<double> d_ln2_out(static_cast<std::size_t>(T) * d, 0.0);
            linear_backward(ln2_out, d_ff_pre, L.w1, L.b1, T, d, F, d_ln2_out, grad);

            std::vector<double> d_x_mid(static_cast<std::size_t>(T) * d, 0.0);
            layer_norm_backward(c.x_mid, c.ln2_hat, c.ln2_istd, d_ln2_out, L.ln2_g, L.ln2_b, T, d,
                                d_x_mid, grad);
            for (std::size_t i = 0; i < d_x_mid.size(); ++i) d_x_mid[i] += dx[i];  // residual

            std::vector<double> ln1_out(static_cast<std::size_t>(T) * d);
            for (int t = 0; t < T; ++t)
                for (int i = 0; i < d; ++i)
                    ln1_out[idx(t, i, d)] =
                        params_[L.ln1_g + static_cast<std::size_t>(i)] * c.ln1_hat[idx(t, i, d)] +
                        params_[L.ln1_b + static_cast<std::size_t>(i)];

            std::vector<double> d_att(static_cast<std::size_t>(T) * d, 0.0);
            linear_backward(c.att, d_x_mid, L.wo, L.bo, T, d, d, d_att, grad);

            std::vector<double> dq(static_cast<std::size_t>(T) * d, 0.0);
            std::vector<double> dk(static_cast<std::size_t>(T) * d, 0.0);
            std::vector<double> dv(static_cast<std::size_t>(T) * d, 0.0);
            const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
            for (int hd = 0; hd < H; ++hd) {
                const int col = hd * dh;
                for (int t = 0; t < T; ++t) {
                    const double* row = &c.probs[(static_cast<std::size_t>(hd) * T + t) * T];
                    double dot = 0.0;
                    std::vector<double> dp(static_cast<std::size_t>(t) + 1);
                    for (int u = 0; u <= t; ++u) {
                        double s = 0.0;
                        for (int i = 0; i < dh; ++i)
                            s += d_att[idx(t, col + i, d)] * c.v[idx(u, col + i, d)];
                        dp[static_cast<std::size_t>(u)] = s;
                        dot += row[u] * s;
                        for (int i = 0; i < dh; ++i)
                            dv[idx(u, col + i, d)] += row[u] * d_att[idx(t, col + i, d)];
                    }
                    for (int u = 0; u <= t; ++u) {
                        double ds = row[u] * (dp[static_cast<std::size_t>(u)] - dot) * scale;
                        for (int i = 0; i < dh; ++i) {
                            dq[idx(t, col + i, d)] += ds * c.k[idx(u, col + i, d)];
                            dk[idx(u, col + i, d)] += ds * c.q[idx(t, col + i, d)];
                        }
                    }
                }
            }

            std::vector<double> d_ln1_out(static_cast<std::size_t>(T) * d, 0.0);
            linear_backward(ln1_out, dq, L.wq, L.bq, T, d, d, d_ln1_out, grad);
            linear_backward(ln1_out, dk, L.wk, L.bk, T, d, d, d_ln1_out, grad);
            linear_backward(ln1_out, dv, L.wv, L.bv, T, d, d, d_ln1_out, grad);

            std::vector<double> d_x_in(static_cast<std::size_t>(T) * d, 0.0);
            layer_norm_backward(c.x_in, c.ln1_hat, c.ln1_istd, d_ln1_out, L.ln1_g, L.ln1_b, T, d,
                                d_x_in, grad);
            for (std::size_t i = 0; i < d_x_in.size(); ++i) d_x_in[i] += d_x_mid[i];  // residual
            dx = std::move(d_x_in);
        }

        for (int t = 0; t < T; ++t)
            for (int i = 0; i < d; ++i) {
                grad[tok_emb_ + idx(fp.tokens[static_cast<std::size_t>(t)], i, d)] +=
                    dx[idx(t, i, d)];
                grad[pos_emb_ + idx(t, i, d)] += dx[idx(t, i, d)];
            }
    }

    std::unique_ptr<TokenStream> stream() const override;

  private:
    struct Layer {
        std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
    };

    static std::size_t idx(int row, int col, int width) {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }

    static double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); }
    static double gelu_grad(double x) {
        return 0.5 * (1.0 + std::erf(x * 0.7071067811865476)) +
               x * 0.3989422804014327 * std::exp(-0.5 * x * x);
    }

    void build_layout() {
        std::size_t off = 0;
        auto take = [&off](std::size_t n) {
            std::size_t at = off;
            off += n;
            return at;
        };
        const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
        const std::size_t V = static_cast<std::size_t>(cfg_.vocab_size);
        const std::size_t F = static_cast<std::size_t>(cfg_.d_ff);
        tok_emb_ = take(V * d);
        pos_emb_ = take(static_cast<std::size_t>(cfg_.context_length) * d);
        layers_.clear();
        for (int l = 0; l < cfg_.n_layers; ++l) {
            Layer L;
            L.ln1_g = take(d);
            L.ln1_b = take(d);
            L.wq = take(d * d);
            L.bq = take(d);
            L.wk = take(d * d);
            L.bk = take(d);
            L.wv = take(d * d);
            L.bv = take(d);
            L.wo = take(d * d);
            L.bo = take(d);
            L.ln2_g = take(d);
            L.ln2_b = take(d);
            L.w1 = take(d * F);
            L.b1 = take(F);
            L.w2 = take(F * d);
            L.b2 = take(d);
            layers_.push_back(L);
        }
        lnf_g_ = take(d);
        lnf_b_ = take(d);
        w_out_ = take(d * V);
        b_out_ = take(V);
        total_params_ = off;
    }

    // Gaussian init at variance 1/d_model for embeddings and projections;
    // norms at identity; output head zeroed so the initial policy is uniform.
    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
        auto fill_gauss = [&](std::size_t off, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                double u = rng.next();
                if (u <= 0.0) u = 0x1.0p-53;
                params_[off + i] = std_dev * probit(u);
            }
        };
        const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
        const std::size_t V = static_cast<std::size_t>(cfg_.vocab_size);
        const std::size_t F = static_cast<std::size_t>(cfg_.d_ff);
        fill_gauss(tok_emb_, V * d);
        fill_gauss(pos_emb_, static_cast<std::size_t>(cfg_.context_length) * d);
        for (const Layer& L : layers_) {
            for (std::size_t i = 0; i < d; ++i) params_[L.ln1_g + i] = 1.0;
            for (std::size_t i = 0; i < d; ++i) params_[L.ln2_g + i] = 1.0;
            fill_gauss(L.wq, d * d);
            fill_gauss(L.wk, d * d);
            fill_gauss(L.wv, d * d);
            fill_gauss(L.wo, d * d);
            fill_gauss(L.w1, d * F);
            fill_gauss(L.w2, F * d);
        }
        for (std::size_t i = 0; i < d; ++i) params_[lnf_g_ + i] = 1.0;
        // w_out_ and b_out_ stay zero.
    }

    // y[t] = x[t] * W + b with W stored [d_in, d_out] row-major.
    void linear(const std::vector<double>& x, std::size_t w_off, std::size_t b_off, int T,
                int d_in, int d_out, std::vector<double>& y) const {
        for (int t = 0; t < T; ++t) {
            double* yt = &y[idx(t, 0, d_out)];
            for (int j = 0; j < d_out; ++j) yt[j] = params_[b_off + static_cast<std::size_t>(j)];
            for (int i = 0; i < d_in; ++i) {
                const double xv = x[idx(t, i, d_in)];
                const double* wrow = &params_[w_off + idx(i, 0, d_out)];
                for (int j = 0; j < d_out; ++j) yt[j] += xv * wrow[j];
            }
        }
    }

    void linear_backward(const std::vector<double>& x, const std::vector<double>& dy,
                         std::size_t w_off, std::size_t b_off, int T, int d_in, int d_out,
                         std::vector<double>& dx, std::vector<double>& grad) const {
        for (int t = 0; t < T; ++t) {
            const double* dyt = &dy[idx(t, 0, d_out)];
            for (int j = 0; j < d_out; ++j) grad[b_off + static_cast<std::size_t>(j)] += dyt[j];
            for (int i = 0; i < d_in; ++i) {
                const double xv = x[idx(t, i, d_in)];
                double* gw = &grad[w_off + idx(i, 0, d_out)];
                const double* wrow = &params_[w_off + idx(i, 0, d_out)];
                double acc = 0.0;
                for (int j = 0; j < d_out; ++j) {
                    gw[j] += xv * dyt[j];
                    acc += wrow[j] * dyt[j];
                }
                dx[idx(t, i, d_in)] += acc;
            }
        }
    }

    static constexpr double kLnEps = 1e-5;

    void layer_norm(const std::vector<double>& x, std::size_t g_off, std::size_t b_off, int T,
                    int d, std::vector<double>& y, std::vector<double>& hat,
                    std::vector<double>& istd) const {
        for (int t = 0; t < T; ++t) {
            double mean = 0.0;
            for (int i = 0; i < d; ++i) mean += x[idx(t, i, d)];
            mean /= d;
            double var = 0.0;
            for (int i = 0; i < d; ++i) {
                double c = x[idx(t, i, d)] - mean;
                var += c * c;
            }
            var /= d;
            double inv = 1.0 / std::sqrt(var + kLnEps);
            istd[static_cast<std::size_t>(t)] = inv;
            for (int i = 0; i < d; ++i) {
                double h = (x[idx(t, i, d)] - mean) * inv;
                hat[idx(t, i, d)] = h;
                y[idx(t, i, d)] = params_[g_off + static_cast<std::size_t>(i)] * h +
                                  params_[b_off + static_cast<std::size_t>(i)];
            }
        }
    }

    void layer_norm_backward(const std::vector<double>& x, const std::vector<double>& hat,
                             const std::vector<double>& istd, const std::vector<double>& dy,
                             std::size_t g_off, std::size_t b_off, int T, int d,
                             std::vector<double>& dx, std::vector<double>& grad) const {
        (void)x;
        for (int t = 0; t < T; ++t) {
            double mean_dhat = 0.0, mean_dhat_hat = 0.0;
            for (int i = 0; i < d; ++i) {
                double dyv = dy[idx(t, i, d)];
                grad[b_off + static_cast<std::size_t>(i)] += dyv;
                grad[g_off + static_cast<std::size_t>(i)] += dyv * hat[idx(t, i, d)];
                double dhat = dyv * params_[g_off + static_cast<std::size_t>(i)];
                mean_dhat += dhat;
                mean_dhat_hat += dhat * hat[idx(t, i, d)];
            }
            mean_dhat /= d;
            mean_dhat_hat /= d;
            double inv = istd[static_cast<std::size_t>(t)];
            for (int i = 0; i < d; ++i) {
                double dhat = dy[idx(t, i, d)] * params_[g_off + static_cast<std::size_t>(i)];
                dx[idx(t, i, d)] +=
                    inv * (dhat - mean_dhat - hat[idx(t, i, d)] * mean_dhat_hat);
            }
        }
    }

    friend class DecodeSession;

    ModelConfig cfg_;
    std::vector<double> params_;
    std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, w_out_ = 0, b_out_ = 0;
    std::vector<Layer> layers_;
    std::size_t total_params_ = 0;
};

// Incremental decoding with cached keys/values; one session per generated
// sequence. Produces distributions identical to a full forward pass.
class DecodeSession final : public TokenStream {
  public:
    explicit DecodeSession(const Model& model) : m_(model) {
        kcache_.resize(static_cast<std::size_t>(m_.cfg_.n_layers));
        vcache_.resize(static_cast<std::size_t>(m_.cfg_.n_layers));
    }

    std::vector<double> feed(int token) override {
        const int d = m_.cfg_.d_model, H = m_.cfg_.n_heads, dh = d / H, F = m_.cfg_.d_ff,
                  V = m_.cfg_.vocab_size;
        if (token < 0 || token >= V)
            throw VocabularyError("token id out of range: " + std::to_string(token));
        if (pos_ >= m_.cfg_.context_length) throw ContextLengthError("decode past context length");

        std::vector<double> x(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            x[static_cast<std::size_t>(i)] = m_.params_[m_.tok_emb_ + Model::idx(token, i, d)] +
                                             m_.params_[m_.pos_emb_ + Model::idx(pos_, i, d)];

        for (int l = 0; l < m_.cfg_.n_layers; ++l) {
            const Model::Layer& L = m_.layers_[static_cast<std::size_t>(l)];
            std::vector<double> h = norm_row(x, L.ln1_g, L.ln1_b);
            std::vector<double> q = row_linear(h, L.wq, L.bq, d, d);
            std::vector<double> k = row_linear(h, L.wk, L.bk, d, d);
            std::vector<double> v = row_linear(h, L.wv, L.bv, d, d);
            auto& kc = kcache_[static_cast<std::size_t>(l)];
            auto& vc = vcache_[static_cast<std::size_t>(l)];
            kc.insert(kc.end(), k.begin(), k.end());
            vc.insert(vc.end(), v.begin(), v.end());
            const int past = pos_ + 1;

            std::vector<double> att(static_cast<std::size_t>(d), 0.0);
            const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
            std::vector<double> row(static_cast<std::size_t>(past));
            for (int hd = 0; hd < H; ++hd) {
                const int col = hd * dh;
                double m = -1e300;
                for (int u = 0; u < past; ++u) {
                    double s = 0.0;
                    for (int i = 0; i < dh; ++i)
                        s += q[static_cast<std::size_t>(col + i)] * kc[Model::idx(u, col + i, d)];
                    row[static_cast<std::size_t>(u)] = s * scale;
                    m = std::max(m, row[static_cast<std::size_t>(u)]);
                }
                double sum = 0.0;
                for (int u = 0; u < past; ++u) {
                    row[static_cast<std::size_t>(u)] = std::exp(row[static_cast<std::size_t>(u)] - m);
                    sum += row[static_cast<std::size_t>(u)];
                }
                for (int u = 0; u < past; ++u)
                    for (int i = 0; i < dh; ++i)
                        att[static_cast<std::size_t>(col + i)] +=
                            row[static_cast<std::size_t>(u)] / sum * vc[Model::idx(u, col + i, d)];
            }
            std::vector<double> proj = row_linear(att, L.wo, L.bo, d, d);
            for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] += proj[static_cast<std::size_t>(i)];

            std::vector<double> h2 = norm_row(x, L.ln2_g, L.ln2_b);
            std::vector<double> pre = row_linear(h2, L.w1, L.b1, d, F);
            for (double& p : pre) p = Model::gelu(p);
            std::vector<double> out = row_linear(pre, L.w2, L.b2, F, d);
            for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] += out[static_cast<std::size_t>(i)];
        }

        std::vector<double> hf = norm_row(x, m_.lnf_g_, m_.lnf_b_);
        std::vector<double> logits = row_linear(hf, m_.w_out_, m_.b_out_, d, V);
        ++pos_;
        return probs_from_logits(logits.data(), V, m_.cfg_.temperature);
    }

  private:
    std::vector<double> norm_row(const std::vector<double>& x, std::size_t g_off,
                                 std::size_t b_off) const {
        const int d = static_cast<int>(x.size());
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= d;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + 1e-5);
        std::vector<double> y(x.size());
        for (int i = 0; i < d; ++i)
            y[static_cast<std::size_t>(i)] =
                m_.params_[g_off + static_cast<std::size_t>(i)] *
                    ((x[static_cast<std::size_t>(i)] - mean) * inv) +
                m_.params_[b_off + static_cast<std::size_t>(i)];
        return y;
    }

    std::vector<double> row_linear(const std::vector<double>& x, std::size_t w_off,
                                   std::size_t b_off, int d_in, int d_out) const {
        std::vector<double> y(static_cast<std::size_t>(d_out));
        for (int j = 0; j < d_out; ++j) y[static_cast<std::size_t>(j)] = m_.params_[b_off + static_cast<std::size_t>(j)];
        for (int i = 0; i < d_in; ++i) {
            const double xv = x[static_cast<std::size_t>(i)];
            const double* wrow = &m_.params_[w_off + Model::idx(i, 0, d_out)];
            for (int j = 0; j < d_out; ++j) y[static_cast<std::size_t>(j)] += xv * wrow[j];
        }
        return y;
    }

    const Model& m_;
    std::vector<std::vector<double>> kcache_, vcache_;
    int pos_ = 0;
};

inline std::unique_ptr<TokenStream> Model::stream() const {
    return std::make_unique<DecodeSession>(*this);
}

// Follows the trie targets exactly; control tokens reset the walk to the
// root, so distributions after the prompt equal q(.|completion prefix).
class TabularTrieModel final : public NextTokenModel {
  public:
    TabularTrieModel(const TokenTrie& trie, int vocab_size)
        : trie_(trie), vocab_size_(vocab_size) {}

    int vocab_size() const override { return vocab_size_; }

    std::unique_ptr<TokenStream> stream() const override {
        class Walk final : public TokenStream {
          public:
            Walk(const TokenTrie& trie, int v) : trie_(trie), v_(v) {}
            std::vector<double> feed(int token) override {
                // Character tokens advance the walk; anything outside the trie
                // (prompt digits for instance) detaches it until the next
                // control token resets to the root.
                if (token <= 11)
                    node_ = node_ < 0 ? -1 : trie_.child(node_, token);
                else
                    node_ = 0;
                std::vector<double> p(static_cast<std::size_t>(v_), 0.0);
                if (node_ < 0 || trie_.node(node_).children.empty()) {
                    std::fill(p.begin(), p.end(), 1.0 / v_);
                    return p;
                }
                for (const auto& [tok, q] : trie_.target_at(node_))
                    p[static_cast<std::size_t>(tok)] = q;
                return p;
            }

          private:
            const TokenTrie& trie_;
            int v_;
            int node_ = 0;
        };
        return std::make_unique<Walk>(trie_, vocab_size_);
    }

  private:
    const TokenTrie& trie_;
    int vocab_size_;
};

namespace detail {

inline double floored_log(double p) { return std::log(std::max(p, 1e-30)); }

// Log-probabilities of one position's next-token distribution.
inline std::vector<double> log_probs_row(const double* logits, int v, double tau) {
    std::vector<double> lp(static_cast<std::size_t>(v));
    double m = logits[0];
    for (int i = 1; i < v; ++i) m = std::max(m, logits[i]);
    double sum = 0.0;
    for (int i = 0; i < v; ++i) sum += std::exp((logits[i] - m) / tau);
    double lse = std::log(sum) + m / tau;
    for (int i = 0; i < v; ++i) lp[static_cast<std::size_t>(i)] = logits[i] / tau - lse;
    return lp;
}

}  // namespace detail

// Trie-matching objective: mean over the L+1 path prefixes of
// KL(q(.|prefix) || model), with the KL sum running over trie children only.
// When `grad` is non-null, `weight` times the analytic gradient is added.
inline double soft_loss(const Model& model, const std::vector<int>& prompt, const TokenTrie& trie,
                        const std::vector<int>& path, std::vector<double>* grad,
                        double weight = 1.0) {
    if (path.empty() || path.back() != Vocabulary::kEos)
        throw TriePathError("sampled path must end with EOS");
    const int L = static_cast<int>(path.size()) - 1;
    const int P = static_cast<int>(prompt.size());
    const int V = model.config().vocab_size;
    const double tau = model.config().temperature;

    std::vector<int> seq = prompt;
    seq.insert(seq.end(), path.begin(), path.end() - 1);
    ForwardPass fp = model.forward(seq);

    std::vector<double> dlogits;
    if (grad) dlogits.assign(fp.logits.size(), 0.0);

    double loss = 0.0;
    const double term_w = 1.0 / (L + 1);
    int node = 0;
    for (int k = 0; k <= L; ++k) {
        const int pos = P - 1 + k;
        const double* z = &fp.logits[static_cast<std::size_t>(pos) * V];
        std::vector<double> lp = detail::log_probs_row(z, V, tau);
        std::map<int, double> q = trie.target_at(node);
        if (q.empty()) throw TriePathError("path continues past a trie leaf");
        for (const auto& [tok, qv] : q)
            loss += term_w * qv * (detail::floored_log(qv) - lp[static_cast<std::size_t>(tok)]);
        if (grad) {
            double* dz = &dlogits[static_cast<std::size_t>(pos) * V];
            for (int i = 0; i < V; ++i)
                dz[i] = weight * term_w * std::exp(lp[static_cast<std::size_t>(i)]) / tau;
            for (const auto& [tok, qv] : q) dz[tok] -= weight * term_w * qv / tau;
        }
        node = trie.child(node, path[static_cast<std::size_t>(k)]);
        if (node < 0) throw TriePathError("sampled path is not a trie path");
    }
    if (grad) model.backward(fp, dlogits, *grad);
    return loss;
}

// Masked cross-entropy: mean negative log-likelihood of the completion
// tokens (EOS included), prompt positions excluded from the loss.
inline double hard_loss(const Model& model, const std::vector<int>& prompt,
                        const std::vector<int>& completion, std::vector<double>* grad,
                        double weight = 1.0) {
    if (completion.empty() || completion.back() != Vocabulary::kEos)
        throw VocabularyError("completion must end with EOS");
    const int L = static_cast<int>(completion.size()) - 1;
    const int P = static_cast<int>(prompt.size());
    const int V = model.config().vocab_size;
    const double tau = model.config().temperature;

    std::vector<int> seq = prompt;
    seq.insert(seq.end(), completion.begin(), completion.end() - 1);
    ForwardPass fp = model.forward(seq);

    std::vector<double> dlogits;
    if (grad) dlogits.assign(fp.logits.size(), 0.0);

    double loss = 0.0;
    const double term_w = 1.0 / (L + 1);
    for (int k = 0; k <= L; ++k) {
        const int pos = P - 1 + k;
        const int target = completion[static_cast<std::size_t>(k)];
        const double* z = &fp.logits[static_cast<std::size_t>(pos) * V];
        std::vector<double> lp = detail::log_probs_row(z, V, tau);
        loss -= term_w * lp[static_cast<std::size_t>(target)];
        if (grad) {
            double* dz = &dlogits[static_cast<std::size_t>(pos) * V];
            for (int i = 0; i < V; ++i)
                dz[i] = weight * term_w * std::exp(lp[static_cast<std::size_t>(i)]) / tau;
            dz[target] -= weight * term_w / tau;
        }
    }
    if (grad) model.backward(fp, dlogits, *grad);
    return loss;
}

// Interface-level soft loss used for probe models; mirrors soft_loss but
// reads distributions from a TokenStream instead of transformer logits.
inline double soft_loss_value(const NextTokenModel& model, const std::vector<int>& prompt,
                              const TokenTrie& trie, const std::vector<int>& path) {
    if (path.empty() || path.back() != Vocabulary::kEos)
        throw TriePathError("sampled path must end with EOS");
    const int L = static_cast<int>(path.size()) - 1;
    auto stream = model.stream();
    std::vector<double> pi;
    for (int tok : prompt) pi = stream->feed(tok);
    double loss = 0.0;
    int node = 0;
    for (int k = 0; k <= L; ++k) {
        std::map<int, double> q = trie.target_at(node);
        for (const auto& [tok, qv] : q)
            loss += qv * (detail::floored_log(qv) -
                          detail::floored_log(pi[static_cast<std::size_t>(tok)]));
        if (k < L) pi = stream->feed(path[static_cast<std::size_t>(k)]);
        node = trie.child(node, path[static_cast<std::size_t>(k)]);
        if (node < 0) throw TriePathError("sampled path is not a trie path");
    }
    return loss / (L + 1);
}

inline double hard_loss_value(const NextTokenModel& model, const std::vector<int>& prompt,
                              const std::vector<int>& completion) {
    if (completion.empty() || completion.back() != Vocabulary::kEos)
        throw VocabularyError("completion must end with EOS");
    auto stream = model.stream();
    std::vector<double> pi;
    for (int tok : prompt) pi = stream->feed(tok);
    double loss = 0.0;
    for (std::size_t k = 0; k < completion.size(); ++k) {
        loss -= detail::floored_log(pi[static_cast<std::size_t>(completion[k])]);
        if (k + 1 < completion.size()) pi = stream->feed(completion[k]);
    }
    return loss / static_cast<double>(completion.size());
}

}  // namespace distcal
