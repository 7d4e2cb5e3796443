#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "distcal/errors.hpp"
#include "distcal/model.hpp"

// AdamW with decoupled weight decay and a cosine learning-rate schedule with
// linear warmup.

namespace distcal {

struct OptimizerConfig {
    double base_lr = 2e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double warmup_frac = 0.03;
    int total_steps = 1;
};

class AdamW {
  public:
    AdamW(const OptimizerConfig& cfg, std::size_t n_params)
        : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

    const OptimizerConfig& config() const { return cfg_; }
    long long step_count() const { return step_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

    void restore(long long step, std::vector<double> m, std::vector<double> v) {
        step_ = step;
        m_ = std::move(m);
        v_ = std::move(v);
    }

    // Learning rate at a 0-based step: linear 0 -> base over the warmup
    // steps, then cosine decay to 0 at total_steps.
    double schedule(int step) const {
        int warmup = static_cast<int>(std::ceil(cfg_.warmup_frac * cfg_.total_steps));
        if (step <= warmup)
            return warmup == 0 ? cfg_.base_lr
                               : cfg_.base_lr * static_cast<double>(step) / warmup;
        int span = cfg_.total_steps - warmup;
        if (span <= 0) return 0.0;
        double progress = static_cast<double>(step - warmup) / span;
        if (progress > 1.0) progress = 1.0;
        return cfg_.base_lr * 0.5 * (1.0 + std::cos(kPi * progress));
    }

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        if (params.size() != m_.size() || grad.size() != m_.size())
            throw ConfigError("optimizer/parameter size mismatch");
        for (double g : grad)
            if (!std::isfinite(g)) throw TrainingDivergedError("non-finite gradient");
        const double lr = schedule(static_cast<int>(step_));
        const long long t = step_ + 1;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            double update = (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
            params[i] -= lr * update;
            params[i] -= lr * cfg_.weight_decay * params[i];
        }
        ++step_;
    }

    void step(Model& model, const std::vector<double>& grad) { step(model.params(), grad); }

  private:
    OptimizerConfig cfg_;
    std::vector<double> m_, v_;
    long long step_ = 0;
};

}  // namespace distcal
