#pragma once

#include <cmath>
#include <iostream>
#include <vector>

#include "protosent/model.hpp"

namespace protosent {

// Linear warmup to the base rate, then cosine annealing to zero at
// total_steps.
struct Schedule {
    std::size_t warmup_steps = 0;
    std::size_t total_steps = 1;
    double base_lr = 1e-3;
};

inline double lr_at(std::size_t step, const Schedule& s) {
    if (step > s.total_steps) {
        std::cerr << "warning: lr_at(" << step << ") beyond total_steps " << s.total_steps
                  << ", clamping to 0\n";
        return 0.0;
    }
    if (s.warmup_steps > 0 && step <= s.warmup_steps)
        return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    if (s.total_steps == s.warmup_steps) return s.base_lr;
    const double progress = static_cast<double>(step - s.warmup_steps) /
                            static_cast<double>(s.total_steps - s.warmup_steps);
    return s.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_gradients(const std::vector<ParamRef>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (real g : p.tensor.node()->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const real factor = static_cast<real>(max_norm / norm);
        for (const auto& p : params)
            if (p.tensor.has_grad())
                for (real& g : p.tensor.node()->grad) g *= factor;
    }
    return norm;
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adaptive moments with decoupled weight decay: the decay is applied directly
// to the weights and never enters the moment accumulators. Decay touches only
// params flagged for it (projection matrices; never biases, norms, the
// prototype bank, positional tables, or the cls token).
class AdamW {
public:
    AdamW(std::vector<ParamRef> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].tensor.numel(), real(0));
            v_[i].assign(params_[i].tensor.numel(), real(0));
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& node = *params_[i].tensor.node();
            node.ensure_grad();
            auto& w = node.value;
            const auto& g = node.grad;
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                m[j] = static_cast<real>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j]);
                v[j] = static_cast<real>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j]);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                w[j] -= static_cast<real>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
            if (params_[i].decay && cfg_.weight_decay > 0.0) {
                const real shrink = static_cast<real>(lr * cfg_.weight_decay);
                for (auto& x : w) x -= shrink * x;
            }
        }
    }

    std::uint64_t step_count() const { return t_; }
    void set_step_count(std::uint64_t t) { t_ = t; }
    const std::vector<ParamRef>& params() const { return params_; }
    std::vector<std::vector<real>>& first_moments() { return m_; }
    std::vector<std::vector<real>>& second_moments() { return v_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    std::vector<ParamRef> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<real>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace protosent
