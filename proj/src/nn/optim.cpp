#include "compass/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace compass::nn {

AdamW::AdamW(std::vector<NamedParameter>& params, AdamWConfig config) : params_(&params), config_(config) {
    for (const auto& p : params) {
        m_.push_back(Mat::Zero(p.var.rows(), p.var.cols()));
        v_.push_back(Mat::Zero(p.var.rows(), p.var.cols()));
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    for (std::size_t i = 0; i < params_->size(); ++i) {
        Node* node = (*params_)[i].var.node();
        Mat& w = node->value;
        if (config_.weight_decay != 0.0) w *= static_cast<Scalar>(1.0 - lr * config_.weight_decay);
        if (node->grad.size() == 0) continue;
        const Mat& g = node->grad;
        m_[i] = b1 * m_[i] + (1.0f - b1) * g;
        v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
        const auto step_size = static_cast<Scalar>(lr / bc1);
        const auto denom_scale = static_cast<Scalar>(1.0 / std::sqrt(bc2));
        w.array() -= step_size * m_[i].array() /
                     (v_[i].array().sqrt() * denom_scale + static_cast<Scalar>(config_.eps));
    }
}

void AdamW::zero_grad() {
    for (auto& p : *params_) p.var.node()->zero_grad();
}

double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (p.var.grad().size() != 0) sq += static_cast<double>(p.var.grad().squaredNorm());
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const auto factor = static_cast<Scalar>(max_norm / (norm + 1e-6));
        for (auto& p : params) {
            if (p.var.node()->grad.size() != 0) p.var.node()->grad *= factor;
        }
    }
    return norm;
}

double linear_schedule(double initial_lr, long step, long total_steps, long warmup_steps) {
    if (total_steps <= 0) return 0.0;
    if (warmup_steps > 0 && step < warmup_steps) {
        return initial_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const long span = std::max(1L, total_steps - warmup_steps);
    const double frac = static_cast<double>(total_steps - std::min(step, total_steps)) / static_cast<double>(span);
    return initial_lr * std::clamp(frac, 0.0, 1.0);
}

}  // namespace compass::nn
