#include "dscodec/train/optimizer.hpp"

#include <cmath>

namespace dscodec::train {

AdamW::AdamW(nn::ParamList params, const OptimSettings& settings) : params_(std::move(params)), settings_(settings) {
    for (const auto& p : params_) {
        m_.emplace_back(p.var.values().size(), 0.0);
        v_.emplace_back(p.var.values().size(), 0.0);
    }
}

double AdamW::grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_)
        for (double g : p.var.node()->grad) s += g * g;
    return std::sqrt(s);
}

void AdamW::zero_grad() { nn::zero_grads(params_); }

double AdamW::step(double lr) {
    const double norm = grad_norm();
    const double clip = settings_.clip_norm > 0.0 && norm > settings_.clip_norm ? settings_.clip_norm / norm : 1.0;
    ++steps_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& w = params_[i].var.values();
        const auto& g = params_[i].var.node()->grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g.empty() ? 0.0 : g[k] * clip;
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            w[k] -= lr * settings_.weight_decay * w[k];
            w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + settings_.eps);
        }
    }
    return norm;
}

}  // namespace dscodec::train
