#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dscodec/nn/params.hpp"
#include "dscodec/train/plan.hpp"

namespace dscodec::train {

// Decoupled-weight-decay Adam over a fixed parameter list.
class AdamW {
public:
    AdamW() = default;
    AdamW(nn::ParamList params, const OptimSettings& settings);

    // L2 norm over all parameter gradients (missing gradients count as 0).
    double grad_norm() const;
    // Clips to settings.clip_norm, applies one update, returns the pre-clip norm.
    double step(double lr);
    void zero_grad();

    const nn::ParamList& params() const { return params_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    std::vector<double>& first_moment(std::size_t i) { return m_[i]; }
    std::vector<double>& second_moment(std::size_t i) { return v_[i]; }

private:
    nn::ParamList params_;
    OptimSettings settings_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t steps_ = 0;
};

}  // namespace dscodec::train
