#pragma once

#include "hear/nn.hpp"

#include <cstdint>

namespace hear {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled weight decay Adam. Parameters without an accumulated gradient
// this step are left untouched.
class AdamW {
  public:
    AdamW(nn::ParameterStore& params, AdamWConfig config);

    void step(double lr);
    std::int64_t steps() const { return steps_; }
    const AdamWConfig& config() const { return config_; }

    // Moments in parameter registration order, for checkpointing.
    const std::vector<nn::Matrix>& first_moments() const { return m_; }
    const std::vector<nn::Matrix>& second_moments() const { return v_; }
    void restore(std::int64_t steps, std::vector<nn::Matrix> first, std::vector<nn::Matrix> second);

  private:
    nn::ParameterStore* params_;
    AdamWConfig config_;
    std::int64_t steps_ = 0;
    std::vector<nn::Matrix> m_, v_;
};

// Rescales all accumulated gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(nn::ParameterStore& params, double max_norm);

}  // namespace hear
