#pragma once

#include <vector>

#include "steg/tensor.hpp"

namespace steg {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First-order moment / second-order moment optimizer with bias correction.
// Parameters are registered once; step() reads their accumulated gradients,
// updates the values in place and leaves the gradients untouched, so callers
// control when to zero them.
class Adam {
   public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();
    void zero_grad();

    long long steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<double>& moment1(std::size_t i) const { return m_[i]; }
    const std::vector<double>& moment2(std::size_t i) const { return v_[i]; }

   private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    long long t_ = 0;
};

}  // namespace steg
