#include "steg/adam.hpp"

#include <cmath>

#include "steg/error.hpp"

namespace steg {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > 0.0) || !(cfg_.eps > 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) ||
        !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
        throw InvalidConfig("adam: bad hyperparameters");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        if (!p.defined() || !p.requires_grad())
            throw InvalidConfig("adam: every parameter needs a gradient buffer");
        m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        double* w = p.data();
        const double* g = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        const int n = p.size();
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(g[i])) throw NonFiniteGradient("adam: non-finite gradient");
            m[static_cast<std::size_t>(i)] =
                cfg_.beta1 * m[static_cast<std::size_t>(i)] + (1.0 - cfg_.beta1) * g[i];
            v[static_cast<std::size_t>(i)] =
                cfg_.beta2 * v[static_cast<std::size_t>(i)] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[static_cast<std::size_t>(i)] / bc1;
            const double vhat = v[static_cast<std::size_t>(i)] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace steg
