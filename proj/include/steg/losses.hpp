#pragma once

#include "steg/codec.hpp"
#include "steg/tensor.hpp"

namespace steg {

struct LossWeights {
    double lambda_r = 0.0;
    double lambda_p = 0.0;
    double lambda_m = 1.0;
};

// mean squared residual between stego and cover
Tensor l2_residual(Tape* t, const Tensor& cover, const Tensor& stego);  // ShapeMismatch

// Fixed multi-scale structural distance: mean squared difference of
// horizontal and vertical finite-difference gradients at three dyadic
// scales, plus the squared per-channel mean shift. The mean-shift term makes
// the value zero exactly when the images are equal (gradients alone cannot
// see a constant per-channel offset). Non-negative and differentiable.
Tensor perceptual_proxy(Tape* t, const Tensor& cover, const Tensor& stego);  // ShapeMismatch

// mean binary cross-entropy in the stable logit form
// mean(max(z,0) - z*y + log(1 + exp(-|z|)))
Tensor message_loss(Tape* t, const Tensor& logits, const Bits& bits);  // LengthMismatch

// lambda_r * l2_residual + lambda_p * perceptual_proxy + lambda_m * message_loss
Tensor total_loss(Tape* t, const Tensor& cover, const Tensor& stego, const Tensor& logits,
                  const Bits& bits, const LossWeights& w);

}  // namespace steg
