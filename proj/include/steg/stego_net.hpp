#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "steg/codec.hpp"
#include "steg/rng.hpp"
#include "steg/tensor.hpp"

namespace steg {

struct NetConfig {
    int side = 64;        // square image side H
    int payload_bits = 32;
    double alpha = 0.1;   // residual strength
    std::vector<int> enc_widths = {32, 64, 128};  // U-Net channels, coarse to fine is reversed
    std::vector<int> loc_widths = {8, 16, 16};    // localization head channels
    std::vector<int> dec_widths = {16, 32, 64};   // message head channels

    void validate() const;  // InvalidConfig
};

// Named weight tensors plus the shape metadata needed to rebuild the graph.
// Entries whose name starts with "const." are fixed buffers (sampling grids,
// pooling scales) rather than trainable weights.
struct StegoParams {
    NetConfig cfg;
    std::vector<std::pair<std::string, Tensor>> weights;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::vector<Tensor> trainable();
    void enable_grads();
    bool all_finite() const;
};

StegoParams init_params(const NetConfig& cfg, std::uint64_t seed);

// dense L -> (H/8)^2 grid, bilinearly upsampled to a 1x1xHxH plane
Tensor expand_message(Tape* t, const Bits& bits, const StegoParams& p);  // LengthMismatch

// stego = clamp(cover + alpha * tanh(unet(concat(cover, plane))), 0, 1)
Tensor encode(Tape* t, const Tensor& cover, const Bits& bits, const StegoParams& p);

// affine warp by theta = (a b tx c d ty) over normalized [-1,1] coordinates
Tensor stn_warp(Tape* t, const Tensor& feature, const Tensor& theta);  // NonFiniteTheta

Tensor decode_logits(Tape* t, const Tensor& stego, const StegoParams& p);

// bit i is 1 iff sigmoid(logit) > 0.5, i.e. logit > 0; the tie maps to 0
Bits logits_to_bits(const Tensor& logits);

Bits random_bits(int n, Rng& rng);

void save_checkpoint(const StegoParams& p, const std::string& path);
StegoParams load_checkpoint(const std::string& path);

}  // namespace steg
