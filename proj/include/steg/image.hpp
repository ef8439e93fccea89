#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "steg/rng.hpp"
#include "steg/tensor.hpp"

namespace steg {

// 8-bit RGB PNG in/out. Tensors are {1,3,h,w} planar with values in [0,1]
// mapped as value/255; saving rounds to the nearest 8-bit level.
Tensor load_png(const std::string& path);   // ImageUnreadable
void save_png(const std::string& path, const Tensor& img);  // IoFailure

Tensor resize_bilinear(const Tensor& img, int h, int w);

// peak signal-to-noise ratio for signals on [0,1]; +inf when images are equal
double psnr(const Tensor& a, const Tensor& b);

std::vector<std::string> list_pngs(const std::string& dir);  // sorted paths
// loads every PNG in dir, resized to side x side; EmptyDataset, UnreadableImage
std::vector<Tensor> load_dataset(const std::string& dir, int side);

// procedural test corpus: gradients, rings, stripes, checkers, soft blobs
Tensor synth_image(int side, Rng& rng);
void generate_corpus(const std::string& dir, int count, int side, std::uint64_t seed);

}  // namespace steg
