#pragma once

#include <optional>
#include <string>

#include "steg/codec.hpp"
#include "steg/registry.hpp"
#include "steg/stego_net.hpp"

namespace steg {

enum class VerifyStatus { Match, Mismatch, NoRecord, DecodeFailed };

std::string to_string(VerifyStatus s);

struct Verdict {
    VerifyStatus status = VerifyStatus::DecodeFailed;
    std::optional<std::string> decoded_summary;
    std::optional<double> similarity;
    std::optional<std::uint64_t> decoded_id;
};

struct VerifyOptions {
    double threshold = 0.5;  // minimum Jaccard similarity for a Match
    int max_sentences = 3;   // summary length applied to the claimed text
};

// Pure decision layer: raw decoded bits -> verdict.  More than a quarter of
// the code blocks carrying a correction means the payload is untrustworthy
// (DecodeFailed); otherwise the leading 64 data bits name a registry entry.
Verdict verdict_from_bits(const Bits& raw_bits, const std::optional<std::string>& claimed_text,
                          const Registry& store, const VerifyOptions& opts = {});

// decode the image with the model, then judge the bits
Verdict verify(const Tensor& stego_image, const std::optional<std::string>& claimed_text,
               const StegoParams& params, const Registry& store, const VerifyOptions& opts = {});

// loads a PNG (resized to the model input if needed); ImageUnreadable
Verdict verify_file(const std::string& image_path, const std::optional<std::string>& claimed_text,
                    const StegoParams& params, const Registry& store,
                    const VerifyOptions& opts = {});

}  // namespace steg
