#include "steg/verify.hpp"

#include "steg/error.hpp"
#include "steg/image.hpp"
#include "steg/summarize.hpp"

namespace steg {

std::string to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::Match: return "Match";
        case VerifyStatus::Mismatch: return "Mismatch";
        case VerifyStatus::NoRecord: return "NoRecord";
        case VerifyStatus::DecodeFailed: return "DecodeFailed";
    }
    return "DecodeFailed";
}

Verdict verdict_from_bits(const Bits& raw_bits, const std::optional<std::string>& claimed_text,
                          const Registry& store, const VerifyOptions& opts) {
    if (raw_bits.size() < kIdCodedBits)
        throw BadLength("verify: payload too short to carry a registry id");
    if (opts.threshold < 0.0 || opts.threshold > 1.0)
        throw InvalidConfig("verify: threshold outside [0, 1]");

    Verdict v;
    const std::size_t usable = raw_bits.size() / 7 * 7;
    const Bits coded(raw_bits.begin(), raw_bits.begin() + static_cast<std::ptrdiff_t>(usable));
    if (ecc_inconsistency(coded) > 0.25) {
        v.status = VerifyStatus::DecodeFailed;
        return v;
    }

    const std::uint64_t id = payload_to_id(raw_bits);
    v.decoded_id = id;
    const auto entry = store.get(id);
    if (!entry) {
        v.status = VerifyStatus::NoRecord;
        return v;
    }

    v.decoded_summary = entry->summary;
    if (!claimed_text) {
        v.status = VerifyStatus::Match;  // summary handed back for human judgment
        return v;
    }

    const std::string claimed_summary = summarize_extractive(*claimed_text, opts.max_sentences);
    const double sim = token_jaccard(entry->summary, claimed_summary);
    v.similarity = sim;
    v.status = sim >= opts.threshold ? VerifyStatus::Match : VerifyStatus::Mismatch;
    return v;
}

Verdict verify(const Tensor& stego_image, const std::optional<std::string>& claimed_text,
               const StegoParams& params, const Registry& store, const VerifyOptions& opts) {
    if (!params.all_finite()) throw NonFiniteOutput("verify: parameters are not finite");
    const Bits bits = logits_to_bits(decode_logits(nullptr, stego_image, params));
    return verdict_from_bits(bits, claimed_text, store, opts);
}

Verdict verify_file(const std::string& image_path, const std::optional<std::string>& claimed_text,
                    const StegoParams& params, const Registry& store, const VerifyOptions& opts) {
    Tensor img;
    try {
        img = load_png(image_path);
    } catch (const Error& e) {
        throw ImageUnreadable(std::string("verify: ") + e.what());
    }
    const int side = params.cfg.side;
    if (img.dim(2) != side || img.dim(3) != side) img = resize_bilinear(img, side, side);
    return verify(img, claimed_text, params, store, opts);
}

}  // namespace steg
