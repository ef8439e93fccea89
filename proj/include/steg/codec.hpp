#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace steg {

// message bits, one byte per bit, values 0 or 1
using Bits = std::vector<std::uint8_t>;

enum class SourceKind { TextDirect, RegistryId };

struct Payload {
    Bits raw_bits;
    SourceKind kind = SourceKind::TextDirect;
    std::uint64_t registry_id = 0;  // meaningful only for RegistryId
};

// Hamming(7,4): codeword (d1 d2 d3 d4 p1 p2 p3), corrects one bit per block
Bits ecc_encode(const Bits& data);                    // BadLength unless length % 4 == 0
std::pair<Bits, int> ecc_decode(const Bits& coded);   // BadLength unless length % 7 == 0

// fraction of 7-bit blocks whose syndrome is nonzero (i.e. that needed a
// correction); the decode-failure heuristic thresholds this
double ecc_inconsistency(const Bits& coded);

double bit_accuracy(const Bits& a, const Bits& b);    // LengthMismatch

std::uint64_t fnv1a64(const std::string& s);

// usable data bits for a coded budget: floor(budget*4/7), floored to bytes
int data_bit_capacity(int budget_bits);

Bits id_to_bits(std::uint64_t id);                    // 64 bits, most significant first
std::uint64_t bits_to_id(const Bits& bits64);

Payload text_to_payload(const std::string& text, int budget_bits, SourceKind kind);
std::string payload_to_text(const Payload& p);
// ECC-decode the first 112 raw bits and read the leading 64 data bits
std::uint64_t payload_to_id(const Bits& raw_bits);

inline constexpr int kIdCodedBits = 112;  // 64-bit id after Hamming(7,4)

}  // namespace steg
