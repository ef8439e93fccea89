#include "steg/codec.hpp"

#include "steg/error.hpp"

namespace steg {

namespace {

void encode_block(const std::uint8_t* d, std::uint8_t* c) {
    c[0] = d[0];
    c[1] = d[1];
    c[2] = d[2];
    c[3] = d[3];
    c[4] = d[0] ^ d[1] ^ d[3];
    c[5] = d[0] ^ d[2] ^ d[3];
    c[6] = d[1] ^ d[2] ^ d[3];
}

// syndrome (s1 s2 s3) -> index of the flipped bit in the codeword, -1 if clean
int syndrome_position(int s1, int s2, int s3) {
    const int s = s1 | (s2 << 1) | (s3 << 2);
    static const int pos[8] = {-1, 4, 5, 0, 6, 1, 2, 3};
    return pos[s];
}

}  // namespace

Bits ecc_encode(const Bits& data) {
    if (data.size() % 4 != 0) throw BadLength("ecc_encode: length must be a multiple of 4");
    Bits out(data.size() / 4 * 7);
    for (std::size_t b = 0; b < data.size() / 4; ++b) encode_block(&data[b * 4], &out[b * 7]);
    return out;
}

std::pair<Bits, int> ecc_decode(const Bits& coded) {
    if (coded.size() % 7 != 0) throw BadLength("ecc_decode: length must be a multiple of 7");
    Bits data(coded.size() / 7 * 4);
    int corrected = 0;
    for (std::size_t b = 0; b < coded.size() / 7; ++b) {
        std::uint8_t c[7];
        for (int i = 0; i < 7; ++i) c[i] = coded[b * 7 + i] & 1;
        const int s1 = c[4] ^ c[0] ^ c[1] ^ c[3];
        const int s2 = c[5] ^ c[0] ^ c[2] ^ c[3];
        const int s3 = c[6] ^ c[1] ^ c[2] ^ c[3];
        const int pos = syndrome_position(s1, s2, s3);
        if (pos >= 0) {
            c[pos] ^= 1;
            ++corrected;
        }
        for (int i = 0; i < 4; ++i) data[b * 4 + i] = c[i];
    }
    return {data, corrected};
}

double ecc_inconsistency(const Bits& coded) {
    if (coded.size() % 7 != 0) throw BadLength("ecc_inconsistency: length must be a multiple of 7");
    const std::size_t blocks = coded.size() / 7;
    if (blocks == 0) return 0.0;
    std::size_t flagged = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::uint8_t* c = &coded[b * 7];
        const int s1 = (c[4] ^ c[0] ^ c[1] ^ c[3]) & 1;
        const int s2 = (c[5] ^ c[0] ^ c[2] ^ c[3]) & 1;
        const int s3 = (c[6] ^ c[1] ^ c[2] ^ c[3]) & 1;
        if (s1 | s2 | s3) ++flagged;
    }
    return static_cast<double>(flagged) / static_cast<double>(blocks);
}

double bit_accuracy(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) throw LengthMismatch("bit_accuracy: lengths differ");
    if (a.empty()) throw LengthMismatch("bit_accuracy: empty vectors");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((a[i] & 1) == (b[i] & 1)) ++same;
    return static_cast<double>(same) / static_cast<double>(a.size());
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

int data_bit_capacity(int budget_bits) {
    const int raw = budget_bits * 4 / 7;
    return raw / 8 * 8;
}

Bits id_to_bits(std::uint64_t id) {
    Bits out(64);
    for (int i = 0; i < 64; ++i) out[i] = static_cast<std::uint8_t>((id >> (63 - i)) & 1);
    return out;
}

std::uint64_t bits_to_id(const Bits& bits64) {
    if (bits64.size() != 64) throw BadLength("bits_to_id: expects 64 bits");
    std::uint64_t id = 0;
    for (int i = 0; i < 64; ++i) id = (id << 1) | (bits64[i] & 1);
    return id;
}

Payload text_to_payload(const std::string& text, int budget_bits, SourceKind kind) {
    if (budget_bits < 16) throw BudgetTooSmall("payload budget below 16 bits");
    if (budget_bits > 128) throw BudgetTooSmall("payload budget above 128 bits");
    Payload p;
    p.kind = kind;
    Bits data;
    if (kind == SourceKind::RegistryId) {
        if (budget_bits < kIdCodedBits)
            throw BudgetTooSmall("registry-id payload needs at least 112 bits");
        p.registry_id = fnv1a64(text);
        data = id_to_bits(p.registry_id);
    } else {
        const int cap_bits = data_bit_capacity(budget_bits);
        if (cap_bits < 8) throw BudgetTooSmall("budget leaves no room for data");
        const std::size_t cap_bytes = static_cast<std::size_t>(cap_bits) / 8;
        // truncate at the last full UTF-8 character that fits
        std::size_t nbytes = text.size() < cap_bytes ? text.size() : cap_bytes;
        while (nbytes > 0 && nbytes < text.size() &&
               (static_cast<unsigned char>(text[nbytes]) & 0xC0) == 0x80)
            --nbytes;
        data.assign(static_cast<std::size_t>(cap_bits), 0);
        for (std::size_t i = 0; i < nbytes; ++i) {
            const unsigned char byte = static_cast<unsigned char>(text[i]);
            for (int b = 0; b < 8; ++b) data[i * 8 + b] = (byte >> (7 - b)) & 1;
        }
    }
    Bits coded = ecc_encode(data);
    coded.resize(static_cast<std::size_t>(budget_bits), 0);
    p.raw_bits = std::move(coded);
    return p;
}

std::string payload_to_text(const Payload& p) {
    const std::size_t usable = p.raw_bits.size() / 7 * 7;
    Bits coded(p.raw_bits.begin(), p.raw_bits.begin() + static_cast<std::ptrdiff_t>(usable));
    const Bits data = ecc_decode(coded).first;
    std::string out;
    for (std::size_t i = 0; i + 8 <= data.size(); i += 8) {
        unsigned char byte = 0;
        for (int b = 0; b < 8; ++b) byte = static_cast<unsigned char>((byte << 1) | (data[i + b] & 1));
        out.push_back(static_cast<char>(byte));
    }
    while (!out.empty() && out.back() == '\0') out.pop_back();
    return out;
}

std::uint64_t payload_to_id(const Bits& raw_bits) {
    if (raw_bits.size() < kIdCodedBits)
        throw BadLength("payload too short to carry a registry id");
    Bits coded(raw_bits.begin(), raw_bits.begin() + kIdCodedBits);
    const Bits data = ecc_decode(coded).first;
    return bits_to_id(Bits(data.begin(), data.begin() + 64));
}

}  // namespace steg
