#include "steg/stego_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace steg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'N', 'I', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

int coarse_side(const NetConfig& cfg) { return cfg.side / 8; }

// grid that bilinearly upsamples a gs x gs plane to side x side
Tensor upsample_grid(int side, int gs) {
    Tensor g({2, side, side});
    double* d = g.data();
    const double f = static_cast<double>(gs) / side;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double px = (x + 0.5) * f - 0.5;
            const double py = (y + 0.5) * f - 0.5;
            d[static_cast<std::size_t>(y) * side + x] = gs > 1 ? 2.0 * px / (gs - 1) - 1.0 : 0.0;
            d[static_cast<std::size_t>(side) * side + y * side + x] =
                gs > 1 ? 2.0 * py / (gs - 1) - 1.0 : 0.0;
        }
    return g;
}

// rows map theta = (a b tx c d ty) to the flattened sampling grid:
// first side*side rows produce gx = a*xn + b*yn + tx, the rest produce gy
Tensor warp_base(int side) {
    Tensor m({2 * side * side, 6});
    double* d = m.data();
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double xn = side > 1 ? 2.0 * x / (side - 1) - 1.0 : 0.0;
            const double yn = side > 1 ? 2.0 * y / (side - 1) - 1.0 : 0.0;
            double* rx = d + (static_cast<std::size_t>(y) * side + x) * 6;
            rx[0] = xn;
            rx[1] = yn;
            rx[2] = 1.0;
            double* ry = d + (static_cast<std::size_t>(side) * side + y * side + x) * 6;
            ry[3] = xn;
            ry[4] = yn;
            ry[5] = 1.0;
        }
    return m;
}

struct WeightSpec {
    std::string name;
    std::vector<int> shape;
    int fan_in;  // 0 marks a bias (zero init), -1 a normalization gain (ones init)
};

// canonical layer list; init, checkpoint i/o and the forward passes all agree
std::vector<WeightSpec> weight_specs(const NetConfig& cfg) {
    const int w1 = cfg.enc_widths[0], w2 = cfg.enc_widths[1], w3 = cfg.enc_widths[2];
    const int l1 = cfg.loc_widths[0], l2 = cfg.loc_widths[1], l3 = cfg.loc_widths[2];
    const int d1 = cfg.dec_widths[0], d2 = cfg.dec_widths[1], d3 = cfg.dec_widths[2];
    const int gs = coarse_side(cfg);
    std::vector<WeightSpec> s;
    auto conv = [&s](const std::string& n, int co, int ci, int k) {
        s.push_back({n + ".w", {co, ci, k, k}, ci * k * k});
        s.push_back({n + ".b", {co}, 0});
    };
    // normalized conv: the instance norm absorbs any bias, so none is allocated
    auto nconv = [&s](const std::string& n, int co, int ci, int k) {
        s.push_back({n + ".w", {co, ci, k, k}, ci * k * k});
        s.push_back({n + ".norm.g", {co}, -1});
        s.push_back({n + ".norm.b", {co}, 0});
    };
    auto tconv = [&s](const std::string& n, int ci, int co) {
        s.push_back({n + ".w", {ci, co, 2, 2}, ci});
        s.push_back({n + ".b", {co}, 0});
    };
    s.push_back({"msg.w", {gs * gs, cfg.payload_bits}, cfg.payload_bits});
    s.push_back({"msg.b", {gs * gs}, 0});
    conv("enc.in", w1, 4, 3);
    conv("enc.down1", w2, w1, 3);
    conv("enc.down2", w3, w2, 3);
    conv("enc.down3", w3, w3, 3);
    tconv("enc.up3", w3, w3);
    conv("enc.mix3", w3, 2 * w3, 3);
    tconv("enc.up2", w3, w2);
    conv("enc.mix2", w2, 2 * w2, 3);
    tconv("enc.up1", w2, w1);
    conv("enc.mix1", w1, 2 * w1, 3);
    conv("enc.out", 3, w1, 1);
    nconv("loc1", l1, 3, 3);
    nconv("loc2", l2, l1, 3);
    nconv("loc3", l3, l2, 3);
    conv("loc.tail", l3, l3, gs);
    s.push_back({"loc.fc.w", {6, l3}, l3});
    s.push_back({"loc.fc.b", {6}, 0});
    nconv("dec1", d1, 3, 3);
    nconv("dec2", d2, d1, 3);
    nconv("dec3", d3, d2, 3);
    conv("dec.tail", d3, d3, gs);
    s.push_back({"dec.fc.w", {cfg.payload_bits, d3}, d3});
    s.push_back({"dec.fc.b", {cfg.payload_bits}, 0});
    return s;
}

void append_constants(StegoParams& p) {
    p.weights.emplace_back("const.msggrid", upsample_grid(p.cfg.side, coarse_side(p.cfg)));
    p.weights.emplace_back("const.warpbase", warp_base(p.cfg.side));
    p.weights.emplace_back("const.identity6", Tensor({6}, {1, 0, 0, 0, 1, 0}));
}

}  // namespace

void NetConfig::validate() const {
    if (side < 16 || side > 400 || side % 8 != 0)
        throw InvalidConfig("side must be a multiple of 8 in [16, 400]");
    if (payload_bits < 16 || payload_bits > 128)
        throw InvalidConfig("payload_bits must be in [16, 128]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must be in [0, 1]");
    for (const auto* ws : {&enc_widths, &loc_widths, &dec_widths}) {
        if (ws->size() != 3) throw InvalidConfig("each width list needs exactly 3 entries");
        for (int w : *ws)
            if (w < 1 || w > 512) throw InvalidConfig("channel widths must be in [1, 512]");
    }
}

Tensor& StegoParams::at(const std::string& name) {
    for (auto& [n, t] : weights)
        if (n == name) return t;
    throw Error("no such weight: " + name);
}

const Tensor& StegoParams::at(const std::string& name) const {
    for (const auto& [n, t] : weights)
        if (n == name) return t;
    throw Error("no such weight: " + name);
}

std::vector<Tensor> StegoParams::trainable() {
    std::vector<Tensor> out;
    for (auto& [n, t] : weights)
        if (n.rfind("const.", 0) != 0) out.push_back(t);
    return out;
}

void StegoParams::enable_grads() {
    for (auto& [n, t] : weights)
        if (n.rfind("const.", 0) != 0) t.set_requires_grad(true);
}

bool StegoParams::all_finite() const {
    for (const auto& [n, t] : weights)
        for (int i = 0; i < t.size(); ++i)
            if (!std::isfinite(t.data()[i])) return false;
    return true;
}

StegoParams init_params(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    StegoParams p;
    p.cfg = cfg;
    Rng rng(mix_seed(seed, 0x5354454741ULL));
    for (const auto& spec : weight_specs(cfg)) {
        Tensor t(spec.shape);
        if (spec.fan_in > 0) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
        } else if (spec.fan_in < 0) {
            for (int i = 0; i < t.size(); ++i) t.data()[i] = 1.0;
        }
        p.weights.emplace_back(spec.name, std::move(t));
    }
    append_constants(p);
    return p;
}

Tensor expand_message(Tape* t, const Bits& bits, const StegoParams& p) {
    if (static_cast<int>(bits.size()) != p.cfg.payload_bits)
        throw LengthMismatch("expand_message: payload length mismatch");
    Tensor bt({p.cfg.payload_bits});
    for (int i = 0; i < p.cfg.payload_bits; ++i) bt.data()[i] = bits[static_cast<std::size_t>(i)];
    const int gs = coarse_side(p.cfg);
    Tensor coarse = ops::dense(t, bt, p.at("msg.w"), p.at("msg.b"));
    Tensor plane = coarse.reshaped({1, 1, gs, gs});
    return ops::bilinear_sample(t, plane, p.at("const.msggrid"));
}

Tensor encode(Tape* t, const Tensor& cover, const Bits& bits, const StegoParams& p) {
    const int H = p.cfg.side;
    if (cover.ndim() != 4 || cover.dim(0) != 1 || cover.dim(1) != 3 || cover.dim(2) != H ||
        cover.dim(3) != H)
        throw ShapeMismatch("encode: cover must be {1,3,H,H} matching the model");
    Tensor plane = expand_message(t, bits, p);
    Tensor x0 = ops::concat_channels(t, cover, plane);

    auto conv = [&](const Tensor& x, const char* n, int stride, int pad) {
        return ops::conv2d(t, x, p.at(std::string(n) + ".w"), p.at(std::string(n) + ".b"),
                           {stride, pad});
    };
    Tensor e1 = ops::relu(t, conv(x0, "enc.in", 1, 1));
    Tensor e2 = ops::relu(t, conv(e1, "enc.down1", 2, 1));
    Tensor e3 = ops::relu(t, conv(e2, "enc.down2", 2, 1));
    Tensor bo = ops::relu(t, conv(e3, "enc.down3", 2, 1));
    Tensor u3 = ops::relu(t, ops::transposed_upsample(t, bo, p.at("enc.up3.w"), p.at("enc.up3.b")));
    Tensor m3 = ops::relu(t, conv(ops::concat_channels(t, u3, e3), "enc.mix3", 1, 1));
    Tensor u2 = ops::relu(t, ops::transposed_upsample(t, m3, p.at("enc.up2.w"), p.at("enc.up2.b")));
    Tensor m2 = ops::relu(t, conv(ops::concat_channels(t, u2, e2), "enc.mix2", 1, 1));
    Tensor u1 = ops::relu(t, ops::transposed_upsample(t, m2, p.at("enc.up1.w"), p.at("enc.up1.b")));
    Tensor m1 = ops::relu(t, conv(ops::concat_channels(t, u1, e1), "enc.mix1", 1, 1));
    Tensor res = ops::tanh(t, conv(m1, "enc.out", 1, 0));
    return ops::clamp(t, ops::add(t, cover, ops::scale(t, res, p.cfg.alpha)), 0.0, 1.0);
}

Tensor stn_warp(Tape* t, const Tensor& feature, const Tensor& theta) {
    if (theta.ndim() != 1 || theta.dim(0) != 6)
        throw ShapeMismatch("stn_warp: theta must hold 6 values");
    for (int i = 0; i < 6; ++i)
        if (!std::isfinite(theta.data()[i])) throw NonFiniteTheta("stn_warp: non-finite theta");
    if (feature.ndim() != 4 || feature.dim(0) != 1)
        throw ShapeMismatch("stn_warp: feature must be {1,c,h,w}");
    const int side = feature.dim(2);
    if (feature.dim(3) != side) throw ShapeMismatch("stn_warp: feature must be square");
    Tensor base = warp_base(side);
    Tensor grid = ops::dense(t, theta, base, Tensor()).reshaped({2, side, side});
    return ops::bilinear_sample(t, feature, grid);
}

Tensor decode_logits(Tape* t, const Tensor& stego, const StegoParams& p) {
    const int H = p.cfg.side;
    if (stego.ndim() != 4 || stego.dim(0) != 1 || stego.dim(1) != 3 || stego.dim(2) != H ||
        stego.dim(3) != H)
        throw ShapeMismatch("decode: stego must be {1,3,H,H} matching the model");
    auto conv = [&](const Tensor& x, const char* n) {
        const std::string base(n);
        Tensor c = ops::conv2d(t, x, p.at(base + ".w"), Tensor(), {2, 1});
        return ops::relu(
            t, ops::instance_norm(t, c, p.at(base + ".norm.g"), p.at(base + ".norm.b")));
    };
    // grid-sized linear readout to 1x1, so pooling keeps per-cell information
    // and no activation can gate the gradient path
    const int gs = coarse_side(p.cfg);
    auto tail = [&](const Tensor& x, const char* stem) {
        const std::string base(stem);
        return ops::conv2d(t, x, p.at(base + ".w"), p.at(base + ".b"), {gs, 0});
    };

    Tensor lh = tail(conv(conv(conv(stego, "loc1"), "loc2"), "loc3"), "loc.tail");
    Tensor raw = ops::dense(t, ops::channel_mean(t, lh), p.at("loc.fc.w"), p.at("loc.fc.b"));
    Tensor theta =
        ops::add(t, p.at("const.identity6"), ops::scale(t, ops::tanh(t, raw), 0.1));
    for (int i = 0; i < 6; ++i)
        if (!std::isfinite(theta.data()[i])) throw NonFiniteTheta("decode: non-finite theta");

    Tensor grid = ops::dense(t, theta, p.at("const.warpbase"), Tensor()).reshaped({2, H, H});
    Tensor rect = ops::bilinear_sample(t, stego, grid);

    Tensor dh = tail(conv(conv(conv(rect, "dec1"), "dec2"), "dec3"), "dec.tail");
    return ops::dense(t, ops::channel_mean(t, dh), p.at("dec.fc.w"), p.at("dec.fc.b"));
}

Bits logits_to_bits(const Tensor& logits) {
    Bits out(static_cast<std::size_t>(logits.size()));
    for (int i = 0; i < logits.size(); ++i) out[static_cast<std::size_t>(i)] = logits.data()[i] > 0.0 ? 1 : 0;
    return out;
}

Bits random_bits(int n, Rng& rng) {
    Bits out(static_cast<std::size_t>(n));
    for (auto& b : out) b = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    return out;
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ofstream& f, const std::string& s) {
    put_u32(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw CorruptTensor("checkpoint truncated");
    return v;
}

std::string get_str(std::ifstream& f, std::uint32_t cap = 1u << 20) {
    const std::uint32_t n = get_u32(f);
    if (n > cap) throw CorruptTensor("checkpoint string length out of range");
    std::string s(n, '\0');
    if (n && !f.read(s.data(), n)) throw CorruptTensor("checkpoint truncated");
    return s;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[static_cast<std::size_t>(i)]);
    }
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t next = s.find(',', pos);
        out.push_back(std::stoi(s.substr(pos, next - pos)));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

}  // namespace

void save_checkpoint(const StegoParams& p, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof kMagic);
    put_u32(f, kVersion);

    char alpha_str[64];
    std::snprintf(alpha_str, sizeof alpha_str, "%.17g", p.cfg.alpha);
    const std::vector<std::pair<std::string, std::string>> meta = {
        {"H", std::to_string(p.cfg.side)},
        {"L", std::to_string(p.cfg.payload_bits)},
        {"alpha", alpha_str},
        {"enc_widths", join_ints(p.cfg.enc_widths)},
        {"loc_widths", join_ints(p.cfg.loc_widths)},
        {"dec_widths", join_ints(p.cfg.dec_widths)},
    };
    put_u32(f, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        put_str(f, k);
        put_str(f, v);
    }

    put_u32(f, static_cast<std::uint32_t>(p.weights.size()));
    for (const auto& [name, t] : p.weights) {
        put_str(f, name);
        put_u32(f, static_cast<std::uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) put_u32(f, static_cast<std::uint32_t>(t.dim(i)));
        const std::uint64_t count = static_cast<std::uint64_t>(t.size());
        f.write(reinterpret_cast<const char*>(&count), sizeof count);
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(sizeof(double) * count));
    }
    if (!f) throw IoFailure("checkpoint write failed: " + path);
}

StegoParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open checkpoint: " + path);
    char magic[8];
    if (!f.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw BadMagic("not a checkpoint file: " + path);
    const std::uint32_t version = get_u32(f);
    if (version != kVersion)
        throw VersionUnsupported("checkpoint version " + std::to_string(version));

    NetConfig cfg;
    const std::uint32_t nmeta = get_u32(f);
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        const std::string k = get_str(f);
        const std::string v = get_str(f);
        if (k == "H") cfg.side = std::stoi(v);
        else if (k == "L") cfg.payload_bits = std::stoi(v);
        else if (k == "alpha") cfg.alpha = std::stod(v);
        else if (k == "enc_widths") cfg.enc_widths = split_ints(v);
        else if (k == "loc_widths") cfg.loc_widths = split_ints(v);
        else if (k == "dec_widths") cfg.dec_widths = split_ints(v);
    }
    try {
        cfg.validate();
    } catch (const InvalidConfig& e) {
        throw CorruptTensor(std::string("checkpoint metadata invalid: ") + e.what());
    }

    StegoParams p;
    p.cfg = cfg;
    const std::uint32_t ntensors = get_u32(f);
    for (std::uint32_t i = 0; i < ntensors; ++i) {
        const std::string name = get_str(f);
        const std::uint32_t ndim = get_u32(f);
        if (ndim == 0 || ndim > 8) throw CorruptTensor("tensor rank out of range: " + name);
        std::vector<int> shape(ndim);
        std::uint64_t prod = 1;
        for (auto& d : shape) {
            d = static_cast<int>(get_u32(f));
            if (d < 1) throw CorruptTensor("bad tensor dimension: " + name);
            prod *= static_cast<std::uint64_t>(d);
        }
        std::uint64_t count = 0;
        if (!f.read(reinterpret_cast<char*>(&count), sizeof count))
            throw CorruptTensor("checkpoint truncated");
        if (count != prod || count > (1ull << 32))
            throw CorruptTensor("tensor size disagrees with shape: " + name);
        Tensor t(shape);
        if (!f.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(sizeof(double) * count)))
            throw CorruptTensor("checkpoint truncated");
        p.weights.emplace_back(name, std::move(t));
    }

    // the expected layer set for this config must be present with exact shapes
    try {
        for (const auto& spec : weight_specs(cfg)) {
            const Tensor& t = p.at(spec.name);
            if (t.shape() != spec.shape) throw CorruptTensor("unexpected shape for " + spec.name);
        }
        p.at("const.msggrid");
        p.at("const.warpbase");
        p.at("const.identity6");
    } catch (const CorruptTensor&) {
        throw;
    } catch (const Error& e) {
        throw CorruptTensor(e.what());
    }
    return p;
}

}  // namespace steg
