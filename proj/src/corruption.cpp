#include "steg/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "steg/kernels.hpp"

namespace steg {

namespace {

constexpr int kQuantBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

// libjpeg quality scaling
void scaled_quant_table(int quality, double out[64]) {
    const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    for (int i = 0; i < 64; ++i) {
        int q = (kQuantBase[i] * s + 50) / 100;
        out[i] = static_cast<double>(std::clamp(q, 1, 255));
    }
}

double soft_round(double x) { return x - std::sin(2.0 * M_PI * x) / (2.0 * M_PI); }
double soft_round_deriv(double x) { return 1.0 - std::cos(2.0 * M_PI * x); }

// solve the 8x8 system A h = b by Gaussian elimination with partial pivoting
void solve8(double a[8][9]) {
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-12)
            throw DegenerateQuad("homography system is singular");
        if (pivot != col)
            for (int j = 0; j < 9; ++j) std::swap(a[pivot][j], a[col][j]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int j = col; j < 9; ++j) a[r][j] -= f * a[col][j];
        }
    }
    for (int r = 0; r < 8; ++r) a[r][8] /= a[r][r];
}

constexpr double kSquare[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};

double det3(const double* h) {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

std::pair<double, double> parse_pair(const std::string& v) {
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw InvalidConfig("expected lo,hi but got: " + v);
    try {
        return {std::stod(v.substr(0, comma)), std::stod(v.substr(comma + 1))};
    } catch (const std::exception&) {
        throw InvalidConfig("bad numeric range: " + v);
    }
}

std::string format_pair(double lo, double hi) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", lo, hi);
    return buf;
}

}  // namespace

void CorruptionSpec::validate() const {
    if (perspective_jitter < 0.0 || perspective_jitter > 0.1)
        throw InvalidConfig("perspective_jitter must be in [0, 0.1]");
    if (blur_kernel_sizes.empty()) throw InvalidConfig("blur kernel list is empty");
    for (int k : blur_kernel_sizes)
        if (k < 1 || k % 2 == 0) throw InvalidConfig("blur kernels must be odd and >= 1");
    if (brightness_lo > brightness_hi || contrast_lo > contrast_hi ||
        noise_sigma_lo > noise_sigma_hi || jpeg_quality_lo > jpeg_quality_hi)
        throw InvalidConfig("range lower bound exceeds upper bound");
    if (noise_sigma_lo < 0.0) throw InvalidConfig("noise sigma must be non-negative");
    if (contrast_lo <= 0.0) throw InvalidConfig("contrast must stay positive");
    if (jpeg_quality_lo < 1 || jpeg_quality_hi > 100)
        throw InvalidConfig("jpeg quality must be in [1, 100]");
}

bool CorruptionSpec::any_enabled() const {
    return enable_warp || enable_blur || enable_brightness || enable_contrast || enable_noise ||
           enable_jpeg;
}

CorruptionSpec CorruptionSpec::none() { return CorruptionSpec{}; }

CorruptionSpec CorruptionSpec::digital() {
    CorruptionSpec s;
    s.enable_noise = true;
    s.noise_sigma_lo = 0.0;
    s.noise_sigma_hi = 0.02;
    s.enable_jpeg = true;
    s.jpeg_quality_lo = 80;
    s.jpeg_quality_hi = 95;
    return s;
}

CorruptionSpec CorruptionSpec::print_sim() {
    CorruptionSpec s;
    s.enable_warp = true;
    s.perspective_jitter = 0.05;
    s.enable_blur = true;
    s.blur_kernel_sizes = {1, 3, 5};
    s.enable_brightness = true;
    s.brightness_lo = -0.15;
    s.brightness_hi = 0.15;
    s.enable_contrast = true;
    s.contrast_lo = 0.85;
    s.contrast_hi = 1.15;
    s.enable_noise = true;
    s.noise_sigma_lo = 0.0;
    s.noise_sigma_hi = 0.05;
    s.enable_jpeg = true;
    s.jpeg_quality_lo = 50;
    s.jpeg_quality_hi = 90;
    return s;
}

CorruptionSpec CorruptionSpec::by_name(const std::string& name) {
    if (name == "none") return none();
    if (name == "digital") return digital();
    if (name == "print-sim") return print_sim();
    throw InvalidConfig("unknown corruption suite: " + name);
}

std::string CorruptionSpec::serialize() const {
    std::ostringstream out;
    out << "enable_warp=" << enable_warp << "\n";
    out << "enable_blur=" << enable_blur << "\n";
    out << "enable_brightness=" << enable_brightness << "\n";
    out << "enable_contrast=" << enable_contrast << "\n";
    out << "enable_noise=" << enable_noise << "\n";
    out << "enable_jpeg=" << enable_jpeg << "\n";
    char jit[40];
    std::snprintf(jit, sizeof jit, "%.17g", perspective_jitter);
    out << "perspective_jitter=" << jit << "\n";
    out << "blur_kernel_sizes=";
    for (std::size_t i = 0; i < blur_kernel_sizes.size(); ++i)
        out << (i ? "," : "") << blur_kernel_sizes[i];
    out << "\n";
    out << "brightness_range=" << format_pair(brightness_lo, brightness_hi) << "\n";
    out << "contrast_range=" << format_pair(contrast_lo, contrast_hi) << "\n";
    out << "noise_sigma_range=" << format_pair(noise_sigma_lo, noise_sigma_hi) << "\n";
    out << "jpeg_quality_range=" << jpeg_quality_lo << "," << jpeg_quality_hi << "\n";
    return out.str();
}

CorruptionSpec CorruptionSpec::parse(const std::string& text) {
    CorruptionSpec s;
    std::istringstream in(text);
    std::string line;
    auto flag = [](const std::string& v) {
        if (v == "0" || v == "false") return false;
        if (v == "1" || v == "true") return true;
        throw InvalidConfig("expected a boolean but got: " + v);
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidConfig("expected key=value but got: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "enable_warp") s.enable_warp = flag(val);
        else if (key == "enable_blur") s.enable_blur = flag(val);
        else if (key == "enable_brightness") s.enable_brightness = flag(val);
        else if (key == "enable_contrast") s.enable_contrast = flag(val);
        else if (key == "enable_noise") s.enable_noise = flag(val);
        else if (key == "enable_jpeg") s.enable_jpeg = flag(val);
        else if (key == "perspective_jitter") s.perspective_jitter = std::stod(val);
        else if (key == "blur_kernel_sizes") {
            s.blur_kernel_sizes.clear();
            std::istringstream ks(val);
            std::string item;
            while (std::getline(ks, item, ','))
                s.blur_kernel_sizes.push_back(std::stoi(item));
        } else if (key == "brightness_range")
            std::tie(s.brightness_lo, s.brightness_hi) = parse_pair(val);
        else if (key == "contrast_range")
            std::tie(s.contrast_lo, s.contrast_hi) = parse_pair(val);
        else if (key == "noise_sigma_range")
            std::tie(s.noise_sigma_lo, s.noise_sigma_hi) = parse_pair(val);
        else if (key == "jpeg_quality_range") {
            const auto [lo, hi] = parse_pair(val);
            s.jpeg_quality_lo = static_cast<int>(lo);
            s.jpeg_quality_hi = static_cast<int>(hi);
        } else
            throw InvalidConfig("unknown corruption key: " + key);
    }
    s.validate();
    return s;
}

Tensor homography_from_corners(const double corners[4][2]) {
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const double sx = kSquare[i][0], sy = kSquare[i][1];
        const double dx = corners[i][0], dy = corners[i][1];
        double* r0 = a[2 * i];
        double* r1 = a[2 * i + 1];
        r0[0] = sx; r0[1] = sy; r0[2] = 1;
        r0[6] = -dx * sx; r0[7] = -dx * sy; r0[8] = dx;
        r1[3] = sx; r1[4] = sy; r1[5] = 1;
        r1[6] = -dy * sx; r1[7] = -dy * sy; r1[8] = dy;
    }
    solve8(a);
    Tensor h({3, 3});
    for (int i = 0; i < 8; ++i) h.data()[i] = a[i][8];
    h.data()[8] = 1.0;
    if (std::fabs(det3(h.data())) < 1e-9)
        throw DegenerateQuad("homography is not invertible");
    return h;
}

Tensor sample_homography(const CorruptionSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.perspective_jitter == 0.0)
        return Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const double j = spec.perspective_jitter;
    for (int attempt = 0; attempt < 100; ++attempt) {
        double corners[4][2];
        for (int i = 0; i < 4; ++i) {
            corners[i][0] = kSquare[i][0] + rng.uniform(-j, j);
            corners[i][1] = kSquare[i][1] + rng.uniform(-j, j);
        }
        try {
            return homography_from_corners(corners);
        } catch (const DegenerateQuad&) {
        }
    }
    throw DegenerateQuad("no invertible homography after 100 draws");
}

Tensor warp_homography(Tape* t, const Tensor& image, const Tensor& h) {
    if (image.ndim() != 4 || image.dim(0) != 1)
        throw ShapeMismatch("warp_homography: image must be {1,c,h,w}");
    if (h.ndim() != 2 || h.dim(0) != 3 || h.dim(1) != 3)
        throw ShapeMismatch("warp_homography: matrix must be 3x3");
    const int hh = image.dim(2), ww = image.dim(3);
    const double* m = h.data();
    Tensor grid({2, hh, ww});
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x) {
            const double u = (x + 0.5) / ww;
            const double v = (y + 0.5) / hh;
            const double den = m[6] * u + m[7] * v + m[8];
            const double su = (m[0] * u + m[1] * v + m[2]) / den;
            const double sv = (m[3] * u + m[4] * v + m[5]) / den;
            const double px = su * ww - 0.5;
            const double py = sv * hh - 0.5;
            grid.data()[static_cast<std::size_t>(y) * ww + x] =
                ww > 1 ? 2.0 * px / (ww - 1) - 1.0 : 0.0;
            grid.data()[static_cast<std::size_t>(hh) * ww + y * ww + x] =
                hh > 1 ? 2.0 * py / (hh - 1) - 1.0 : 0.0;
        }
    return ops::bilinear_sample(t, image, grid);
}

Tensor box_blur(Tape* t, const Tensor& image, int k) {
    if (image.ndim() != 4 || image.dim(0) != 1)
        throw ShapeMismatch("box_blur: image must be {1,c,h,w}");
    if (k < 1 || k % 2 == 0) throw InvalidConfig("box_blur: kernel must be odd and >= 1");
    if (k == 1) return image;
    const int c = image.dim(1), hh = image.dim(2), ww = image.dim(3);
    Tensor y(image.shape());
    kernels::box_blur_fwd(image.data(), y.data(), c, hh, ww, k);
    check_finite(y, "box_blur");
    if (t && image.requires_grad()) {
        y.ensure_grad();
        auto gx = image.grad_ptr();
        auto gy = y.grad_ptr();
        y.bind_node(t->record([gx, gy, c, hh, ww, k] {
            kernels::box_blur_bwd(gy->data(), gx->data(), c, hh, ww, k);
        }));
    }
    return y;
}

Tensor jpeg_approx(Tape* t, const Tensor& image, int quality) {
    if (image.ndim() != 4 || image.dim(0) != 1)
        throw ShapeMismatch("jpeg_approx: image must be {1,c,h,w}");
    if (image.dim(2) % 8 != 0 || image.dim(3) % 8 != 0)
        throw BadDimensions("jpeg_approx: sides must be divisible by 8");
    if (quality < 1 || quality > 100) throw InvalidConfig("jpeg_approx: quality must be in [1, 100]");

    const int c = image.dim(1), hh = image.dim(2), ww = image.dim(3);
    const int by = hh / 8, bx = ww / 8;
    const int nblocks = c * by * bx;
    double qt[64];
    scaled_quant_table(quality, qt);

    auto gather = [=](const double* src, std::vector<double>& blocks, double scl) {
        for (int ch = 0; ch < c; ++ch)
            for (int b0 = 0; b0 < by; ++b0)
                for (int b1 = 0; b1 < bx; ++b1) {
                    double* blk =
                        blocks.data() + (static_cast<std::size_t>(ch) * by * bx + b0 * bx + b1) * 64;
                    const double* pl = src + static_cast<std::size_t>(ch) * hh * ww;
                    for (int yy = 0; yy < 8; ++yy)
                        for (int xx = 0; xx < 8; ++xx)
                            blk[yy * 8 + xx] =
                                scl * pl[static_cast<std::size_t>(b0 * 8 + yy) * ww + b1 * 8 + xx];
                }
    };
    auto scatter_scaled = [=](const std::vector<double>& blocks, double* dst, double scl) {
        for (int ch = 0; ch < c; ++ch)
            for (int b0 = 0; b0 < by; ++b0)
                for (int b1 = 0; b1 < bx; ++b1) {
                    const double* blk =
                        blocks.data() + (static_cast<std::size_t>(ch) * by * bx + b0 * bx + b1) * 64;
                    double* pl = dst + static_cast<std::size_t>(ch) * hh * ww;
                    for (int yy = 0; yy < 8; ++yy)
                        for (int xx = 0; xx < 8; ++xx)
                            pl[static_cast<std::size_t>(b0 * 8 + yy) * ww + b1 * 8 + xx] +=
                                scl * blk[yy * 8 + xx];
                }
    };

    std::vector<double> blocks(static_cast<std::size_t>(nblocks) * 64);
    std::vector<double> coeffs(blocks.size());
    gather(image.data(), blocks, 255.0);
    kernels::dct8x8_fwd(blocks.data(), coeffs.data(), nblocks);

    // quantize the AC coefficients; remember the local slope for the backward pass
    std::vector<double> slope(coeffs.size(), 1.0);
    for (int b = 0; b < nblocks; ++b)
        for (int i = 1; i < 64; ++i) {
            const std::size_t idx = static_cast<std::size_t>(b) * 64 + i;
            const double scaled = coeffs[idx] / qt[i];
            slope[idx] = soft_round_deriv(scaled);
            coeffs[idx] = qt[i] * soft_round(scaled);
        }

    kernels::dct8x8_inv(coeffs.data(), blocks.data(), nblocks);
    Tensor y(image.shape());
    scatter_scaled(blocks, y.data(), 1.0 / 255.0);
    check_finite(y, "jpeg_approx");

    if (t && image.requires_grad()) {
        y.ensure_grad();
        auto gx = image.grad_ptr();
        auto gyp = y.grad_ptr();
        y.bind_node(t->record([=, slope = std::move(slope)] {
            std::vector<double> gb(static_cast<std::size_t>(nblocks) * 64);
            std::vector<double> gc(gb.size());
            gather(gyp->data(), gb, 1.0);
            kernels::dct8x8_fwd(gb.data(), gc.data(), nblocks);
            for (std::size_t i = 0; i < gc.size(); ++i) gc[i] *= slope[i];
            kernels::dct8x8_inv(gc.data(), gb.data(), nblocks);
            scatter_scaled(gb, gx->data(), 1.0);
        }));
    }
    return y;
}

Tensor apply_corruption(Tape* t, const Tensor& image, const CorruptionSpec& spec, Rng& rng) {
    spec.validate();
    if (image.ndim() != 4 || image.dim(0) != 1)
        throw ShapeMismatch("apply_corruption: image must be {1,c,h,w}");
    const std::uint64_t base = rng.next_u64();
    if (!spec.any_enabled()) return image;

    Tensor x = image;
    if (spec.enable_warp) {
        Rng sub(mix_seed(base, 0));
        x = warp_homography(t, x, sample_homography(spec, sub));
    }
    if (spec.enable_blur) {
        Rng sub(mix_seed(base, 1));
        const int k = spec.blur_kernel_sizes[static_cast<std::size_t>(
            sub.uniform_int(0, static_cast<std::int64_t>(spec.blur_kernel_sizes.size()) - 1))];
        x = box_blur(t, x, k);
    }
    if (spec.enable_contrast) {
        Rng sub(mix_seed(base, 2));
        x = ops::scale(t, x, sub.uniform(spec.contrast_lo, spec.contrast_hi));
    }
    if (spec.enable_brightness) {
        Rng sub(mix_seed(base, 3));
        x = ops::add(t, x, Tensor::scalar(sub.uniform(spec.brightness_lo, spec.brightness_hi)));
    }
    if (spec.enable_noise) {
        Rng sub(mix_seed(base, 4));
        const double sigma = sub.uniform(spec.noise_sigma_lo, spec.noise_sigma_hi);
        Tensor n(x.shape());
        for (int i = 0; i < n.size(); ++i) n.data()[i] = sigma * sub.normal();
        x = ops::add(t, x, n);
    }
    if (spec.enable_jpeg) {
        Rng sub(mix_seed(base, 5));
        const int q = static_cast<int>(sub.uniform_int(spec.jpeg_quality_lo, spec.jpeg_quality_hi));
        x = jpeg_approx(t, x, q);
    }
    return ops::clamp(t, x, 0.0, 1.0);
}

}  // namespace steg
