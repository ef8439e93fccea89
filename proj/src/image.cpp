#include "steg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "steg/error.hpp"

namespace steg {

namespace {

void require_rgb(const Tensor& img, const char* who) {
    if (img.ndim() != 4 || img.dim(0) != 1 || img.dim(1) != 3)
        throw ShapeMismatch(std::string(who) + ": expects a {1,3,h,w} tensor");
}

}  // namespace

Tensor load_png(const std::string& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw ImageUnreadable("cannot read PNG: " + path);
    im.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&im);
        throw ImageUnreadable("cannot decode PNG: " + path);
    }
    const int h = static_cast<int>(im.height), w = static_cast<int>(im.width);
    Tensor t({1, 3, h, w});
    double* d = t.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                d[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return t;
}

void save_png(const std::string& path, const Tensor& img) {
    require_rgb(img, "save_png");
    const int h = img.dim(2), w = img.dim(3);
    std::vector<png_byte> buf(static_cast<std::size_t>(h) * w * 3);
    const double* d = img.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = d[(static_cast<std::size_t>(c) * h + y) * w + x];
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(w);
    im.height = static_cast<png_uint_32>(h);
    im.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
        throw IoFailure("cannot write PNG: " + path);
}

Tensor resize_bilinear(const Tensor& img, int h, int w) {
    require_rgb(img, "resize_bilinear");
    if (h < 1 || w < 1) throw ShapeMismatch("resize_bilinear: bad target size");
    const int sh = img.dim(2), sw = img.dim(3);
    Tensor out({1, 3, h, w});
    const double fy = static_cast<double>(sh) / h, fx = static_cast<double>(sw) / w;
    const double* s = img.data();
    double* d = out.data();
    for (int y = 0; y < h; ++y) {
        double py = (y + 0.5) * fy - 0.5;
        py = py < 0.0 ? 0.0 : (py > sh - 1 ? sh - 1 : py);
        const int y0 = static_cast<int>(py);
        const int y1 = y0 + 1 < sh ? y0 + 1 : sh - 1;
        const double wy = py - y0;
        for (int x = 0; x < w; ++x) {
            double px = (x + 0.5) * fx - 0.5;
            px = px < 0.0 ? 0.0 : (px > sw - 1 ? sw - 1 : px);
            const int x0 = static_cast<int>(px);
            const int x1 = x0 + 1 < sw ? x0 + 1 : sw - 1;
            const double wx = px - x0;
            for (int c = 0; c < 3; ++c) {
                const double* pl = s + static_cast<std::size_t>(c) * sh * sw;
                const double v00 = pl[static_cast<std::size_t>(y0) * sw + x0];
                const double v01 = pl[static_cast<std::size_t>(y0) * sw + x1];
                const double v10 = pl[static_cast<std::size_t>(y1) * sw + x0];
                const double v11 = pl[static_cast<std::size_t>(y1) * sw + x1];
                d[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                    wy * ((1.0 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

double psnr(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeMismatch("psnr: shapes differ");
    double mse = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        mse += d * d;
    }
    mse /= a.size();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<std::string> list_pngs(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (!e.is_regular_file()) continue;
        if (e.path().extension() == ".png") out.push_back(e.path().string());
    }
    if (ec) throw IoFailure("cannot list directory: " + dir);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Tensor> load_dataset(const std::string& dir, int side) {
    const auto paths = list_pngs(dir);
    if (paths.empty()) throw EmptyDataset("no PNG images in " + dir);
    std::vector<Tensor> out;
    out.reserve(paths.size());
    for (const auto& p : paths) {
        Tensor img;
        try {
            img = load_png(p);
        } catch (const ImageUnreadable&) {
            throw UnreadableImage("unreadable image: " + p);
        }
        out.push_back(img.dim(2) == side && img.dim(3) == side ? img
                                                               : resize_bilinear(img, side, side));
    }
    return out;
}

Tensor synth_image(int side, Rng& rng) {
    Tensor t({1, 3, side, side});
    double* d = t.data();
    const int kind = static_cast<int>(rng.uniform_int(0, 4));
    double ca[3], cb[3];
    for (int c = 0; c < 3; ++c) {
        ca[c] = rng.uniform(0.1, 0.9);
        cb[c] = rng.uniform(0.1, 0.9);
    }
    auto at = [&](int c, int y, int x) -> double& {
        return d[(static_cast<std::size_t>(c) * side + y) * side + x];
    };
    switch (kind) {
        case 0: {  // oriented linear gradient
            const double ang = rng.uniform(0.0, 2.0 * M_PI);
            const double gx = std::cos(ang), gy = std::sin(ang);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double u =
                        0.5 + 0.5 * (gx * (2.0 * x / side - 1.0) + gy * (2.0 * y / side - 1.0));
                    for (int c = 0; c < 3; ++c) at(c, y, x) = ca[c] + (cb[c] - ca[c]) * u;
                }
            break;
        }
        case 1: {  // concentric rings
            const double cx = rng.uniform(0.25, 0.75) * side;
            const double cy = rng.uniform(0.25, 0.75) * side;
            const double freq = rng.uniform(4.0, 10.0);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double r = std::hypot(x - cx, y - cy) / side;
                    const double u = 0.5 + 0.5 * std::sin(freq * 2.0 * M_PI * r);
                    for (int c = 0; c < 3; ++c) at(c, y, x) = ca[c] + (cb[c] - ca[c]) * u;
                }
            break;
        }
        case 2: {  // diagonal stripes
            const double ang = rng.uniform(0.0, M_PI);
            const double freq = rng.uniform(3.0, 9.0);
            const double gx = std::cos(ang), gy = std::sin(ang);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double p = (gx * x + gy * y) / side;
                    const double u = 0.5 + 0.5 * std::sin(freq * 2.0 * M_PI * p);
                    for (int c = 0; c < 3; ++c) at(c, y, x) = ca[c] + (cb[c] - ca[c]) * u;
                }
            break;
        }
        case 3: {  // checkerboard
            const int cell = static_cast<int>(rng.uniform_int(4, side / 4));
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const bool on = ((x / cell) + (y / cell)) % 2 == 0;
                    for (int c = 0; c < 3; ++c) at(c, y, x) = on ? ca[c] : cb[c];
                }
            break;
        }
        default: {  // sum of soft blobs
            const int blobs = static_cast<int>(rng.uniform_int(3, 6));
            std::vector<double> bx(blobs), by(blobs), bs(blobs);
            for (int b = 0; b < blobs; ++b) {
                bx[b] = rng.uniform(0.0, 1.0) * side;
                by[b] = rng.uniform(0.0, 1.0) * side;
                bs[b] = rng.uniform(0.1, 0.3) * side;
            }
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    double u = 0.0;
                    for (int b = 0; b < blobs; ++b) {
                        const double r2 = (x - bx[b]) * (x - bx[b]) + (y - by[b]) * (y - by[b]);
                        u += std::exp(-r2 / (2.0 * bs[b] * bs[b]));
                    }
                    u = u > 1.0 ? 1.0 : u;
                    for (int c = 0; c < 3; ++c) at(c, y, x) = ca[c] + (cb[c] - ca[c]) * u;
                }
            break;
        }
    }
    for (int i = 0; i < t.size(); ++i) {
        const double v = d[i] + rng.uniform(-0.02, 0.02);
        d[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return t;
}

void generate_corpus(const std::string& dir, int count, int side, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create directory: " + dir);
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        char name[32];
        std::snprintf(name, sizeof(name), "corpus_%04d.png", i);
        save_png((fs::path(dir) / name).string(), synth_image(side, rng));
    }
}

}  // namespace steg
