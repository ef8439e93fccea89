#include "steg/kernels.hpp"

#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "steg/error.hpp"

namespace steg::kernels {

namespace {
Backend g_backend =
#ifdef _OPENMP
    Backend::OpenMP;
#else
    Backend::Serial;
#endif
}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

bool openmp_compiled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

ConvDims conv_dims(int n, int cin, int hin, int win, int cout, int kh, int kw, int stride,
                   int pad) {
    if (n < 1 || cin < 1 || hin < 1 || win < 1 || cout < 1 || kh < 1 || kw < 1)
        throw ShapeMismatch("conv2d: empty dimension");
    if (stride < 1 || pad < 0) throw ShapeMismatch("conv2d: stride must be >= 1, pad >= 0");
    ConvDims d;
    d.n = n;
    d.cin = cin;
    d.hin = hin;
    d.win = win;
    d.cout = cout;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    const int hnum = hin + 2 * pad - kh;
    const int wnum = win + 2 * pad - kw;
    if (hnum < 0 || wnum < 0) throw ShapeMismatch("conv2d: kernel larger than padded input");
    d.hout = hnum / stride + 1;
    d.wout = wnum / stride + 1;
    return d;
}

#define STEG_DISPATCH(fn, ...) \
    (g_backend == Backend::OpenMP ? omp::fn(__VA_ARGS__) : serial::fn(__VA_ARGS__))

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y,
                const ConvDims& d) {
    STEG_DISPATCH(conv2d_fwd, x, w, bias, y, d);
}
void conv2d_bwd_x(const double* w, const double* gy, double* gx, const ConvDims& d) {
    STEG_DISPATCH(conv2d_bwd_x, w, gy, gx, d);
}
void conv2d_bwd_w(const double* x, const double* gy, double* gw, const ConvDims& d) {
    STEG_DISPATCH(conv2d_bwd_w, x, gy, gw, d);
}
void conv2d_bwd_b(const double* gy, double* gb, const ConvDims& d) {
    STEG_DISPATCH(conv2d_bwd_b, gy, gb, d);
}
void tconv2x_fwd(const double* x, const double* w, const double* bias, double* y,
                 const TconvDims& d) {
    STEG_DISPATCH(tconv2x_fwd, x, w, bias, y, d);
}
void tconv2x_bwd_x(const double* w, const double* gy, double* gx, const TconvDims& d) {
    STEG_DISPATCH(tconv2x_bwd_x, w, gy, gx, d);
}
void tconv2x_bwd_w(const double* x, const double* gy, double* gw, const TconvDims& d) {
    STEG_DISPATCH(tconv2x_bwd_w, x, gy, gw, d);
}
void tconv2x_bwd_b(const double* gy, double* gb, const TconvDims& d) {
    STEG_DISPATCH(tconv2x_bwd_b, gy, gb, d);
}
void dense_fwd(const double* x, const double* w, const double* b, double* y, int out, int in) {
    STEG_DISPATCH(dense_fwd, x, w, b, y, out, in);
}
void dense_bwd_x(const double* w, const double* gy, double* gx, int out, int in) {
    STEG_DISPATCH(dense_bwd_x, w, gy, gx, out, in);
}
void dense_bwd_w(const double* x, const double* gy, double* gw, int out, int in) {
    STEG_DISPATCH(dense_bwd_w, x, gy, gw, out, in);
}
void dense_bwd_b(const double* gy, double* gb, int out) { STEG_DISPATCH(dense_bwd_b, gy, gb, out); }
void bilinear_fwd(const double* feat, const double* grid, double* y, const SampleDims& d) {
    STEG_DISPATCH(bilinear_fwd, feat, grid, y, d);
}
void dct8x8_fwd(const double* x, double* y, int planes) { STEG_DISPATCH(dct8x8_fwd, x, y, planes); }
void dct8x8_inv(const double* x, double* y, int planes) { STEG_DISPATCH(dct8x8_inv, x, y, planes); }
void box_blur_fwd(const double* x, double* y, int c, int h, int w, int k) {
    STEG_DISPATCH(box_blur_fwd, x, y, c, h, w, k);
}

#undef STEG_DISPATCH

void bilinear_bwd(const double* feat, const double* grid, const double* gy, double* gfeat,
                  double* ggrid, const SampleDims& d) {
    const int npix = d.hout * d.wout;
    for (int p = 0; p < npix; ++p) {
        const double gxv = grid[p];
        const double gyv = grid[npix + p];
        double px = (gxv + 1.0) * 0.5 * (d.win - 1);
        double py = (gyv + 1.0) * 0.5 * (d.hin - 1);
        const bool cx = px < 0.0 || px > d.win - 1;  // clamped coordinates get zero grad
        const bool cy = py < 0.0 || py > d.hin - 1;
        px = px < 0.0 ? 0.0 : (px > d.win - 1 ? d.win - 1 : px);
        py = py < 0.0 ? 0.0 : (py > d.hin - 1 ? d.hin - 1 : py);
        const int ix0 = static_cast<int>(px);
        const int iy0 = static_cast<int>(py);
        const int ix1 = ix0 + 1 < d.win ? ix0 + 1 : d.win - 1;
        const int iy1 = iy0 + 1 < d.hin ? iy0 + 1 : d.hin - 1;
        const double fx = px - ix0, fy = py - iy0;
        double dpx = 0.0, dpy = 0.0;
        for (int c = 0; c < d.c; ++c) {
            const double g = gy[static_cast<std::size_t>(c) * npix + p];
            const double* pl = feat + (static_cast<std::size_t>(c) * d.hin) * d.win;
            const double v00 = pl[static_cast<std::size_t>(iy0) * d.win + ix0];
            const double v01 = pl[static_cast<std::size_t>(iy0) * d.win + ix1];
            const double v10 = pl[static_cast<std::size_t>(iy1) * d.win + ix0];
            const double v11 = pl[static_cast<std::size_t>(iy1) * d.win + ix1];
            if (gfeat) {
                double* gpl = gfeat + (static_cast<std::size_t>(c) * d.hin) * d.win;
                gpl[static_cast<std::size_t>(iy0) * d.win + ix0] += g * (1.0 - fy) * (1.0 - fx);
                gpl[static_cast<std::size_t>(iy0) * d.win + ix1] += g * (1.0 - fy) * fx;
                gpl[static_cast<std::size_t>(iy1) * d.win + ix0] += g * fy * (1.0 - fx);
                gpl[static_cast<std::size_t>(iy1) * d.win + ix1] += g * fy * fx;
            }
            dpx += g * ((1.0 - fy) * (v01 - v00) + fy * (v11 - v10));
            dpy += g * ((1.0 - fx) * (v10 - v00) + fx * (v11 - v01));
        }
        if (ggrid) {
            ggrid[p] += cx ? 0.0 : dpx * 0.5 * (d.win - 1);
            ggrid[npix + p] += cy ? 0.0 : dpy * 0.5 * (d.hin - 1);
        }
    }
}

void box_blur_bwd(const double* gy, double* gx, int c, int h, int w, int k) {
    const int r = k / 2;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int ch = 0; ch < c; ++ch) {
        const double* gpl = gy + static_cast<std::size_t>(ch) * h * w;
        double* xpl = gx + static_cast<std::size_t>(ch) * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double g = gpl[static_cast<std::size_t>(i) * w + j] * inv;
                for (int dy = -r; dy <= r; ++dy) {
                    int iy = i + dy;
                    iy = iy < 0 ? 0 : (iy >= h ? h - 1 : iy);
                    for (int dx = -r; dx <= r; ++dx) {
                        int ix = j + dx;
                        ix = ix < 0 ? 0 : (ix >= w ? w - 1 : ix);
                        xpl[static_cast<std::size_t>(iy) * w + ix] += g;
                    }
                }
            }
    }
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace steg::kernels
