#pragma once

#include <cstddef>

// Low-level numeric kernels. Every kernel exists twice: a plain serial
// reference (namespace serial) and an OpenMP version (namespace omp) that
// parallelizes over independent output elements. Each output element is
// accumulated in the same fixed order in both variants, so results are
// bit-identical regardless of backend or thread count. The unqualified
// functions dispatch on the process-wide backend selection.
namespace steg::kernels {

enum class Backend { Serial, OpenMP };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();
int max_threads();

struct ConvDims {
    int n = 1, cin = 0, hin = 0, win = 0;
    int cout = 0, kh = 0, kw = 0;
    int stride = 1, pad = 0;
    int hout = 0, wout = 0;  // derived
};

// throws ShapeMismatch if the geometry is inconsistent
ConvDims conv_dims(int n, int cin, int hin, int win, int cout, int kh, int kw, int stride, int pad);

struct TconvDims {
    int n = 1, cin = 0, hin = 0, win = 0, cout = 0;
    // fixed 2x2 kernel, stride 2: hout = 2*hin, wout = 2*win
};

struct SampleDims {
    int c = 0, hin = 0, win = 0, hout = 0, wout = 0;
};

#define STEG_KERNEL_DECLS                                                                          \
    void conv2d_fwd(const double* x, const double* w, const double* bias, double* y,              \
                    const ConvDims& d);                                                            \
    void conv2d_bwd_x(const double* w, const double* gy, double* gx, const ConvDims& d);           \
    void conv2d_bwd_w(const double* x, const double* gy, double* gw, const ConvDims& d);           \
    void conv2d_bwd_b(const double* gy, double* gb, const ConvDims& d);                            \
    void tconv2x_fwd(const double* x, const double* w, const double* bias, double* y,              \
                     const TconvDims& d);                                                          \
    void tconv2x_bwd_x(const double* w, const double* gy, double* gx, const TconvDims& d);         \
    void tconv2x_bwd_w(const double* x, const double* gy, double* gw, const TconvDims& d);         \
    void tconv2x_bwd_b(const double* gy, double* gb, const TconvDims& d);                          \
    void dense_fwd(const double* x, const double* w, const double* b, double* y, int out, int in); \
    void dense_bwd_x(const double* w, const double* gy, double* gx, int out, int in);              \
    void dense_bwd_w(const double* x, const double* gy, double* gw, int out, int in);              \
    void dense_bwd_b(const double* gy, double* gb, int out);                                       \
    void bilinear_fwd(const double* feat, const double* grid, double* y, const SampleDims& d);     \
    void dct8x8_fwd(const double* x, double* y, int planes);                                       \
    void dct8x8_inv(const double* x, double* y, int planes);                                       \
    void box_blur_fwd(const double* x, double* y, int c, int h, int w, int k);

namespace serial {
STEG_KERNEL_DECLS
}
namespace omp {
STEG_KERNEL_DECLS
}

// dispatched entry points
STEG_KERNEL_DECLS

#undef STEG_KERNEL_DECLS

// Scatter-style backward passes. These accumulate into overlapping targets,
// so they run serially in every backend (cheap relative to the convolutions).
void bilinear_bwd(const double* feat, const double* grid, const double* gy, double* gfeat,
                  double* ggrid, const SampleDims& d);
void box_blur_bwd(const double* gy, double* gx, int c, int h, int w, int k);

// fixed-order serial reduction
double sum(const double* x, std::size_t n);

}  // namespace steg::kernels
