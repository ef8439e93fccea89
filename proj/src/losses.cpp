#include "steg/losses.hpp"

#include <cmath>

namespace steg {

namespace {

void require_same_image(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeMismatch(std::string(op) + ": images must have identical shapes");
    if (a.ndim() != 4 || a.dim(0) != 1)
        throw ShapeMismatch(std::string(op) + ": images must be {1,c,h,w}");
}

Tensor sub(Tape* t, const Tensor& a, const Tensor& b) {
    return ops::add(t, a, ops::scale(t, b, -1.0));
}

// per-channel identity kernels for the fixed structural filters
Tensor pool_kernel(int c) {
    Tensor w({c, c, 2, 2});
    for (int i = 0; i < c; ++i)
        for (int k = 0; k < 4; ++k)
            w.data()[(static_cast<std::size_t>(i) * c + i) * 4 + k] = 0.25;
    return w;
}

Tensor diff_kernel(int c, bool horizontal) {
    Tensor w(horizontal ? std::vector<int>{c, c, 1, 2} : std::vector<int>{c, c, 2, 1});
    for (int i = 0; i < c; ++i) {
        double* cell = w.data() + (static_cast<std::size_t>(i) * c + i) * 2;
        cell[0] = -1.0;
        cell[1] = 1.0;
    }
    return w;
}

Tensor grad_mse(Tape* t, const Tensor& a, const Tensor& b, const Tensor& kernel) {
    Tensor d = sub(t, ops::conv2d(t, a, kernel, Tensor()), ops::conv2d(t, b, kernel, Tensor()));
    return ops::mean(t, ops::mul(t, d, d));
}

}  // namespace

Tensor l2_residual(Tape* t, const Tensor& cover, const Tensor& stego) {
    if (cover.shape() != stego.shape())
        throw ShapeMismatch("l2_residual: images must have identical shapes");
    Tensor d = sub(t, stego, cover);
    return ops::mean(t, ops::mul(t, d, d));
}

Tensor perceptual_proxy(Tape* t, const Tensor& cover, const Tensor& stego) {
    require_same_image(cover, stego, "perceptual_proxy");
    const int c = cover.dim(1);
    const Tensor pool = pool_kernel(c);
    const Tensor dh = diff_kernel(c, true);
    const Tensor dv = diff_kernel(c, false);

    Tensor a = cover, b = stego;
    Tensor total = Tensor::scalar(0.0);
    for (int scale = 0; scale < 3; ++scale) {
        if (scale > 0) {
            a = ops::conv2d(t, a, pool, Tensor(), {2, 0});
            b = ops::conv2d(t, b, pool, Tensor(), {2, 0});
        }
        total = ops::add(t, total, grad_mse(t, b, a, dh));
        total = ops::add(t, total, grad_mse(t, b, a, dv));
    }
    Tensor shift = sub(t, ops::channel_mean(t, stego), ops::channel_mean(t, cover));
    return ops::add(t, total, ops::mean(t, ops::mul(t, shift, shift)));
}

Tensor message_loss(Tape* t, const Tensor& logits, const Bits& bits) {
    if (logits.ndim() != 1 || logits.dim(0) != static_cast<int>(bits.size()))
        throw LengthMismatch("message_loss: logits and bits disagree in length");
    const int n = logits.dim(0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = logits.data()[i];
        const double y = bits[static_cast<std::size_t>(i)];
        acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
    }
    Tensor loss = Tensor::scalar(acc / n);
    check_finite(loss, "message_loss");
    if (t && logits.requires_grad()) {
        loss.ensure_grad();
        auto gz = logits.grad_ptr();
        auto gl = loss.grad_ptr();
        auto zs = logits.data_ptr();
        Bits ys = bits;
        loss.bind_node(t->record([gz, gl, zs, ys = std::move(ys), n] {
            const double g = (*gl)[0] / n;
            for (int i = 0; i < n; ++i) {
                const double s = 1.0 / (1.0 + std::exp(-(*zs)[static_cast<std::size_t>(i)]));
                (*gz)[static_cast<std::size_t>(i)] += g * (s - ys[static_cast<std::size_t>(i)]);
            }
        }));
    }
    return loss;
}

Tensor total_loss(Tape* t, const Tensor& cover, const Tensor& stego, const Tensor& logits,
                  const Bits& bits, const LossWeights& w) {
    Tensor weighted = ops::scale(t, l2_residual(t, cover, stego), w.lambda_r);
    weighted = ops::add(t, weighted, ops::scale(t, perceptual_proxy(t, cover, stego), w.lambda_p));
    return ops::add(t, weighted, ops::scale(t, message_loss(t, logits, bits), w.lambda_m));
}

}  // namespace steg
