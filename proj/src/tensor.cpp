#include "steg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "steg/kernels.hpp"

namespace steg {

namespace {

int shape_size(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeMismatch("tensor: empty shape");
    long long n = 1;
    for (int d : shape) {
        if (d < 1) throw ShapeMismatch("tensor: non-positive dimension");
        n *= d;
    }
    return static_cast<int>(n);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)),
      size_(shape_size(shape_)),
      data_(std::make_shared<std::vector<double>>(size_, 0.0)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), size_(shape_size(shape_)) {
    if (static_cast<int>(values.size()) != size_)
        throw ShapeMismatch("tensor: value count does not match shape");
    data_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
}

double Tensor::item() const {
    if (size_ != 1) throw NonScalarLoss("item() requires a scalar tensor");
    return (*data_)[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (on)
        ensure_grad();
    else
        grad_.reset();
    return *this;
}

void Tensor::ensure_grad() {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(size_, 0.0);
}

void Tensor::zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_size(shape) != size_) throw ShapeMismatch("reshape: element count changed");
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = size_;
    t.data_ = data_;
    t.grad_ = grad_;
    t.node_ = node_;
    return t;
}

int Tape::record(std::function<void()> fn) {
    nodes_.push_back(std::move(fn));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw NonScalarLoss("backward: loss must be scalar");
    if (loss.node() < 0 || loss.node() >= size())
        throw DetachedLoss("backward: loss is not on this tape");
    (*loss.grad_ptr())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) nodes_[static_cast<std::size_t>(i)]();
    clear();
}

void check_finite(const Tensor& x, const char* op) {
    const double* d = x.data();
    for (int i = 0; i < x.size(); ++i)
        if (!std::isfinite(d[i]))
            throw NonFiniteOutput(std::string(op) + ": non-finite value in output");
}

namespace ops {

namespace {

using Buf = std::shared_ptr<std::vector<double>>;

bool participating(const Tensor& t) { return t.requires_grad(); }

template <class Fwd, class Bwd>
Tensor unary_map(Tape* t, const Tensor& x, const char* name, Fwd fwd, Bwd dfdx) {
    Tensor y(x.shape());
    const double* xd = x.data();
    double* yd = y.data();
    const int n = x.size();
    for (int i = 0; i < n; ++i) yd[i] = fwd(xd[i]);
    check_finite(y, name);
    if (t && participating(x)) {
        y.ensure_grad();
        Buf xb = x.data_ptr(), gx = x.grad_ptr(), yb = y.data_ptr(), gy = y.grad_ptr();
        y.bind_node(t->record([xb, gx, yb, gy, n, dfdx] {
            for (int i = 0; i < n; ++i) (*gx)[i] += (*gy)[i] * dfdx((*xb)[i], (*yb)[i]);
        }));
    }
    return y;
}

}  // namespace

Tensor conv2d(Tape* t, const Tensor& x, const Tensor& w, const Tensor& bias, ConvAttrs a) {
    if (x.ndim() != 4 || w.ndim() != 4) throw ShapeMismatch("conv2d: expects 4-d input and kernel");
    if (w.dim(1) != x.dim(1)) throw ShapeMismatch("conv2d: channel mismatch");
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != w.dim(0)))
        throw ShapeMismatch("conv2d: bad bias shape");
    const auto d = kernels::conv_dims(x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2),
                                      w.dim(3), a.stride, a.pad);
    Tensor y({d.n, d.cout, d.hout, d.wout});
    kernels::conv2d_fwd(x.data(), w.data(), bias.defined() ? bias.data() : nullptr, y.data(), d);
    check_finite(y, "conv2d");
    const bool gx = t && participating(x);
    const bool gw = t && participating(w);
    const bool gb = t && bias.defined() && participating(bias);
    if (gx || gw || gb) {
        y.ensure_grad();
        Buf xb = x.data_ptr(), wb = w.data_ptr(), gyb = y.grad_ptr();
        Buf gxb = gx ? x.grad_ptr() : nullptr;
        Buf gwb = gw ? w.grad_ptr() : nullptr;
        Buf gbb = gb ? bias.grad_ptr() : nullptr;
        y.bind_node(t->record([xb, wb, gyb, gxb, gwb, gbb, d] {
            if (gxb) kernels::conv2d_bwd_x(wb->data(), gyb->data(), gxb->data(), d);
            if (gwb) kernels::conv2d_bwd_w(xb->data(), gyb->data(), gwb->data(), d);
            if (gbb) kernels::conv2d_bwd_b(gyb->data(), gbb->data(), d);
        }));
    }
    return y;
}

Tensor transposed_upsample(Tape* t, const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.ndim() != 4 || w.ndim() != 4 || w.dim(2) != 2 || w.dim(3) != 2)
        throw ShapeMismatch("transposed_upsample: expects 4-d input and 2x2 kernel");
    if (w.dim(0) != x.dim(1)) throw ShapeMismatch("transposed_upsample: channel mismatch");
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != w.dim(1)))
        throw ShapeMismatch("transposed_upsample: bad bias shape");
    kernels::TconvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.hin = x.dim(2);
    d.win = x.dim(3);
    d.cout = w.dim(1);
    Tensor y({d.n, d.cout, 2 * d.hin, 2 * d.win});
    kernels::tconv2x_fwd(x.data(), w.data(), bias.defined() ? bias.data() : nullptr, y.data(), d);
    check_finite(y, "transposed_upsample");
    const bool gx = t && participating(x);
    const bool gw = t && participating(w);
    const bool gb = t && bias.defined() && participating(bias);
    if (gx || gw || gb) {
        y.ensure_grad();
        Buf xb = x.data_ptr(), wb = w.data_ptr(), gyb = y.grad_ptr();
        Buf gxb = gx ? x.grad_ptr() : nullptr;
        Buf gwb = gw ? w.grad_ptr() : nullptr;
        Buf gbb = gb ? bias.grad_ptr() : nullptr;
        y.bind_node(t->record([xb, wb, gyb, gxb, gwb, gbb, d] {
            if (gxb) kernels::tconv2x_bwd_x(wb->data(), gyb->data(), gxb->data(), d);
            if (gwb) kernels::tconv2x_bwd_w(xb->data(), gyb->data(), gwb->data(), d);
            if (gbb) kernels::tconv2x_bwd_b(gyb->data(), gbb->data(), d);
        }));
    }
    return y;
}

Tensor dense(Tape* t, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 1 || w.ndim() != 2 || w.dim(1) != x.dim(0))
        throw ShapeMismatch("dense: expects x {in}, w {out,in}");
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != w.dim(0)))
        throw ShapeMismatch("dense: bad bias shape");
    const int out = w.dim(0), in = w.dim(1);
    Tensor y({out});
    kernels::dense_fwd(x.data(), w.data(), b.defined() ? b.data() : nullptr, y.data(), out, in);
    check_finite(y, "dense");
    const bool gx = t && participating(x);
    const bool gw = t && participating(w);
    const bool gb = t && b.defined() && participating(b);
    if (gx || gw || gb) {
        y.ensure_grad();
        Buf xb = x.data_ptr(), wb = w.data_ptr(), gyb = y.grad_ptr();
        Buf gxb = gx ? x.grad_ptr() : nullptr;
        Buf gwb = gw ? w.grad_ptr() : nullptr;
        Buf gbb = gb ? b.grad_ptr() : nullptr;
        y.bind_node(t->record([xb, wb, gyb, gxb, gwb, gbb, out, in] {
            if (gxb) kernels::dense_bwd_x(wb->data(), gyb->data(), gxb->data(), out, in);
            if (gwb) kernels::dense_bwd_w(xb->data(), gyb->data(), gwb->data(), out, in);
            if (gbb) kernels::dense_bwd_b(gyb->data(), gbb->data(), out);
        }));
    }
    return y;
}

Tensor relu(Tape* t, const Tensor& x) {
    return unary_map(
        t, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape* t, const Tensor& x) {
    return unary_map(
        t, x, "sigmoid",
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape* t, const Tensor& x) {
    return unary_map(
        t, x, "tanh", [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

namespace {

enum class Arith { Add, Mul };

Tensor binary_op(Tape* t, const Tensor& a, const Tensor& b, Arith kind) {
    const char* name = kind == Arith::Add ? "add" : "mul";
    const bool elementwise = same_shape(a, b);
    const bool a_scalar = !elementwise && a.size() == 1;
    const bool b_scalar = !elementwise && b.size() == 1;
    if (!elementwise && !a_scalar && !b_scalar)
        throw ShapeMismatch(std::string(name) + ": shapes differ and neither side is scalar");
    const Tensor& big = a_scalar ? b : a;
    Tensor y(big.shape());
    const int n = y.size();
    const double* ad = a.data();
    const double* bd = b.data();
    double* yd = y.data();
    if (kind == Arith::Add) {
        for (int i = 0; i < n; ++i) yd[i] = (a_scalar ? ad[0] : ad[i]) + (b_scalar ? bd[0] : bd[i]);
    } else {
        for (int i = 0; i < n; ++i) yd[i] = (a_scalar ? ad[0] : ad[i]) * (b_scalar ? bd[0] : bd[i]);
    }
    check_finite(y, name);
    const bool ga = t && participating(a);
    const bool gb = t && participating(b);
    if (ga || gb) {
        y.ensure_grad();
        Buf ab = a.data_ptr(), bb = b.data_ptr(), gy = y.grad_ptr();
        Buf gab = ga ? a.grad_ptr() : nullptr;
        Buf gbb = gb ? b.grad_ptr() : nullptr;
        y.bind_node(t->record([ab, bb, gy, gab, gbb, n, a_scalar, b_scalar, kind] {
            if (kind == Arith::Add) {
                if (gab) {
                    if (a_scalar)
                        for (int i = 0; i < n; ++i) (*gab)[0] += (*gy)[i];
                    else
                        for (int i = 0; i < n; ++i) (*gab)[i] += (*gy)[i];
                }
                if (gbb) {
                    if (b_scalar)
                        for (int i = 0; i < n; ++i) (*gbb)[0] += (*gy)[i];
                    else
                        for (int i = 0; i < n; ++i) (*gbb)[i] += (*gy)[i];
                }
            } else {
                if (gab) {
                    if (a_scalar)
                        for (int i = 0; i < n; ++i) (*gab)[0] += (*gy)[i] * (*bb)[b_scalar ? 0 : i];
                    else
                        for (int i = 0; i < n; ++i) (*gab)[i] += (*gy)[i] * (*bb)[b_scalar ? 0 : i];
                }
                if (gbb) {
                    if (b_scalar)
                        for (int i = 0; i < n; ++i) (*gbb)[0] += (*gy)[i] * (*ab)[a_scalar ? 0 : i];
                    else
                        for (int i = 0; i < n; ++i) (*gbb)[i] += (*gy)[i] * (*ab)[a_scalar ? 0 : i];
                }
            }
        }));
    }
    return y;
}

}  // namespace

Tensor add(Tape* t, const Tensor& a, const Tensor& b) { return binary_op(t, a, b, Arith::Add); }
Tensor mul(Tape* t, const Tensor& a, const Tensor& b) { return binary_op(t, a, b, Arith::Mul); }

Tensor scale(Tape* t, const Tensor& x, double c) {
    return unary_map(
        t, x, "scale", [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor concat_channels(Tape* t, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3))
        throw ShapeMismatch("concat_channels: expects 4-d inputs agreeing outside dim 1");
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor y({n, ca + cb, a.dim(2), a.dim(3)});
    double* yd = y.data();
    for (int i = 0; i < n; ++i) {
        std::memcpy(yd + static_cast<std::size_t>(i) * (ca + cb) * hw,
                    a.data() + static_cast<std::size_t>(i) * ca * hw, sizeof(double) * ca * hw);
        std::memcpy(yd + (static_cast<std::size_t>(i) * (ca + cb) + ca) * hw,
                    b.data() + static_cast<std::size_t>(i) * cb * hw, sizeof(double) * cb * hw);
    }
    const bool ga = t && participating(a);
    const bool gb = t && participating(b);
    if (ga || gb) {
        y.ensure_grad();
        Buf gy = y.grad_ptr();
        Buf gab = ga ? a.grad_ptr() : nullptr;
        Buf gbb = gb ? b.grad_ptr() : nullptr;
        y.bind_node(t->record([gy, gab, gbb, n, ca, cb, hw] {
            for (int i = 0; i < n; ++i) {
                const double* g = gy->data() + static_cast<std::size_t>(i) * (ca + cb) * hw;
                if (gab) {
                    double* ga_ = gab->data() + static_cast<std::size_t>(i) * ca * hw;
                    for (int j = 0; j < ca * hw; ++j) ga_[j] += g[j];
                }
                if (gbb) {
                    double* gb_ = gbb->data() + static_cast<std::size_t>(i) * cb * hw;
                    for (int j = 0; j < cb * hw; ++j) gb_[j] += g[ca * hw + j];
                }
            }
        }));
    }
    return y;
}

Tensor mean(Tape* t, const Tensor& x) {
    const int n = x.size();
    Tensor y = Tensor::scalar(kernels::sum(x.data(), static_cast<std::size_t>(n)) / n);
    check_finite(y, "mean");
    if (t && participating(x)) {
        y.ensure_grad();
        Buf gx = x.grad_ptr(), gy = y.grad_ptr();
        y.bind_node(t->record([gx, gy, n] {
            const double g = (*gy)[0] / n;
            for (int i = 0; i < n; ++i) (*gx)[i] += g;
        }));
    }
    return y;
}

Tensor channel_mean(Tape* t, const Tensor& x) {
    if (x.ndim() != 4 || x.dim(0) != 1)
        throw ShapeMismatch("channel_mean: input must be {1,c,h,w}");
    const int c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({c});
    for (int ci = 0; ci < c; ++ci)
        y.data()[ci] =
            kernels::sum(x.data() + static_cast<std::size_t>(ci) * hw, static_cast<std::size_t>(hw)) / hw;
    check_finite(y, "channel_mean");
    if (t && participating(x)) {
        y.ensure_grad();
        Buf gx = x.grad_ptr(), gy = y.grad_ptr();
        y.bind_node(t->record([gx, gy, c, hw] {
            for (int ci = 0; ci < c; ++ci) {
                const double g = (*gy)[static_cast<std::size_t>(ci)] / hw;
                double* row = gx->data() + static_cast<std::size_t>(ci) * hw;
                for (int i = 0; i < hw; ++i) row[i] += g;
            }
        }));
    }
    return y;
}

Tensor clamp(Tape* t, const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ShapeMismatch("clamp: lo must be <= hi");
    // subgradient at the interval boundary is 0: gradient passes only strictly inside
    return unary_map(
        t, x, "clamp", [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](double v, double) { return v > lo && v < hi ? 1.0 : 0.0; });
}

Tensor rsqrt(Tape* t, const Tensor& x, double eps) {
    return unary_map(
        t, x, "rsqrt", [eps](double v) { return 1.0 / std::sqrt(v + eps); },
        [](double, double y) { return -0.5 * y * y * y; });
}

Tensor channel_broadcast(Tape* t, const Tensor& v, int h, int w) {
    if (v.ndim() != 1) throw ShapeMismatch("channel_broadcast: input must be 1-d");
    if (h < 1 || w < 1) throw ShapeMismatch("channel_broadcast: target sides must be positive");
    const int c = v.dim(0), hw = h * w;
    Tensor y({1, c, h, w});
    double* yd = y.data();
    for (int ci = 0; ci < c; ++ci)
        std::fill(yd + static_cast<std::size_t>(ci) * hw, yd + static_cast<std::size_t>(ci + 1) * hw,
                  v.data()[ci]);
    check_finite(y, "channel_broadcast");
    if (t && participating(v)) {
        y.ensure_grad();
        Buf gv = v.grad_ptr(), gy = y.grad_ptr();
        y.bind_node(t->record([gv, gy, c, hw] {
            for (int ci = 0; ci < c; ++ci) {
                const double* row = gy->data() + static_cast<std::size_t>(ci) * hw;
                double s = 0.0;
                for (int i = 0; i < hw; ++i) s += row[i];
                (*gv)[static_cast<std::size_t>(ci)] += s;
            }
        }));
    }
    return y;
}

Tensor instance_norm(Tape* t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                     double eps) {
    if (x.ndim() != 4 || x.dim(0) != 1)
        throw ShapeMismatch("instance_norm: input must be {1,c,h,w}");
    const int c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gain.ndim() != 1 || gain.dim(0) != c || bias.ndim() != 1 || bias.dim(0) != c)
        throw ShapeMismatch("instance_norm: gain and bias must be {c}");
    if (!(eps > 0.0)) throw ShapeMismatch("instance_norm: eps must be positive");
    Tensor mu = channel_mean(t, x);
    Tensor centered = add(t, x, scale(t, channel_broadcast(t, mu, h, w), -1.0));
    Tensor var = channel_mean(t, mul(t, centered, centered));
    Tensor unit = mul(t, centered, channel_broadcast(t, rsqrt(t, var, eps), h, w));
    return add(t, mul(t, unit, channel_broadcast(t, gain, h, w)),
               channel_broadcast(t, bias, h, w));
}

Tensor bilinear_sample(Tape* t, const Tensor& feat, const Tensor& grid) {
    if (feat.ndim() != 4 || feat.dim(0) != 1)
        throw ShapeMismatch("bilinear_sample: feature must be {1,c,h,w}");
    if (grid.ndim() != 3 || grid.dim(0) != 2)
        throw ShapeMismatch("bilinear_sample: grid must be {2,ho,wo}");
    kernels::SampleDims d;
    d.c = feat.dim(1);
    d.hin = feat.dim(2);
    d.win = feat.dim(3);
    d.hout = grid.dim(1);
    d.wout = grid.dim(2);
    Tensor y({1, d.c, d.hout, d.wout});
    kernels::bilinear_fwd(feat.data(), grid.data(), y.data(), d);
    check_finite(y, "bilinear_sample");
    const bool gf = t && participating(feat);
    const bool gg = t && participating(grid);
    if (gf || gg) {
        y.ensure_grad();
        Buf fb = feat.data_ptr(), gb = grid.data_ptr(), gy = y.grad_ptr();
        Buf gfb = gf ? feat.grad_ptr() : nullptr;
        Buf ggb = gg ? grid.grad_ptr() : nullptr;
        y.bind_node(t->record([fb, gb, gy, gfb, ggb, d] {
            kernels::bilinear_bwd(fb->data(), gb->data(), gy->data(),
                                  gfb ? gfb->data() : nullptr, ggb ? ggb->data() : nullptr, d);
        }));
    }
    return y;
}

}  // namespace ops

Primitive primitive_from_string(const std::string& name) {
    if (name == "conv2d") return Primitive::Conv2d;
    if (name == "transposed-upsample") return Primitive::TransposedUpsample;
    if (name == "dense") return Primitive::Dense;
    if (name == "relu") return Primitive::Relu;
    if (name == "sigmoid") return Primitive::Sigmoid;
    if (name == "tanh") return Primitive::Tanh;
    if (name == "add") return Primitive::Add;
    if (name == "mul") return Primitive::Mul;
    if (name == "concat-channels") return Primitive::ConcatChannels;
    if (name == "mean") return Primitive::Mean;
    if (name == "clamp") return Primitive::Clamp;
    if (name == "bilinear-sample") return Primitive::BilinearSample;
    if (name == "rsqrt") return Primitive::RSqrt;
    if (name == "channel-broadcast") return Primitive::ChannelBroadcast;
    throw UnknownPrimitive("unknown primitive: " + name);
}

Tensor forward_primitive(Tape* t, Primitive kind, const std::vector<Tensor>& in,
                         const PrimitiveAttrs& attrs) {
    auto want = [&](std::size_t lo, std::size_t hi, const char* name) {
        if (in.size() < lo || in.size() > hi)
            throw ShapeMismatch(std::string(name) + ": wrong number of inputs");
    };
    switch (kind) {
        case Primitive::Conv2d:
            want(2, 3, "conv2d");
            return ops::conv2d(t, in[0], in[1], in.size() > 2 ? in[2] : Tensor(),
                               {attrs.stride, attrs.pad});
        case Primitive::TransposedUpsample:
            want(2, 3, "transposed-upsample");
            return ops::transposed_upsample(t, in[0], in[1], in.size() > 2 ? in[2] : Tensor());
        case Primitive::Dense:
            want(2, 3, "dense");
            return ops::dense(t, in[0], in[1], in.size() > 2 ? in[2] : Tensor());
        case Primitive::Relu:
            want(1, 1, "relu");
            return ops::relu(t, in[0]);
        case Primitive::Sigmoid:
            want(1, 1, "sigmoid");
            return ops::sigmoid(t, in[0]);
        case Primitive::Tanh:
            want(1, 1, "tanh");
            return ops::tanh(t, in[0]);
        case Primitive::Add:
            want(2, 2, "add");
            return ops::add(t, in[0], in[1]);
        case Primitive::Mul:
            want(2, 2, "mul");
            return ops::mul(t, in[0], in[1]);
        case Primitive::ConcatChannels:
            want(2, 2, "concat-channels");
            return ops::concat_channels(t, in[0], in[1]);
        case Primitive::Mean:
            want(1, 1, "mean");
            return ops::mean(t, in[0]);
        case Primitive::Clamp:
            want(1, 1, "clamp");
            return ops::clamp(t, in[0], attrs.lo, attrs.hi);
        case Primitive::BilinearSample:
            want(2, 2, "bilinear-sample");
            return ops::bilinear_sample(t, in[0], in[1]);
        case Primitive::RSqrt:
            want(1, 1, "rsqrt");
            return ops::rsqrt(t, in[0], attrs.eps);
        case Primitive::ChannelBroadcast:
            want(1, 1, "channel-broadcast");
            return ops::channel_broadcast(t, in[0], attrs.h, attrs.w);
    }
    throw UnknownPrimitive("unknown primitive id");
}

double grad_check(const std::function<Tensor(Tape*, const Tensor&)>& f, const Tensor& input,
                  double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) throw Error("grad_check: eps must be in (0, 1e-2]");
    const int n = input.size();
    const std::vector<double> base(input.data(), input.data() + n);

    auto eval = [&](const std::vector<double>& v) {
        Tensor x(input.shape(), v);
        Tensor y = f(nullptr, x);
        if (y.size() != 1) throw NonScalarLoss("grad_check: function must return a scalar");
        return y.item();
    };

    const double y1 = eval(base);
    const double y2 = eval(base);
    if (std::memcmp(&y1, &y2, sizeof(double)) != 0)
        throw NonDeterministicFunction("grad_check: forward passes disagree");

    Tape tape;
    Tensor x(input.shape(), base);
    x.set_requires_grad(true);
    Tensor loss = f(&tape, x);
    if (loss.size() != 1) throw NonScalarLoss("grad_check: function must return a scalar");
    tape.backward(loss);
    const std::vector<double> analytic(x.grad(), x.grad() + n);

    double worst = 0.0;
    std::vector<double> v = base;
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] + eps;
        const double yp = eval(v);
        v[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] - eps;
        const double ym = eval(v);
        v[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)];
        const double numeric = (yp - ym) / (2.0 * eps);
        const double a = analytic[static_cast<std::size_t>(i)];
        const double err = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
        if (err > worst) worst = err;
    }
    return worst;
}

}  // namespace steg
