#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "steg/error.hpp"

namespace steg {

// Dense row-major 64-bit float array. Copies share the underlying value and
// gradient buffers (cheap aliasing), which is how leaf parameters held by the
// caller receive gradients written during a backward sweep. Values are treated
// as immutable once a forward pass has produced them.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor full(std::vector<int> shape, double v);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int size() const { return size_; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    double item() const;

    bool requires_grad() const { return grad_ != nullptr; }
    Tensor& set_requires_grad(bool on);
    double* grad() { return grad_ ? grad_->data() : nullptr; }
    const double* grad() const { return grad_ ? grad_->data() : nullptr; }
    void zero_grad();

    // id of the tape node that produced this tensor, -1 for leaves
    int node() const { return node_; }

    // view with a new shape over the same buffers (and the same tape node)
    Tensor reshaped(std::vector<int> shape) const;

    // internal plumbing used by the op implementations
    const std::shared_ptr<std::vector<double>>& data_ptr() const { return data_; }
    const std::shared_ptr<std::vector<double>>& grad_ptr() const { return grad_; }
    void ensure_grad();
    void bind_node(int id) { node_ = id; }

private:
    std::vector<int> shape_;
    int size_ = 0;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    int node_ = -1;
};

// Record of one training-step graph. Ops append a backward closure per
// application; creation order is topological, so the backward sweep is a
// single reverse iteration that touches every node exactly once.
class Tape {
public:
    int record(std::function<void()> fn);
    int size() const { return static_cast<int>(nodes_.size()); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
    // into every participating tensor's grad buffer. Consumes the tape.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> nodes_;
};

namespace ops {

struct ConvAttrs {
    int stride = 1;
    int pad = 0;
};

// x {n,cin,h,w}, w {cout,cin,kh,kw}, bias {cout} or undefined
Tensor conv2d(Tape* t, const Tensor& x, const Tensor& w, const Tensor& bias, ConvAttrs a = {});
// transposed 2x upsample: x {n,cin,h,w}, w {cin,cout,2,2} -> {n,cout,2h,2w}
Tensor transposed_upsample(Tape* t, const Tensor& x, const Tensor& w, const Tensor& bias);
// x {in}, w {out,in}, b {out} or undefined
Tensor dense(Tape* t, const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(Tape* t, const Tensor& x);
Tensor sigmoid(Tape* t, const Tensor& x);
Tensor tanh(Tape* t, const Tensor& x);
// same shape, or one side scalar
Tensor add(Tape* t, const Tensor& a, const Tensor& b);
Tensor mul(Tape* t, const Tensor& a, const Tensor& b);
Tensor scale(Tape* t, const Tensor& x, double c);
Tensor concat_channels(Tape* t, const Tensor& a, const Tensor& b);
Tensor mean(Tape* t, const Tensor& x);
// spatial mean per channel: {1,c,h,w} -> {c}
Tensor channel_mean(Tape* t, const Tensor& x);
Tensor clamp(Tape* t, const Tensor& x, double lo, double hi);
// feat {1,c,h,w}, grid {2,ho,wo} with normalized [-1,1] coords -> {1,c,ho,wo}
Tensor bilinear_sample(Tape* t, const Tensor& feat, const Tensor& grid);
// elementwise 1/sqrt(x + eps); requires x + eps > 0
Tensor rsqrt(Tape* t, const Tensor& x, double eps = 0.0);
// tile a per-channel vector {c} to {1,c,h,w}
Tensor channel_broadcast(Tape* t, const Tensor& v, int h, int w);
// per-channel spatial normalization with learnable gain and bias:
// (x - mean_c) / sqrt(var_c + eps) * gain[c] + bias[c]
Tensor instance_norm(Tape* t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                     double eps = 1e-5);

}  // namespace ops

enum class Primitive {
    Conv2d,
    TransposedUpsample,
    Dense,
    Relu,
    Sigmoid,
    Tanh,
    Add,
    Mul,
    ConcatChannels,
    Mean,
    Clamp,
    BilinearSample,
    RSqrt,
    ChannelBroadcast,
};

struct PrimitiveAttrs {
    int stride = 1;
    int pad = 0;
    double lo = 0.0;
    double hi = 1.0;
    double eps = 0.0;  // rsqrt
    int h = 1;         // channel-broadcast target height
    int w = 1;         // channel-broadcast target width
};

Primitive primitive_from_string(const std::string& name);
Tensor forward_primitive(Tape* t, Primitive kind, const std::vector<Tensor>& inputs,
                         const PrimitiveAttrs& attrs = {});

// Central-difference gradient check of a scalar-valued function. Runs the
// forward pass twice and requires bit-identical outputs before trusting it.
// Returns max over coordinates of |analytic - numeric| / max(1e-8, |a| + |n|).
double grad_check(const std::function<Tensor(Tape*, const Tensor&)>& f, const Tensor& input,
                  double eps);

void check_finite(const Tensor& x, const char* op);

}  // namespace steg
