#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "steg/adam.hpp"
#include "steg/rng.hpp"
#include "steg/tensor.hpp"

using namespace steg;

// ---------------------------------------------------------------------------
// Independent oracles. Plain nested loops, no shared code with the engine.
// ---------------------------------------------------------------------------

static std::vector<double> conv_oracle(const std::vector<double>& x, const std::vector<double>& w,
                                       const std::vector<double>& b, int n, int cin, int h,
                                       int win_, int cout, int kh, int kw, int stride, int pad) {
    const int hout = (h + 2 * pad - kh) / stride + 1;
    const int wout = (win_ + 2 * pad - kw) / stride + 1;
    std::vector<double> y(static_cast<std::size_t>(n) * cout * hout * wout, 0.0);
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < cout; ++co)
            for (int oy = 0; oy < hout; ++oy)
                for (int ox = 0; ox < wout; ++ox) {
                    double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= win_) continue;
                                acc += x[(((static_cast<std::size_t>(ni) * cin + ci) * h + iy) *
                                          win_) +
                                         ix] *
                                       w[(((static_cast<std::size_t>(co) * cin + ci) * kh + ky) *
                                          kw) +
                                         kx];
                            }
                    y[(((static_cast<std::size_t>(ni) * cout + co) * hout + oy) * wout) + ox] = acc;
                }
    return y;
}

static std::vector<double> dense_oracle(const std::vector<double>& x, const std::vector<double>& w,
                                        const std::vector<double>& b, int out, int in) {
    std::vector<double> y(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
        double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in; ++i)
            acc += w[static_cast<std::size_t>(o) * in + i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = acc;
    }
    return y;
}

// transposed conv, kernel 2x2, stride 2: each input pixel paints a 2x2 patch
static std::vector<double> tconv_oracle(const std::vector<double>& x, const std::vector<double>& w,
                                        const std::vector<double>& b, int n, int cin, int h,
                                        int win_, int cout) {
    const int ho = 2 * h, wo = 2 * win_;
    std::vector<double> y(static_cast<std::size_t>(n) * cout * ho * wo, 0.0);
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < cout; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < cin; ++ci)
                        acc += x[(((static_cast<std::size_t>(ni) * cin + ci) * h + oy / 2) * win_) +
                                 ox / 2] *
                               w[(((static_cast<std::size_t>(ci) * cout + co) * 2 + oy % 2) * 2) +
                                 ox % 2];
                    y[(((static_cast<std::size_t>(ni) * cout + co) * ho + oy) * wo) + ox] = acc;
                }
    return y;
}

static Tensor randt(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// ---------------------------------------------------------------------------
// Forward correctness
// ---------------------------------------------------------------------------

TEST_CASE("conv2d all-ones 2x2 kernel sums four ones") {
    Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor y = ops::conv2d(nullptr, x, w, Tensor());
    REQUIRE(y.shape() == std::vector<int>({1, 1, 2, 2}));
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == 4.0);
}

TEST_CASE("conv2d center-one 3x3 kernel with pad 1 is the identity") {
    Rng rng(11);
    Tensor x = randt(rng, {1, 1, 4, 5});
    Tensor w({1, 1, 3, 3});
    w.data()[4] = 1.0;
    Tensor y = ops::conv2d(nullptr, x, w, Tensor(), {1, 1});
    REQUIRE(y.shape() == x.shape());
    for (int i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d matches nested-loop oracle") {
    Rng rng(12);
    Tensor x = randt(rng, {1, 2, 5, 5});
    Tensor w = randt(rng, {3, 2, 3, 3});
    Tensor b = randt(rng, {3});
    const std::vector<std::pair<int, int>> geoms = {{1, 0}, {1, 1}, {2, 1}};
    for (auto [stride, pad] : geoms) {
        Tensor y = ops::conv2d(nullptr, x, w, b, {stride, pad});
        auto ref = conv_oracle({x.data(), x.data() + x.size()}, {w.data(), w.data() + w.size()},
                               {b.data(), b.data() + b.size()}, 1, 2, 5, 5, 3, 3, 3, stride, pad);
        REQUIRE(y.size() == static_cast<int>(ref.size()));
        for (int i = 0; i < y.size(); ++i)
            CHECK(std::fabs(y.data()[i] - ref[static_cast<std::size_t>(i)]) < 1e-12);
    }
}

TEST_CASE("transposed_upsample matches scatter oracle") {
    Rng rng(13);
    Tensor x = randt(rng, {2, 3, 4, 3});
    Tensor w = randt(rng, {3, 2, 2, 2});
    Tensor b = randt(rng, {2});
    Tensor y = ops::transposed_upsample(nullptr, x, w, b);
    REQUIRE(y.shape() == std::vector<int>({2, 2, 8, 6}));
    auto ref = tconv_oracle({x.data(), x.data() + x.size()}, {w.data(), w.data() + w.size()},
                            {b.data(), b.data() + b.size()}, 2, 3, 4, 3, 2);
    for (int i = 0; i < y.size(); ++i)
        CHECK(std::fabs(y.data()[i] - ref[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("dense matches oracle") {
    Rng rng(14);
    Tensor x = randt(rng, {7});
    Tensor w = randt(rng, {4, 7});
    Tensor b = randt(rng, {4});
    Tensor y = ops::dense(nullptr, x, w, b);
    auto ref = dense_oracle({x.data(), x.data() + 7}, {w.data(), w.data() + 28},
                            {b.data(), b.data() + 4}, 4, 7);
    for (int i = 0; i < 4; ++i)
        CHECK(std::fabs(y.data()[i] - ref[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("concat_channels stacks along dim 1") {
    Rng rng(15);
    Tensor a = randt(rng, {2, 2, 3, 3});
    Tensor b = randt(rng, {2, 1, 3, 3});
    Tensor y = ops::concat_channels(nullptr, a, b);
    REQUIRE(y.shape() == std::vector<int>({2, 3, 3, 3}));
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 9; ++i) {
                const double got = y.data()[(n * 3 + c) * 9 + i];
                const double want =
                    c < 2 ? a.data()[(n * 2 + c) * 9 + i] : b.data()[(n * 1 + (c - 2)) * 9 + i];
                CHECK(got == want);
            }
}

TEST_CASE("bilinear_sample with the identity grid reproduces the image") {
    Rng rng(16);
    const int h = 5, w = 6;
    Tensor feat = randt(rng, {1, 2, h, w});
    Tensor grid({2, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            grid.data()[0 * h * w + y * w + x] = 2.0 * x / (w - 1) - 1.0;
            grid.data()[1 * h * w + y * w + x] = 2.0 * y / (h - 1) - 1.0;
        }
    Tensor out = ops::bilinear_sample(nullptr, feat, grid);
    for (int i = 0; i < feat.size(); ++i)
        CHECK(std::fabs(out.data()[i] - feat.data()[i]) < 1e-12);
}

TEST_CASE("rsqrt matches the closed form and rejects non-positive input") {
    Tensor x({3}, {4.0, 0.25, 1.0});
    Tensor y = ops::rsqrt(nullptr, x);
    CHECK(y.data()[0] == 0.5);
    CHECK(y.data()[1] == 2.0);
    CHECK(y.data()[2] == 1.0);
    Tensor shifted({1}, {3.0});
    CHECK(std::fabs(ops::rsqrt(nullptr, shifted, 1.0).data()[0] - 0.5) < 1e-15);
    Tensor zero({1}, {0.0});
    CHECK_THROWS_AS(ops::rsqrt(nullptr, zero), NonFiniteOutput);
    Tensor neg({1}, {-1.0});
    CHECK_THROWS_AS(ops::rsqrt(nullptr, neg, 0.5), NonFiniteOutput);
}

TEST_CASE("channel_broadcast tiles each channel value") {
    Tensor v({2}, {3.0, -1.5});
    Tensor y = ops::channel_broadcast(nullptr, v, 2, 3);
    REQUIRE(y.shape() == std::vector<int>({1, 2, 2, 3}));
    for (int i = 0; i < 6; ++i) {
        CHECK(y.data()[i] == 3.0);
        CHECK(y.data()[6 + i] == -1.5);
    }
    CHECK_THROWS_AS(ops::channel_broadcast(nullptr, Tensor({2, 2}), 2, 2), ShapeMismatch);
    CHECK_THROWS_AS(ops::channel_broadcast(nullptr, v, 0, 2), ShapeMismatch);
}

TEST_CASE("instance_norm matches a direct oracle and standardizes each channel") {
    Rng rng(61);
    const int c = 3, h = 4, w = 5, hw = h * w;
    Tensor x = randt(rng, {1, c, h, w}, -2.0, 2.0);
    Tensor gain = randt(rng, {c}, 0.5, 1.5);
    Tensor bias = randt(rng, {c}, -0.5, 0.5);
    const double eps = 1e-5;
    Tensor y = ops::instance_norm(nullptr, x, gain, bias, eps);
    REQUIRE(y.shape() == x.shape());
    for (int ci = 0; ci < c; ++ci) {
        const double* row = x.data() + ci * hw;
        double mu = 0.0;
        for (int i = 0; i < hw; ++i) mu += row[i];
        mu /= hw;
        double var = 0.0;
        for (int i = 0; i < hw; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= hw;
        for (int i = 0; i < hw; ++i) {
            const double want =
                (row[i] - mu) / std::sqrt(var + eps) * gain.data()[ci] + bias.data()[ci];
            CHECK(std::fabs(y.data()[ci * hw + i] - want) < 1e-12);
        }
    }

    // unit gain, zero bias: output is standardized per channel
    Tensor ones = Tensor::full({c}, 1.0);
    Tensor zeros({c});
    Tensor z = ops::instance_norm(nullptr, x, ones, zeros, eps);
    for (int ci = 0; ci < c; ++ci) {
        double mu = 0.0, var = 0.0;
        const double* row = z.data() + ci * hw;
        for (int i = 0; i < hw; ++i) mu += row[i];
        mu /= hw;
        for (int i = 0; i < hw; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= hw;
        CHECK(std::fabs(mu) < 1e-12);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }

    CHECK_THROWS_AS(ops::instance_norm(nullptr, Tensor({2, 2}), ones, zeros), ShapeMismatch);
    CHECK_THROWS_AS(ops::instance_norm(nullptr, x, Tensor({c + 1}), zeros), ShapeMismatch);
    CHECK_THROWS_AS(ops::instance_norm(nullptr, x, ones, zeros, 0.0), ShapeMismatch);
}

TEST_CASE("forward_primitive matches the direct op calls") {
    Rng rng(17);
    Tensor x = randt(rng, {1, 2, 4, 4});
    Tensor w = randt(rng, {2, 2, 3, 3});
    PrimitiveAttrs attrs;
    attrs.stride = 1;
    attrs.pad = 1;
    Tensor a = forward_primitive(nullptr, primitive_from_string("conv2d"), {x, w}, attrs);
    Tensor b = ops::conv2d(nullptr, x, w, Tensor(), {1, 1});
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

    Tensor r1 = forward_primitive(nullptr, primitive_from_string("relu"), {x});
    Tensor r2 = ops::relu(nullptr, x);
    for (int i = 0; i < x.size(); ++i) CHECK(r1.data()[i] == r2.data()[i]);

    Tensor v = randt(rng, {2}, 0.5, 1.5);
    PrimitiveAttrs battrs;
    battrs.h = 3;
    battrs.w = 2;
    Tensor b1 = forward_primitive(nullptr, primitive_from_string("channel-broadcast"), {v}, battrs);
    Tensor b2 = ops::channel_broadcast(nullptr, v, 3, 2);
    for (int i = 0; i < b1.size(); ++i) CHECK(b1.data()[i] == b2.data()[i]);

    PrimitiveAttrs rattrs;
    rattrs.eps = 1e-3;
    Tensor q1 = forward_primitive(nullptr, primitive_from_string("rsqrt"), {v}, rattrs);
    Tensor q2 = ops::rsqrt(nullptr, v, 1e-3);
    for (int i = 0; i < q1.size(); ++i) CHECK(q1.data()[i] == q2.data()[i]);

    CHECK_THROWS_AS(primitive_from_string("softmax"), UnknownPrimitive);
    CHECK_THROWS_AS(forward_primitive(nullptr, Primitive::Relu, {x, w}), ShapeMismatch);
}

TEST_CASE("forward is deterministic bit for bit") {
    Rng rng(18);
    Tensor x = randt(rng, {1, 3, 6, 6});
    Tensor w = randt(rng, {4, 3, 3, 3});
    Tensor y1 = ops::conv2d(nullptr, x, w, Tensor(), {1, 1});
    Tensor y2 = ops::conv2d(nullptr, x, w, Tensor(), {1, 1});
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(double) * static_cast<std::size_t>(y1.size())) ==
          0);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

TEST_CASE("mean backward distributes 1/n") {
    Tape tape;
    Tensor x = Tensor::full({4}, 2.0).set_requires_grad(true);
    Tensor loss = ops::mean(&tape, x);
    tape.backward(loss);
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 0.25);
}

TEST_CASE("sigmoid backward at zero gives one quarter") {
    Tape tape;
    Tensor x = Tensor::scalar(0.0).set_requires_grad(true);
    Tensor loss = ops::sigmoid(&tape, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("three-layer composition matches finite differences") {
    Rng rng(19);
    Tensor w1 = randt(rng, {3, 2, 3, 3}, -0.5, 0.5);
    Tensor w2 = randt(rng, {2, 3, 3, 3}, -0.5, 0.5);
    auto f = [&](Tape* t, const Tensor& in) {
        Tensor h1 = ops::tanh(t, ops::conv2d(t, in, w1, Tensor(), {1, 1}));
        Tensor h2 = ops::sigmoid(t, ops::conv2d(t, h1, w2, Tensor(), {1, 1}));
        return ops::mean(t, ops::mul(t, h2, h2));
    };
    Tensor x = randt(rng, {1, 2, 5, 5});
    CHECK(grad_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("backward is linear over a sum of losses") {
    Rng rng(20);
    for (int rep = 0; rep < 8; ++rep) {
        Tensor xa = randt(rng, {1, 1, 4, 4});
        Tensor k = randt(rng, {1, 1, 3, 3});

        Tensor x1(xa.shape(), {xa.data(), xa.data() + xa.size()});
        x1.set_requires_grad(true);
        Tape t1;
        Tensor l1 = ops::mean(&t1, ops::relu(&t1, ops::conv2d(&t1, x1, k, Tensor(), {1, 1})));
        Tensor l2 = ops::mean(&t1, ops::mul(&t1, x1, x1));
        Tensor sum = ops::add(&t1, l1, l2);
        t1.backward(sum);

        Tensor x2(xa.shape(), {xa.data(), xa.data() + xa.size()});
        x2.set_requires_grad(true);
        Tape t2;
        Tensor m1 = ops::mean(&t2, ops::relu(&t2, ops::conv2d(&t2, x2, k, Tensor(), {1, 1})));
        t2.backward(m1);
        Tape t3;
        Tensor m2 = ops::mean(&t3, ops::mul(&t3, x2, x2));
        t3.backward(m2);  // accumulates on top of the first sweep

        for (int i = 0; i < xa.size(); ++i)
            CHECK(std::fabs(x1.grad()[i] - x2.grad()[i]) < 1e-12);
    }
}

TEST_CASE("clamp gradient is 1 strictly inside and 0 elsewhere") {
    Tape tape;
    Tensor x({6}, {-0.5, 0.0, 0.25, 0.75, 1.0, 1.5});
    x.set_requires_grad(true);
    Tensor y = ops::clamp(&tape, x, 0.0, 1.0);
    Tensor loss = ops::mean(&tape, y);
    tape.backward(loss);
    const double inside = 1.0 / 6.0;
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);  // boundary counts as saturated
    CHECK(x.grad()[2] == doctest::Approx(inside).epsilon(1e-15));
    CHECK(x.grad()[3] == doctest::Approx(inside).epsilon(1e-15));
    CHECK(x.grad()[4] == 0.0);
    CHECK(x.grad()[5] == 0.0);
}

TEST_CASE("non-participating leaves stay at zero grad") {
    Rng rng(21);
    Tensor x = randt(rng, {1, 1, 4, 4}).set_requires_grad(true);
    Tensor w = randt(rng, {1, 1, 3, 3});  // no grad buffer requested
    Tensor unused = randt(rng, {3}).set_requires_grad(true);
    Tape tape;
    Tensor loss = ops::mean(&tape, ops::conv2d(&tape, x, w, Tensor(), {1, 1}));
    tape.backward(loss);
    CHECK(w.grad() == nullptr);
    for (int i = 0; i < unused.size(); ++i) CHECK(unused.grad()[i] == 0.0);
    double gsum = 0.0;
    for (int i = 0; i < x.size(); ++i) gsum += std::fabs(x.grad()[i]);
    CHECK(gsum > 0.0);
}

// ---------------------------------------------------------------------------
// grad_check per primitive
// ---------------------------------------------------------------------------

namespace {

// keeps random draws away from relu/clamp kinks and bilinear cell edges
Tensor rand_away_from(Rng& rng, std::vector<int> shape, const std::vector<double>& kinks,
                      double margin) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) {
        double v;
        bool ok;
        do {
            v = rng.uniform(-1.5, 1.5);
            ok = true;
            for (double k : kinks)
                if (std::fabs(v - k) < margin) ok = false;
        } while (!ok);
        t.data()[i] = v;
    }
    return t;
}

}  // namespace

TEST_CASE("every primitive passes grad_check on 100+ random instances") {
    Rng rng(22);
    int instances = 0;
    double worst = 0.0;
    auto run = [&](const std::function<Tensor(Tape*, const Tensor&)>& f, const Tensor& in) {
        const double e = grad_check(f, in, 1e-5);
        worst = std::max(worst, e);
        CHECK(e < 1e-4);
        ++instances;
    };

    for (int rep = 0; rep < 10; ++rep) {
        {
            Tensor w = randt(rng, {2, 2, 3, 3}, -0.7, 0.7);
            Tensor b = randt(rng, {2}, -0.3, 0.3);
            run([&](Tape* t, const Tensor& x) {
                return ops::mean(t, ops::conv2d(t, x, w, b, {1, 1}));
            },
                randt(rng, {1, 2, 4, 4}));
            Tensor x = randt(rng, {1, 2, 4, 4});
            run([&](Tape* t, const Tensor& wv) {
                return ops::mean(t, ops::conv2d(t, x, wv, b, {2, 1}));
            },
                w);
        }
        {
            Tensor w = randt(rng, {2, 3, 2, 2}, -0.7, 0.7);
            Tensor b = randt(rng, {3}, -0.3, 0.3);
            run([&](Tape* t, const Tensor& x) {
                return ops::mean(t, ops::transposed_upsample(t, x, w, b));
            },
                randt(rng, {1, 2, 3, 3}));
            Tensor x = randt(rng, {1, 2, 3, 3});
            run([&](Tape* t, const Tensor& wv) {
                return ops::mean(t, ops::transposed_upsample(t, x, wv, b));
            },
                w);
        }
        {
            Tensor w = randt(rng, {3, 5}, -0.7, 0.7);
            Tensor b = randt(rng, {3}, -0.3, 0.3);
            run([&](Tape* t, const Tensor& x) { return ops::mean(t, ops::dense(t, x, w, b)); },
                randt(rng, {5}));
            Tensor x = randt(rng, {5});
            run([&](Tape* t, const Tensor& wv) { return ops::mean(t, ops::dense(t, x, wv, b)); },
                w);
        }
        run([](Tape* t, const Tensor& x) { return ops::mean(t, ops::relu(t, x)); },
            rand_away_from(rng, {9}, {0.0}, 0.05));
        run([](Tape* t, const Tensor& x) { return ops::mean(t, ops::sigmoid(t, x)); },
            randt(rng, {9}, -2.0, 2.0));
        run([](Tape* t, const Tensor& x) { return ops::mean(t, ops::tanh(t, x)); },
            randt(rng, {9}, -2.0, 2.0));
        {
            Tensor other = randt(rng, {7});
            run([&](Tape* t, const Tensor& x) { return ops::mean(t, ops::add(t, x, other)); },
                randt(rng, {7}));
            run([&](Tape* t, const Tensor& x) { return ops::mean(t, ops::mul(t, x, other)); },
                randt(rng, {7}));
            Tensor s = randt(rng, {1});
            run([&](Tape* t, const Tensor& x) { return ops::mean(t, ops::add(t, x, s)); },
                randt(rng, {7}));
            run([&](Tape* t, const Tensor& x) { return ops::mean(t, ops::mul(t, s, x)); },
                randt(rng, {7}));
        }
        {
            Tensor other = randt(rng, {1, 2, 3, 3});
            run([&](Tape* t, const Tensor& x) {
                return ops::mean(t, ops::concat_channels(t, x, other));
            },
                randt(rng, {1, 1, 3, 3}));
        }
        run([](Tape* t, const Tensor& x) { return ops::mean(t, x); }, randt(rng, {11}));
        run([](Tape* t, const Tensor& x) { return ops::mean(t, ops::clamp(t, x, -0.5, 0.5)); },
            rand_away_from(rng, {9}, {-0.5, 0.5}, 0.05));
        {
            // feature gradient: fixed safe grid
            const int h = 4, w = 4;
            Tensor grid({2, 3, 3});
            for (int i = 0; i < 9; ++i) {
                const double px = 0.3 + rng.uniform(0.0, 0.4) + (i % 3);
                const double py = 0.3 + rng.uniform(0.0, 0.4) + (i / 3);
                grid.data()[i] = 2.0 * px / (w - 1) - 1.0;
                grid.data()[9 + i] = 2.0 * py / (h - 1) - 1.0;
            }
            run([&](Tape* t, const Tensor& f) {
                return ops::mean(t, ops::bilinear_sample(t, f, grid));
            },
                randt(rng, {1, 2, h, w}));
            // coordinate gradient: fixed feature, perturb the grid
            Tensor feat = randt(rng, {1, 1, h, w});
            run([&](Tape* t, const Tensor& g) {
                return ops::mean(t, ops::bilinear_sample(t, feat, g));
            },
                grid);
        }
        run([](Tape* t, const Tensor& x) { return ops::mean(t, ops::rsqrt(t, x, 1e-5)); },
            randt(rng, {9}, 0.3, 2.0));
        run([](Tape* t, const Tensor& x) {
            return ops::mean(t, ops::channel_broadcast(t, x, 2, 3));
        },
            randt(rng, {3}));
        {
            // the spatial mean of a normalized channel is zero by construction,
            // so scalarize through a random probe to keep the gradient nonzero
            Tensor gain = randt(rng, {2}, 0.5, 1.5);
            Tensor bias = randt(rng, {2}, -0.3, 0.3);
            Tensor probe = randt(rng, {1, 2, 3, 3});
            run([&](Tape* t, const Tensor& x) {
                return ops::mean(t, ops::mul(t, ops::instance_norm(t, x, gain, bias), probe));
            },
                randt(rng, {1, 2, 3, 3}));
            Tensor x = randt(rng, {1, 2, 3, 3});
            run([&](Tape* t, const Tensor& g) {
                return ops::mean(t, ops::mul(t, ops::instance_norm(t, x, g, bias), probe));
            },
                gain);
            run([&](Tape* t, const Tensor& b) {
                return ops::mean(t, ops::mul(t, ops::instance_norm(t, x, gain, b), probe));
            },
                bias);
        }
    }
    CHECK(instances >= 100);
    MESSAGE("grad_check instances: " << instances << ", worst relative error: " << worst);
}

TEST_CASE("grad_check trivia from the contract") {
    // relu away from the kink, step chosen so x +/- eps is exact in binary
    Tensor two = Tensor::scalar(2.0);
    CHECK(grad_check([](Tape* t, const Tensor& x) { return ops::relu(t, x); }, two, 1.0 / 256) ==
          0.0);
    // x^2 at 3
    Tensor three = Tensor::scalar(3.0);
    CHECK(grad_check([](Tape* t, const Tensor& x) { return ops::mul(t, x, x); }, three, 1e-5) <
          1e-8);
}

// ---------------------------------------------------------------------------
// Error paths
// ---------------------------------------------------------------------------

TEST_CASE("shape errors") {
    Tensor x({1, 2, 4, 4});
    Tensor w_badc({3, 3, 3, 3});
    CHECK_THROWS_AS(ops::conv2d(nullptr, x, w_badc, Tensor()), ShapeMismatch);
    CHECK_THROWS_AS(ops::conv2d(nullptr, x.reshaped({2, 4, 4}), w_badc, Tensor()), ShapeMismatch);
    Tensor w({2, 2, 3, 3});
    CHECK_THROWS_AS(ops::conv2d(nullptr, x, w, Tensor::full({3}, 0.0)), ShapeMismatch);
    CHECK_THROWS_AS(ops::conv2d(nullptr, x, w, Tensor(), {0, 0}), ShapeMismatch);
    CHECK_THROWS_AS(ops::conv2d(nullptr, x, Tensor::full({2, 2, 5, 5}, 1.0), Tensor()),
                    ShapeMismatch);  // kernel larger than padded input
    CHECK_THROWS_AS(ops::add(nullptr, Tensor({3}), Tensor({4})), ShapeMismatch);
    CHECK_THROWS_AS(ops::dense(nullptr, Tensor({3}), Tensor({2, 4}), Tensor()), ShapeMismatch);
    CHECK_THROWS_AS(ops::concat_channels(nullptr, Tensor({1, 1, 3, 3}), Tensor({1, 1, 4, 3})),
                    ShapeMismatch);
    CHECK_THROWS_AS(ops::clamp(nullptr, Tensor({3}), 1.0, 0.0), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({2}).reshaped({3}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({0}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), ShapeMismatch);
}

TEST_CASE("non-finite forward output is rejected") {
    Tensor huge = Tensor::full({2}, 1e308);
    CHECK_THROWS_AS(ops::mul(nullptr, huge, huge), NonFiniteOutput);
}

TEST_CASE("backward rejects bad losses") {
    Tape tape;
    Tensor x = Tensor::full({4}, 1.0).set_requires_grad(true);
    Tensor y = ops::relu(&tape, x);
    CHECK_THROWS_AS(tape.backward(y), NonScalarLoss);
    Tensor leaf = Tensor::scalar(1.0).set_requires_grad(true);
    CHECK_THROWS_AS(tape.backward(leaf), DetachedLoss);
    CHECK_THROWS_AS(Tensor::full({4}, 1.0).item(), NonScalarLoss);
}

TEST_CASE("grad_check rejects nondeterministic functions and bad eps") {
    Tensor in = Tensor::scalar(1.0);
    int calls = 0;
    auto flaky = [&calls](Tape* t, const Tensor& x) {
        return ops::add(t, x, Tensor::scalar(0.001 * ++calls));
    };
    CHECK_THROWS_AS(grad_check(flaky, in, 1e-5), NonDeterministicFunction);
    auto fine = [](Tape* t, const Tensor& x) { return ops::mul(t, x, x); };
    CHECK_THROWS_AS(grad_check(fine, in, 0.0), Error);
    CHECK_THROWS_AS(grad_check(fine, in, 0.5), Error);
    CHECK_THROWS_AS(
        grad_check([](Tape* t, const Tensor& x) { return ops::relu(t, x); }, Tensor({3}), 1e-5),
        NonScalarLoss);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST_CASE("adam leaves parameters alone when gradients are zero") {
    Tensor p = Tensor::full({3}, 0.7).set_requires_grad(true);
    Adam opt({p}, {});
    opt.step();
    for (int i = 0; i < 3; ++i) {
        CHECK(p.data()[i] == 0.7);
        CHECK(opt.moment1(0)[static_cast<std::size_t>(i)] == 0.0);
        CHECK(opt.moment2(0)[static_cast<std::size_t>(i)] == 0.0);
    }
}

TEST_CASE("adam first step matches the closed form") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    Tensor p({3}, {1.0, -2.0, 0.5});
    p.set_requires_grad(true);
    const double g[3] = {0.3, -0.9, 0.001};
    for (int i = 0; i < 3; ++i) p.grad()[i] = g[i];
    Adam opt({p}, cfg);
    opt.step();
    for (int i = 0; i < 3; ++i) {
        // t=1: mhat = g, vhat = g^2, so the update is lr * g / (|g| + eps)
        const double expect =
            (i == 0 ? 1.0 : i == 1 ? -2.0 : 0.5) - cfg.lr * g[i] / (std::fabs(g[i]) + cfg.eps);
        CHECK(p.data()[i] == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(opt.steps() == 1);
}

TEST_CASE("adam drives a scalar quadratic to its minimum") {
    AdamConfig cfg;
    cfg.lr = 0.1;
    Tensor p = Tensor::scalar(0.0).set_requires_grad(true);
    Adam opt({p}, cfg);
    for (int step = 0; step < 200; ++step) {
        opt.zero_grad();
        p.grad()[0] = 2.0 * (p.data()[0] - 5.0);
        opt.step();
    }
    CHECK(std::fabs(p.data()[0] - 5.0) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients and bad config") {
    Tensor p = Tensor::scalar(1.0).set_requires_grad(true);
    Adam opt({p}, {});
    p.grad()[0] = std::nan("");
    CHECK_THROWS_AS(opt.step(), NonFiniteGradient);
    AdamConfig bad;
    bad.lr = -1.0;
    Tensor q = Tensor::scalar(1.0).set_requires_grad(true);
    CHECK_THROWS_AS(Adam({q}, bad), InvalidConfig);
    CHECK_THROWS_AS(Adam({Tensor::scalar(1.0)}, {}), InvalidConfig);
}

TEST_CASE("adam trains a dense layer to fit a fixed target") {
    Rng rng(23);
    Tensor w = randt(rng, {2, 4}, -0.1, 0.1).set_requires_grad(true);
    Tensor b = Tensor({2}).set_requires_grad(true);
    Tensor x = randt(rng, {4});
    Tensor target({2}, {0.3, -0.4});
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt({w, b}, cfg);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 300; ++step) {
        opt.zero_grad();
        Tape tape;
        Tensor y = ops::dense(&tape, x, w, b);
        Tensor d = ops::add(&tape, y, ops::scale(&tape, target, -1.0));
        Tensor loss = ops::mean(&tape, ops::mul(&tape, d, d));
        if (step == 0) first = loss.item();
        last = loss.item();
        tape.backward(loss);
        opt.step();
    }
    CHECK(last < first * 1e-4);
}
