// Kernel bodies shared by the serial and OpenMP translation units.
// STEG_PAR expands to an `omp parallel for` pragma in the OpenMP build and to
// nothing in the serial build. The arithmetic inside one output element is
// identical either way, which is what makes the two backends bit-exact.

#ifndef STEG_PAR
#error "STEG_PAR must be defined before including kernels_body.inl"
#endif

void conv2d_fwd(const double* x, const double* w, const double* bias, double* y,
                const ConvDims& d) {
    const int rows = d.n * d.cout * d.hout;
    STEG_PAR
    for (int r = 0; r < rows; ++r) {
        const int oy = r % d.hout;
        const int co = (r / d.hout) % d.cout;
        const int n = r / (d.hout * d.cout);
        double* yrow = y + (static_cast<std::size_t>(r)) * d.wout;
        const double bv = bias ? bias[co] : 0.0;
        for (int ox = 0; ox < d.wout; ++ox) yrow[ox] = bv;
        for (int ci = 0; ci < d.cin; ++ci) {
            const double* xpl = x + ((static_cast<std::size_t>(n) * d.cin + ci) * d.hin) * d.win;
            const double* wpl = w + ((static_cast<std::size_t>(co) * d.cin + ci) * d.kh) * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int iy = oy * d.stride + ky - d.pad;
                if (iy < 0 || iy >= d.hin) continue;
                const double* xrow = xpl + static_cast<std::size_t>(iy) * d.win;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = wpl[ky * d.kw + kx];
                    // ox range keeping ix = ox*stride + kx - pad inside the row
                    int lo = 0, hi = d.wout;
                    if (kx - d.pad < 0) lo = (d.pad - kx + d.stride - 1) / d.stride;
                    while (hi > lo && (hi - 1) * d.stride + kx - d.pad >= d.win) --hi;
                    const double* xsh = xrow + kx - d.pad;
                    if (d.stride == 1) {
                        for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xsh[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xsh[ox * d.stride];
                    }
                }
            }
        }
    }
}

void conv2d_bwd_x(const double* w, const double* gy, double* gx, const ConvDims& d) {
    const int rows = d.n * d.cin * d.hin;
    STEG_PAR
    for (int r = 0; r < rows; ++r) {
        const int iy = r % d.hin;
        const int ci = (r / d.hin) % d.cin;
        const int n = r / (d.hin * d.cin);
        double* gxrow = gx + static_cast<std::size_t>(r) * d.win;
        for (int co = 0; co < d.cout; ++co) {
            const double* gypl =
                gy + ((static_cast<std::size_t>(n) * d.cout + co) * d.hout) * d.wout;
            const double* wpl = w + ((static_cast<std::size_t>(co) * d.cin + ci) * d.kh) * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int ty = iy + d.pad - ky;
                if (ty < 0 || ty % d.stride != 0) continue;
                const int oy = ty / d.stride;
                if (oy >= d.hout) continue;
                const double* gyrow = gypl + static_cast<std::size_t>(oy) * d.wout;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = wpl[ky * d.kw + kx];
                    if (d.stride == 1) {
                        // ix range keeping ox = ix + pad - kx inside the row
                        int lo = kx - d.pad;
                        if (lo < 0) lo = 0;
                        int hi = d.wout - 1 + kx - d.pad;
                        if (hi > d.win - 1) hi = d.win - 1;
                        const double* gsh = gyrow + d.pad - kx;
                        for (int ix = lo; ix <= hi; ++ix) gxrow[ix] += wv * gsh[ix];
                    } else {
                        // first ix >= 0 whose ox = (ix + pad - kx) / stride is integral
                        int ix0 = kx - d.pad;
                        int ox0 = 0;
                        if (ix0 < 0) {
                            ox0 = (-ix0 + d.stride - 1) / d.stride;
                            ix0 += ox0 * d.stride;
                        }
                        for (int ix = ix0, ox = ox0; ix < d.win && ox < d.wout;
                             ix += d.stride, ++ox)
                            gxrow[ix] += wv * gyrow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_bwd_w(const double* x, const double* gy, double* gw, const ConvDims& d) {
    const int wcount = d.cout * d.cin * d.kh * d.kw;
    STEG_PAR
    for (int widx = 0; widx < wcount; ++widx) {
        const int kx = widx % d.kw;
        const int ky = (widx / d.kw) % d.kh;
        const int ci = (widx / (d.kw * d.kh)) % d.cin;
        const int co = widx / (d.kw * d.kh * d.cin);
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* xpl = x + ((static_cast<std::size_t>(n) * d.cin + ci) * d.hin) * d.win;
            const double* gypl =
                gy + ((static_cast<std::size_t>(n) * d.cout + co) * d.hout) * d.wout;
            for (int oy = 0; oy < d.hout; ++oy) {
                const int iy = oy * d.stride + ky - d.pad;
                if (iy < 0 || iy >= d.hin) continue;
                const double* xrow = xpl + static_cast<std::size_t>(iy) * d.win + kx - d.pad;
                const double* gyrow = gypl + static_cast<std::size_t>(oy) * d.wout;
                int lo = 0, hi = d.wout;
                if (kx - d.pad < 0) lo = (d.pad - kx + d.stride - 1) / d.stride;
                while (hi > lo && (hi - 1) * d.stride + kx - d.pad >= d.win) --hi;
                if (d.stride == 1) {
                    // four independent partial sums so the FMA chain pipelines
                    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                    int ox = lo;
                    for (; ox + 4 <= hi; ox += 4) {
                        a0 += gyrow[ox] * xrow[ox];
                        a1 += gyrow[ox + 1] * xrow[ox + 1];
                        a2 += gyrow[ox + 2] * xrow[ox + 2];
                        a3 += gyrow[ox + 3] * xrow[ox + 3];
                    }
                    for (; ox < hi; ++ox) a0 += gyrow[ox] * xrow[ox];
                    acc += (a0 + a1) + (a2 + a3);
                } else {
                    for (int ox = lo; ox < hi; ++ox) acc += gyrow[ox] * xrow[ox * d.stride];
                }
            }
        }
        gw[widx] += acc;
    }
}

void conv2d_bwd_b(const double* gy, double* gb, const ConvDims& d) {
    STEG_PAR
    for (int co = 0; co < d.cout; ++co) {
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* gypl =
                gy + ((static_cast<std::size_t>(n) * d.cout + co) * d.hout) * d.wout;
            for (int i = 0; i < d.hout * d.wout; ++i) acc += gypl[i];
        }
        gb[co] += acc;
    }
}

void tconv2x_fwd(const double* x, const double* w, const double* bias, double* y,
                 const TconvDims& d) {
    const int hout = 2 * d.hin, wout = 2 * d.win;
    const int rows = d.n * d.cout * hout;
    STEG_PAR
    for (int r = 0; r < rows; ++r) {
        const int oy = r % hout;
        const int co = (r / hout) % d.cout;
        const int n = r / (hout * d.cout);
        const int sy = oy / 2, dy = oy % 2;
        double* yrow = y + static_cast<std::size_t>(r) * wout;
        const double bv = bias ? bias[co] : 0.0;
        for (int ox = 0; ox < wout; ++ox) {
            const int sx = ox / 2, dx = ox % 2;
            double acc = bv;
            for (int ci = 0; ci < d.cin; ++ci) {
                acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.hin + sy) * d.win + sx] *
                       w[((static_cast<std::size_t>(ci) * d.cout + co) * 2 + dy) * 2 + dx];
            }
            yrow[ox] = acc;
        }
    }
}

void tconv2x_bwd_x(const double* w, const double* gy, double* gx, const TconvDims& d) {
    const int hout = 2 * d.hin, wout = 2 * d.win;
    const int rows = d.n * d.cin * d.hin;
    STEG_PAR
    for (int r = 0; r < rows; ++r) {
        const int sy = r % d.hin;
        const int ci = (r / d.hin) % d.cin;
        const int n = r / (d.hin * d.cin);
        double* gxrow = gx + static_cast<std::size_t>(r) * d.win;
        for (int sx = 0; sx < d.win; ++sx) {
            double acc = 0.0;
            for (int co = 0; co < d.cout; ++co) {
                const double* gypl =
                    gy + ((static_cast<std::size_t>(n) * d.cout + co) * hout) * wout;
                const double* wk = w + ((static_cast<std::size_t>(ci) * d.cout + co) * 2) * 2;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        acc += gypl[static_cast<std::size_t>(2 * sy + dy) * wout + 2 * sx + dx] *
                               wk[dy * 2 + dx];
            }
            gxrow[sx] += acc;
        }
    }
}

void tconv2x_bwd_w(const double* x, const double* gy, double* gw, const TconvDims& d) {
    const int hout = 2 * d.hin, wout = 2 * d.win;
    const int wcount = d.cin * d.cout * 4;
    STEG_PAR
    for (int widx = 0; widx < wcount; ++widx) {
        const int dx = widx % 2;
        const int dy = (widx / 2) % 2;
        const int co = (widx / 4) % d.cout;
        const int ci = widx / (4 * d.cout);
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* xpl = x + ((static_cast<std::size_t>(n) * d.cin + ci) * d.hin) * d.win;
            const double* gypl = gy + ((static_cast<std::size_t>(n) * d.cout + co) * hout) * wout;
            for (int sy = 0; sy < d.hin; ++sy) {
                const double* xrow = xpl + static_cast<std::size_t>(sy) * d.win;
                const double* gyrow = gypl + static_cast<std::size_t>(2 * sy + dy) * wout + dx;
                for (int sx = 0; sx < d.win; ++sx) acc += xrow[sx] * gyrow[2 * sx];
            }
        }
        gw[widx] += acc;
    }
}

void tconv2x_bwd_b(const double* gy, double* gb, const TconvDims& d) {
    const int hout = 2 * d.hin, wout = 2 * d.win;
    STEG_PAR
    for (int co = 0; co < d.cout; ++co) {
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* gypl = gy + ((static_cast<std::size_t>(n) * d.cout + co) * hout) * wout;
            for (int i = 0; i < hout * wout; ++i) acc += gypl[i];
        }
        gb[co] += acc;
    }
}

void dense_fwd(const double* x, const double* w, const double* b, double* y, int out, int in) {
    STEG_PAR
    for (int o = 0; o < out; ++o) {
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        double acc = b ? b[o] : 0.0;
        for (int i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
}

void dense_bwd_x(const double* w, const double* gy, double* gx, int out, int in) {
    STEG_PAR
    for (int i = 0; i < in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out; ++o) acc += w[static_cast<std::size_t>(o) * in + i] * gy[o];
        gx[i] += acc;
    }
}

void dense_bwd_w(const double* x, const double* gy, double* gw, int out, int in) {
    STEG_PAR
    for (int o = 0; o < out; ++o) {
        double* gwrow = gw + static_cast<std::size_t>(o) * in;
        const double g = gy[o];
        for (int i = 0; i < in; ++i) gwrow[i] += g * x[i];
    }
}

void dense_bwd_b(const double* gy, double* gb, int out) {
    for (int o = 0; o < out; ++o) gb[o] += gy[o];
}

void bilinear_fwd(const double* feat, const double* grid, double* y, const SampleDims& d) {
    const int npix = d.hout * d.wout;
    STEG_PAR
    for (int p = 0; p < npix; ++p) {
        const double gxv = grid[p];
        const double gyv = grid[npix + p];
        // normalized [-1,1] -> pixel coordinates, border replication via clamp
        double px = (gxv + 1.0) * 0.5 * (d.win - 1);
        double py = (gyv + 1.0) * 0.5 * (d.hin - 1);
        px = px < 0.0 ? 0.0 : (px > d.win - 1 ? d.win - 1 : px);
        py = py < 0.0 ? 0.0 : (py > d.hin - 1 ? d.hin - 1 : py);
        const int ix0 = static_cast<int>(px);
        const int iy0 = static_cast<int>(py);
        const int ix1 = ix0 + 1 < d.win ? ix0 + 1 : d.win - 1;
        const int iy1 = iy0 + 1 < d.hin ? iy0 + 1 : d.hin - 1;
        const double fx = px - ix0, fy = py - iy0;
        for (int c = 0; c < d.c; ++c) {
            const double* pl = feat + (static_cast<std::size_t>(c) * d.hin) * d.win;
            const double v00 = pl[static_cast<std::size_t>(iy0) * d.win + ix0];
            const double v01 = pl[static_cast<std::size_t>(iy0) * d.win + ix1];
            const double v10 = pl[static_cast<std::size_t>(iy1) * d.win + ix0];
            const double v11 = pl[static_cast<std::size_t>(iy1) * d.win + ix1];
            y[static_cast<std::size_t>(c) * npix + p] =
                (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
        }
    }
}

void dct8x8_fwd(const double* x, double* y, int planes) {
    STEG_PAR
    for (int b = 0; b < planes; ++b) {
        const double* in = x + static_cast<std::size_t>(b) * 64;
        double* out = y + static_cast<std::size_t>(b) * 64;
        double tmp[64];
        // rows: tmp = C * X
        for (int u = 0; u < 8; ++u)
            for (int n = 0; n < 8; ++n) {
                double acc = 0.0;
                for (int m = 0; m < 8; ++m) acc += dct_mat()[u][m] * in[m * 8 + n];
                tmp[u * 8 + n] = acc;
            }
        // cols: Y = tmp * C^T
        for (int u = 0; u < 8; ++u)
            for (int v = 0; v < 8; ++v) {
                double acc = 0.0;
                for (int n = 0; n < 8; ++n) acc += tmp[u * 8 + n] * dct_mat()[v][n];
                out[u * 8 + v] = acc;
            }
    }
}

void dct8x8_inv(const double* x, double* y, int planes) {
    STEG_PAR
    for (int b = 0; b < planes; ++b) {
        const double* in = x + static_cast<std::size_t>(b) * 64;
        double* out = y + static_cast<std::size_t>(b) * 64;
        double tmp[64];
        // tmp = C^T * Y
        for (int m = 0; m < 8; ++m)
            for (int n = 0; n < 8; ++n) {
                double acc = 0.0;
                for (int u = 0; u < 8; ++u) acc += dct_mat()[u][m] * in[u * 8 + n];
                tmp[m * 8 + n] = acc;
            }
        // X = tmp * C
        for (int m = 0; m < 8; ++m)
            for (int n = 0; n < 8; ++n) {
                double acc = 0.0;
                for (int v = 0; v < 8; ++v) acc += tmp[m * 8 + v] * dct_mat()[v][n];
                out[m * 8 + n] = acc;
            }
    }
}

void box_blur_fwd(const double* x, double* y, int c, int h, int w, int k) {
    const int r = k / 2;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    const int rows = c * h;
    STEG_PAR
    for (int row = 0; row < rows; ++row) {
        const int i = row % h;
        const int ch = row / h;
        const double* pl = x + static_cast<std::size_t>(ch) * h * w;
        double* yrow = y + static_cast<std::size_t>(row) * w;
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                int iy = i + dy;
                iy = iy < 0 ? 0 : (iy >= h ? h - 1 : iy);
                const double* xrow = pl + static_cast<std::size_t>(iy) * w;
                for (int dx = -r; dx <= r; ++dx) {
                    int ix = j + dx;
                    ix = ix < 0 ? 0 : (ix >= w ? w - 1 : ix);
                    acc += xrow[ix];
                }
            }
            yrow[j] = acc * inv;
        }
    }
}
