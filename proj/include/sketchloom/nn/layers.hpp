#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sketchloom/nn/tensor.hpp"
#include "sketchloom/rng.hpp"

namespace sketchloom::nn {

namespace detail {

// Row-major GEMM wrappers over Eigen's packed kernels. Eigen's OpenMP path
// only ever splits rows of the output (no cross-thread accumulation), so
// results are identical at any thread count.

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C (M x N) = A (M x K) * B (K x N); accumulate adds into C.
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    Eigen::Map<const RowMat<T>> a(A, M, K), b(B, K, N);
    Eigen::Map<RowMat<T>> c(C, M, N);
    if (accumulate)
        c.noalias() += a * b;
    else
        c.noalias() = a * b;
}

// C (K x N) = A^T * B with A (M x K), B (M x N).
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    Eigen::Map<const RowMat<T>> a(A, M, K), b(B, M, N);
    Eigen::Map<RowMat<T>> c(C, K, N);
    if (accumulate)
        c.noalias() += a.transpose() * b;
    else
        c.noalias() = a.transpose() * b;
}

// C (M x K) = A * B^T with A (M x N), B (K x N). Dot products over N.
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    Eigen::Map<const RowMat<T>> a(A, M, N), b(B, K, N);
    Eigen::Map<RowMat<T>> c(C, M, K);
    if (accumulate)
        c.noalias() += a * b.transpose();
    else
        c.noalias() = a * b.transpose();
}

inline int conv_out_side(int side, int k, int s, int p) {
    return (side + 2 * p - k) / s + 1;
}

// Unrolls (C,H,W) into a (C*k*k) x (OH*OW) matrix for stride-s k x k patches.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int s, int p, int OH, int OW, T* cols) {
    const size_t span = size_t(OH) * OW;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + ((size_t(c) * k + ky) * k + kx) * span;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * s - p + ky;
                    T* out = row + size_t(oy) * OW;
                    if (iy < 0 || iy >= H) {
                        std::fill(out, out + OW, T(0));
                        continue;
                    }
                    const T* xr = x + (size_t(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * s - p + kx;
                        out[ox] = (ix >= 0 && ix < W) ? xr[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, int C, int H, int W, int k, int s, int p, int OH, int OW, T* x) {
    const size_t span = size_t(OH) * OW;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + ((size_t(c) * k + ky) * k + kx) * span;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* xr = x + (size_t(c) * H + iy) * W;
                    const T* in = row + size_t(oy) * OW;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < W) xr[ix] += in[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Persistent power-iteration state for spectral normalization. u/v keep their
// last direction across steps; sigma is the estimate from the last call.
template <typename T>
struct SpectralState {
    std::vector<T> u, v;
    int power_iterations = 1;
    T eps = T(1e-12);
    T sigma = T(1);
};

// Normalizes W (rows x cols, row-major) by its estimated largest singular
// value: w_bar = W / max(sigma, eps). With update set, runs the power
// iterations first (v <- W^T u, u <- W v, both renormalized); otherwise the
// stored directions are reused, which keeps the map exactly differentiable.
template <typename T>
void spectral_normalize(const T* W, int rows, int cols, SpectralState<T>& st, bool update,
                        T* w_bar) {
    require(rows > 0 && cols > 0, "spectral_normalize: empty matrix");
    require(int(st.u.size()) == rows && int(st.v.size()) == cols,
            "spectral_normalize: state size mismatch");
    auto normalize = [&](std::vector<T>& vec) {
        T nrm = T(0);
        for (T x : vec) nrm += x * x;
        nrm = std::sqrt(nrm);
        const T d = std::max(nrm, st.eps);
        for (T& x : vec) x /= d;
    };
    if (update) {
        for (int it = 0; it < st.power_iterations; ++it) {
            detail::gemm_tn(rows, 1, cols, W, st.u.data(), st.v.data(), false);
            normalize(st.v);
            detail::gemm_nn(rows, 1, cols, W, st.v.data(), st.u.data(), false);
            normalize(st.u);
        }
    }
    std::vector<T> wv(rows);
    detail::gemm_nn(rows, 1, cols, W, st.v.data(), wv.data(), false);
    T sigma = T(0);
    for (int i = 0; i < rows; ++i) sigma += st.u[i] * wv[i];
    st.sigma = sigma;
    const T d = std::max(sigma, st.eps);
    const size_t total = size_t(rows) * cols;
    for (size_t i = 0; i < total; ++i) w_bar[i] = W[i] / d;
}

// Strided convolution, weight stored as (out_ch) x (in_ch*k*k). Forward saves
// its input; backward accumulates parameter gradients and returns dx unless
// told the input gradient is not needed.
template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;
    std::vector<T> w, b, gw, gb;
    bool use_sn = false;
    SpectralState<T> sn;
    std::vector<T> w_eff;

    Tensor4<T> x_saved;
    int oh = 0, ow = 0;
    std::vector<T> cols;

    void init(int in, int out, int kk, int ss, int pp, RngStream& rng) {
        in_ch = in;
        out_ch = out;
        k = kk;
        stride = ss;
        pad = pp;
        w.resize(size_t(out) * in * k * k);
        for (T& x : w) x = T(rng.normal() * 0.02);
        b.assign(out, T(0));
        gw.assign(w.size(), T(0));
        gb.assign(out, T(0));
    }

    void enable_spectral_norm(RngStream& rng) {
        use_sn = true;
        sn.u.resize(out_ch);
        sn.v.assign(size_t(in_ch) * k * k, T(0));
        T nrm = T(0);
        for (T& x : sn.u) {
            x = T(rng.normal());
            nrm += x * x;
        }
        nrm = std::sqrt(nrm);
        for (T& x : sn.u) x /= std::max(nrm, sn.eps);
        w_eff.resize(w.size());
    }

    const T* effective_weight(bool update_sn) {
        if (!use_sn) return w.data();
        spectral_normalize(w.data(), out_ch, in_ch * k * k, sn, update_sn, w_eff.data());
        return w_eff.data();
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool update_sn) {
        require(x.c == in_ch, "Conv2d: channel mismatch");
        oh = detail::conv_out_side(x.h, k, stride, pad);
        ow = detail::conv_out_side(x.w, k, stride, pad);
        require(oh > 0 && ow > 0, "Conv2d: input too small for kernel");
        const T* we = effective_weight(update_sn);
        x_saved = x;
        const int ckk = in_ch * k * k;
        const size_t span = size_t(oh) * ow;
        cols.resize(size_t(ckk) * span);
        Tensor4<T> y(x.n, out_ch, oh, ow);
        for (int i = 0; i < x.n; ++i) {
            detail::im2col(x.item(i), in_ch, x.h, x.w, k, stride, pad, oh, ow, cols.data());
            detail::gemm_nn(out_ch, int(span), ckk, we, cols.data(), y.item(i), false);
            for (int o = 0; o < out_ch; ++o) {
                T* yo = y.item(i) + size_t(o) * span;
                for (size_t j = 0; j < span; ++j) yo[j] += b[o];
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, bool need_dx = true) {
        const int ckk = in_ch * k * k;
        const size_t span = size_t(oh) * ow;
        const T* we = use_sn ? w_eff.data() : w.data();
        std::vector<T> geff(w.size(), T(0));
        std::vector<T> dcols(size_t(ckk) * span);
        Tensor4<T> dx;
        if (need_dx) dx = Tensor4<T>(x_saved.n, in_ch, x_saved.h, x_saved.w);
        for (int i = 0; i < x_saved.n; ++i) {
            detail::im2col(x_saved.item(i), in_ch, x_saved.h, x_saved.w, k, stride, pad, oh,
                           ow, cols.data());
            detail::gemm_nt(out_ch, int(span), ckk, dy.item(i), cols.data(), geff.data(), true);
            for (int o = 0; o < out_ch; ++o) {
                const T* dyo = dy.item(i) + size_t(o) * span;
                T s = T(0);
                for (size_t j = 0; j < span; ++j) s += dyo[j];
                gb[o] += s;
            }
            if (need_dx) {
                detail::gemm_tn(out_ch, int(span), ckk, we, dy.item(i), dcols.data(), false);
                detail::col2im(dcols.data(), in_ch, x_saved.h, x_saved.w, k, stride, pad, oh,
                               ow, dx.item(i));
            }
        }
        apply_weight_grad(geff);
        return dx;
    }

    // With spectral norm the chain rule passes through w_bar = w/sigma with
    // u, v treated as constants: dL/dw = (G - <G, w_bar> u v^T) / sigma.
    void apply_weight_grad(const std::vector<T>& geff) {
        if (!use_sn) {
            for (size_t i = 0; i < w.size(); ++i) gw[i] += geff[i];
            return;
        }
        const int cols_n = in_ch * k * k;
        T inner = T(0);
        for (size_t i = 0; i < w.size(); ++i) inner += geff[i] * w_eff[i];
        const T d = std::max(sn.sigma, sn.eps);
        for (int r = 0; r < out_ch; ++r)
            for (int c = 0; c < cols_n; ++c) {
                const size_t i = size_t(r) * cols_n + c;
                gw[i] += (geff[i] - inner * sn.u[r] * sn.v[c]) / d;
            }
    }

    void zero_grad() {
        std::fill(gw.begin(), gw.end(), T(0));
        std::fill(gb.begin(), gb.end(), T(0));
    }
};

// Fractionally-strided convolution. Weight stored as (in_ch) x (out_ch*k*k);
// forward scatters with col2im, so output side = (in-1)*stride - 2*pad + k.
template <typename T>
struct TransposedConv2d {
    int in_ch = 0, out_ch = 0, k = 4, stride = 2, pad = 1;
    std::vector<T> w, b, gw, gb;
    bool use_sn = false;
    SpectralState<T> sn;
    std::vector<T> w_eff;

    Tensor4<T> x_saved;
    int oh = 0, ow = 0;
    std::vector<T> cols;

    void init(int in, int out, int kk, int ss, int pp, RngStream& rng) {
        in_ch = in;
        out_ch = out;
        k = kk;
        stride = ss;
        pad = pp;
        w.resize(size_t(in) * out * k * k);
        for (T& x : w) x = T(rng.normal() * 0.02);
        b.assign(out, T(0));
        gw.assign(w.size(), T(0));
        gb.assign(out, T(0));
    }

    void enable_spectral_norm(RngStream& rng) {
        use_sn = true;
        sn.u.resize(in_ch);
        sn.v.assign(size_t(out_ch) * k * k, T(0));
        T nrm = T(0);
        for (T& x : sn.u) {
            x = T(rng.normal());
            nrm += x * x;
        }
        nrm = std::sqrt(nrm);
        for (T& x : sn.u) x /= std::max(nrm, sn.eps);
        w_eff.resize(w.size());
    }

    const T* effective_weight(bool update_sn) {
        if (!use_sn) return w.data();
        spectral_normalize(w.data(), in_ch, out_ch * k * k, sn, update_sn, w_eff.data());
        return w_eff.data();
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool update_sn) {
        require(x.c == in_ch, "TransposedConv2d: channel mismatch");
        oh = (x.h - 1) * stride - 2 * pad + k;
        ow = (x.w - 1) * stride - 2 * pad + k;
        require(oh > 0 && ow > 0, "TransposedConv2d: degenerate output");
        const T* we = effective_weight(update_sn);
        x_saved = x;
        const int ckk = out_ch * k * k;
        const size_t span = size_t(x.h) * x.w;
        cols.resize(size_t(ckk) * span);
        Tensor4<T> y(x.n, out_ch, oh, ow);
        for (int i = 0; i < x.n; ++i) {
            detail::gemm_tn(in_ch, int(span), ckk, we, x.item(i), cols.data(), false);
            detail::col2im(cols.data(), out_ch, oh, ow, k, stride, pad, x.h, x.w, y.item(i));
            for (int o = 0; o < out_ch; ++o) {
                T* yo = y.item(i) + size_t(o) * oh * ow;
                for (size_t j = 0; j < size_t(oh) * ow; ++j) yo[j] += b[o];
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, bool need_dx = true) {
        const int ckk = out_ch * k * k;
        const size_t span = size_t(x_saved.h) * x_saved.w;
        const T* we = use_sn ? w_eff.data() : w.data();
        std::vector<T> geff(w.size(), T(0));
        Tensor4<T> dx;
        if (need_dx) dx = Tensor4<T>(x_saved.n, in_ch, x_saved.h, x_saved.w);
        for (int i = 0; i < x_saved.n; ++i) {
            detail::im2col(dy.item(i), out_ch, oh, ow, k, stride, pad, x_saved.h, x_saved.w,
                           cols.data());
            detail::gemm_nt(in_ch, int(span), ckk, x_saved.item(i), cols.data(), geff.data(),
                            true);
            for (int o = 0; o < out_ch; ++o) {
                const T* dyo = dy.item(i) + size_t(o) * oh * ow;
                T s = T(0);
                for (size_t j = 0; j < size_t(oh) * ow; ++j) s += dyo[j];
                gb[o] += s;
            }
            if (need_dx)
                detail::gemm_nn(in_ch, int(span), ckk, we, cols.data(), dx.item(i), false);
        }
        apply_weight_grad(geff);
        return dx;
    }

    void apply_weight_grad(const std::vector<T>& geff) {
        if (!use_sn) {
            for (size_t i = 0; i < w.size(); ++i) gw[i] += geff[i];
            return;
        }
        const int cols_n = out_ch * k * k;
        T inner = T(0);
        for (size_t i = 0; i < w.size(); ++i) inner += geff[i] * w_eff[i];
        const T d = std::max(sn.sigma, sn.eps);
        for (int r = 0; r < in_ch; ++r)
            for (int c = 0; c < cols_n; ++c) {
                const size_t i = size_t(r) * cols_n + c;
                gw[i] += (geff[i] - inner * sn.u[r] * sn.v[c]) / d;
            }
    }

    void zero_grad() {
        std::fill(gw.begin(), gw.end(), T(0));
        std::fill(gb.begin(), gb.end(), T(0));
    }
};

// Per-sample, per-channel normalization with learned scale and shift. The
// batch-size-1 regime makes batch statistics meaningless, so normalization
// is always over the spatial plane alone.
template <typename T>
struct InstanceNorm {
    int ch = 0;
    T eps = T(1e-5);
    std::vector<T> gamma, beta, ggamma, gbeta;
    Tensor4<T> xhat;
    std::vector<T> inv_std;

    void init(int channels) {
        ch = channels;
        gamma.assign(ch, T(1));
        beta.assign(ch, T(0));
        ggamma.assign(ch, T(0));
        gbeta.assign(ch, T(0));
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        require(x.c == ch, "InstanceNorm: channel mismatch");
        const size_t hw = x.plane();
        xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
        inv_std.assign(size_t(x.n) * ch, T(0));
        Tensor4<T> y(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i) {
            for (int c = 0; c < ch; ++c) {
                const T* xc = x.item(i) + size_t(c) * hw;
                T mean = T(0);
                for (size_t j = 0; j < hw; ++j) mean += xc[j];
                mean /= T(hw);
                T var = T(0);
                for (size_t j = 0; j < hw; ++j) var += (xc[j] - mean) * (xc[j] - mean);
                var /= T(hw);
                const T inv = T(1) / std::sqrt(var + eps);
                inv_std[size_t(i) * ch + c] = inv;
                T* xh = xhat.item(i) + size_t(c) * hw;
                T* yc = y.item(i) + size_t(c) * hw;
                for (size_t j = 0; j < hw; ++j) {
                    xh[j] = (xc[j] - mean) * inv;
                    yc[j] = gamma[c] * xh[j] + beta[c];
                }
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        const size_t hw = dy.plane();
        Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
        for (int i = 0; i < dy.n; ++i) {
            for (int c = 0; c < ch; ++c) {
                const T* dyc = dy.item(i) + size_t(c) * hw;
                const T* xh = xhat.item(i) + size_t(c) * hw;
                T s1 = T(0), s2 = T(0);
                for (size_t j = 0; j < hw; ++j) {
                    s1 += dyc[j];
                    s2 += dyc[j] * xh[j];
                }
                ggamma[c] += s2;
                gbeta[c] += s1;
                const T inv = inv_std[size_t(i) * ch + c];
                const T scale = gamma[c] * inv / T(hw);
                T* dxc = dx.item(i) + size_t(c) * hw;
                for (size_t j = 0; j < hw; ++j)
                    dxc[j] = scale * (T(hw) * dyc[j] - s1 - xh[j] * s2);
            }
        }
        return dx;
    }

    void zero_grad() {
        std::fill(ggamma.begin(), ggamma.end(), T(0));
        std::fill(gbeta.begin(), gbeta.end(), T(0));
    }
};

template <typename T>
struct LeakyReLU {
    T slope = T(0.2);
    Tensor4<T> x_saved;

    Tensor4<T> forward(const Tensor4<T>& x) {
        x_saved = x;
        Tensor4<T> y = x;
        for (T& v : y.v)
            if (v < T(0)) v *= slope;
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& dy) {
        Tensor4<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i)
            if (x_saved.v[i] < T(0)) dx.v[i] *= slope;
        return dx;
    }
};

template <typename T>
struct ReLU {
    Tensor4<T> x_saved;

    Tensor4<T> forward(const Tensor4<T>& x) {
        x_saved = x;
        Tensor4<T> y = x;
        for (T& v : y.v)
            if (v < T(0)) v = T(0);
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& dy) {
        Tensor4<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i)
            if (x_saved.v[i] < T(0)) dx.v[i] = T(0);
        return dx;
    }
};

template <typename T>
struct Tanh {
    Tensor4<T> y_saved;

    Tensor4<T> forward(const Tensor4<T>& x) {
        Tensor4<T> y = x;
        for (T& v : y.v) v = std::tanh(v);
        y_saved = y;
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& dy) {
        Tensor4<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i)
            dx.v[i] *= (T(1) - y_saved.v[i] * y_saved.v[i]);
        return dx;
    }
};

// Inverted dropout: kept activations are scaled by 1/(1-p) so eval mode is a
// plain identity. The mask comes from the stream passed to forward.
template <typename T>
struct Dropout {
    T p = T(0.5);
    std::vector<T> mask;

    Tensor4<T> forward(const Tensor4<T>& x, bool train, RngStream& rng) {
        if (!train || p <= T(0)) {
            mask.clear();
            return x;
        }
        const T keep_scale = T(1) / (T(1) - p);
        mask.resize(x.size());
        Tensor4<T> y = x;
        for (size_t i = 0; i < x.size(); ++i) {
            mask[i] = (rng.next_double() < double(p)) ? T(0) : keep_scale;
            y.v[i] *= mask[i];
        }
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& dy) {
        if (mask.empty()) return dy;
        Tensor4<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask[i];
        return dx;
    }
};

}  // namespace sketchloom::nn
