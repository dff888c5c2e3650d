#pragma once

#include <cstddef>
#include <vector>

#include "sketchloom/errors.hpp"

namespace sketchloom::nn {

// Dense NCHW tensor. Templated on the scalar so the same layer code runs in
// float for training (and f32 checkpoints) and in double for finite-difference
// gradient checks.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, T(0)) {
        require(n_ > 0 && c_ > 0 && h_ > 0 && w_ > 0, "Tensor4: dims must be positive");
    }

    size_t size() const { return v.size(); }
    size_t plane() const { return size_t(h) * w; }

    T& at(int i, int j, int y, int x) { return v[((size_t(i) * c + j) * h + y) * w + x]; }
    const T& at(int i, int j, int y, int x) const {
        return v[((size_t(i) * c + j) * h + y) * w + x];
    }

    T* item(int i) { return v.data() + size_t(i) * c * h * w; }
    const T* item(int i) const { return v.data() + size_t(i) * c * h * w; }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Stacks two tensors along channels; both must agree on n/h/w.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: shape mismatch");
    Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
    const size_t pa = size_t(a.c) * a.plane(), pb = size_t(b.c) * b.plane();
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.item(i), a.item(i) + pa, out.item(i));
        std::copy(b.item(i), b.item(i) + pb, out.item(i) + pa);
    }
    return out;
}

// Inverse of concat_channels for gradients.
template <typename T>
void split_channels(const Tensor4<T>& both, int c_first, Tensor4<T>& da, Tensor4<T>& db) {
    require(c_first > 0 && c_first < both.c, "split_channels: bad split point");
    da = Tensor4<T>(both.n, c_first, both.h, both.w);
    db = Tensor4<T>(both.n, both.c - c_first, both.h, both.w);
    const size_t pa = size_t(c_first) * both.plane();
    const size_t pb = size_t(both.c - c_first) * both.plane();
    for (int i = 0; i < both.n; ++i) {
        std::copy(both.item(i), both.item(i) + pa, da.item(i));
        std::copy(both.item(i) + pa, both.item(i) + pa + pb, db.item(i));
    }
}

}  // namespace sketchloom::nn
