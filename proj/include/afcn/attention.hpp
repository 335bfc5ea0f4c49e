#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "afcn/error.hpp"
#include "afcn/random.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// Attention pooling over the L = F' * T' positions of an encoder output grid.
// Each position i contributes a feature column a_i in R^C:
//   e_i = u^T tanh(W a_i + b)
//   alpha_i = exp(lambda * e_i) / sum_k exp(lambda * e_k)
//   context = sum_i alpha_i a_i
// lambda = 0 degenerates to mean pooling (alpha exactly uniform), lambda = 1 is a
// standard softmax.
template <typename T>
struct AttentionParams {
    Tensor<T> w; // [attn_dim, channels]
    Tensor<T> b; // [attn_dim]
    Tensor<T> u; // [attn_dim]
    double lambda = 0.3;

    std::size_t attn_dim() const { return w.extent(0); }
    std::size_t channels() const { return w.extent(1); }
};

template <typename T>
AttentionParams<T> init_attention(std::size_t channels, std::size_t attn_dim, double lambda,
                                  Rng& rng) {
    if (channels == 0 || attn_dim == 0) throw ArgumentError("attention dims must be positive");
    AttentionParams<T> p{Tensor<T>({attn_dim, channels}), Tensor<T>({attn_dim}),
                         Tensor<T>({attn_dim}), lambda};
    double bound = std::sqrt(6.0 / static_cast<double>(channels + attn_dim));
    for (auto& v : p.w) v = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& v : p.u) v = static_cast<T>(rng.uniform(-bound, bound));
    return p;
}

template <typename T>
struct AttentionResult {
    Tensor<T> context; // [channels]
    Tensor<T> alpha;   // [positions]
    Tensor<T> scores;  // [positions], the raw e_i
    Tensor<T> tanh_act; // [positions, attn_dim], tanh(W a_i + b), kept for backward
    Tensor<T> feat_lc;  // [positions, channels], transposed features, kept for backward
    Shape feature_shape;
};

namespace detail {

// [C,...spatial] -> [L,C] with position index running over the spatial dims in
// row-major order.
template <typename T>
Tensor<T> features_by_position(const Tensor<T>& features) {
    if (features.rank() < 2) throw ShapeError("attention features must be [C, ...spatial]");
    std::size_t c = features.extent(0);
    std::size_t l = features.size() / c;
    Tensor<T> out({l, c});
    const T* src = features.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < l; ++i) out[i * c + ch] = src[ch * l + i];
    }
    return out;
}

} // namespace detail

// alpha_i = exp(lambda e_i) / sum_k exp(lambda e_k), max-subtracted.
// lambda == 0 short-circuits to the exact uniform distribution.
template <typename T>
Tensor<T> scaled_softmax(const Tensor<T>& scores, double lambda) {
    if (scores.rank() != 1 || scores.size() == 0) {
        throw ShapeError("scaled_softmax expects a non-empty rank-1 tensor");
    }
    std::size_t l = scores.size();
    Tensor<T> alpha({l});
    if (lambda == 0.0) {
        T uniform = T(1) / static_cast<T>(l);
        for (auto& v : alpha) v = uniform;
        return alpha;
    }
    T lam = static_cast<T>(lambda);
    T m = lam * scores[0];
    for (std::size_t i = 1; i < l; ++i) m = std::max(m, lam * scores[i]);
    T z = T(0);
    for (std::size_t i = 0; i < l; ++i) {
        alpha[i] = std::exp(lam * scores[i] - m);
        z += alpha[i];
    }
    for (auto& v : alpha) v /= z;
    return alpha;
}

template <typename T>
AttentionResult<T> attention_forward(const Tensor<T>& features, const AttentionParams<T>& p) {
    std::size_t c = p.channels(), d = p.attn_dim();
    if (features.extent(0) != c) {
        throw ShapeError("attention features have " + std::to_string(features.extent(0)) +
                         " channels, params expect " + std::to_string(c));
    }
    Tensor<T> flc = detail::features_by_position(features);
    std::size_t l = flc.extent(0);

    Tensor<T> h({l, d});
    Tensor<T> scores({l});
    for (std::size_t i = 0; i < l; ++i) {
        const T* a = flc.data() + i * c;
        T* hi = h.data() + i * d;
        T e = T(0);
        for (std::size_t r = 0; r < d; ++r) {
            const T* wrow = p.w.data() + r * c;
            T z = p.b[r];
            for (std::size_t ch = 0; ch < c; ++ch) z += wrow[ch] * a[ch];
            hi[r] = std::tanh(z);
            e += p.u[r] * hi[r];
        }
        scores[i] = e;
    }

    Tensor<T> alpha = scaled_softmax(scores, p.lambda);
    Tensor<T> context({c});
    for (std::size_t i = 0; i < l; ++i) {
        const T* a = flc.data() + i * c;
        T w = alpha[i];
        for (std::size_t ch = 0; ch < c; ++ch) context[ch] += w * a[ch];
    }
    return AttentionResult<T>{std::move(context), std::move(alpha), std::move(scores),
                              std::move(h),       std::move(flc),   features.shape()};
}

template <typename T>
struct AttentionGrads {
    Tensor<T> w;
    Tensor<T> b;
    Tensor<T> u;
    Tensor<T> features; // same shape as the forward input
};

// upstream is dLoss/dcontext in R^C. With d_i = g . a_i:
//   dL/de_i = lambda * alpha_i * (d_i - sum_k alpha_k d_k)
//   dL/dh_i = (dL/de_i) u,   dL/dz_i = dL/dh_i * (1 - h_i^2)
//   dL/dW  = sum_i (dL/dz_i) a_i^T,   dL/db = sum_i dL/dz_i,   dL/du = sum_i (dL/de_i) h_i
//   dL/da_i = alpha_i g + W^T (dL/dz_i)
// lambda = 0 zeroes every parameter gradient exactly; features still receive the
// uniform-pooling term alpha_i g.
template <typename T>
AttentionGrads<T> attention_backward(const AttentionParams<T>& p, const AttentionResult<T>& fwd,
                                     const Tensor<T>& upstream) {
    std::size_t c = p.channels(), d = p.attn_dim();
    std::size_t l = fwd.alpha.size();
    if (upstream.rank() != 1 || upstream.extent(0) != c) {
        throw ShapeError("attention upstream must be [channels]");
    }

    T lam = static_cast<T>(p.lambda);
    Tensor<T> dot({l});
    T mix = T(0); // sum_k alpha_k d_k
    for (std::size_t i = 0; i < l; ++i) {
        const T* a = fwd.feat_lc.data() + i * c;
        T di = T(0);
        for (std::size_t ch = 0; ch < c; ++ch) di += upstream[ch] * a[ch];
        dot[i] = di;
        mix += fwd.alpha[i] * di;
    }

    AttentionGrads<T> g{Tensor<T>(p.w.shape()), Tensor<T>(p.b.shape()), Tensor<T>(p.u.shape()),
                        Tensor<T>(fwd.feature_shape)};
    Tensor<T> gfeat_lc({l, c});
    for (std::size_t i = 0; i < l; ++i) {
        const T* a = fwd.feat_lc.data() + i * c;
        const T* hi = fwd.tanh_act.data() + i * d;
        T de = lam * fwd.alpha[i] * (dot[i] - mix);
        T* ga = gfeat_lc.data() + i * c;
        for (std::size_t ch = 0; ch < c; ++ch) ga[ch] = fwd.alpha[i] * upstream[ch];
        for (std::size_t r = 0; r < d; ++r) {
            g.u[r] += de * hi[r];
            T dz = de * p.u[r] * (T(1) - hi[r] * hi[r]);
            g.b[r] += dz;
            const T* wrow = p.w.data() + r * c;
            T* gwrow = g.w.data() + r * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                gwrow[ch] += dz * a[ch];
                ga[ch] += dz * wrow[ch];
            }
        }
    }

    // [L,C] back to [C, ...spatial]
    T* gf = g.features.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < l; ++i) gf[ch * l + i] = gfeat_lc[i * c + ch];
    }
    return g;
}

} // namespace afcn
