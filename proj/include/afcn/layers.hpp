#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "afcn/error.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// Cross-correlation convention (no kernel flip), the usual deep-learning one;
// matters for checkpoint interoperability.
template <typename T>
struct ConvParams {
    Tensor<T> kernels; // [out_channels, in_channels, kh, kw]
    Tensor<T> bias;    // [out_channels]
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    std::size_t out_channels() const { return kernels.extent(0); }
    std::size_t in_channels() const { return kernels.extent(1); }
    std::size_t kh() const { return kernels.extent(2); }
    std::size_t kw() const { return kernels.extent(3); }
};

template <typename T>
ConvParams<T> make_conv_params(Tensor<T> kernels, Tensor<T> bias, std::size_t stride,
                               std::size_t pad) {
    return ConvParams<T>{std::move(kernels), std::move(bias), stride, stride, pad, pad};
}

// Across-channel local response normalization:
//   b_c = a_c / (k + (alpha/n) * sum_{c' in window(c)} a_{c'}^2)^beta
// window of n channels centered at c, clipped at the tensor edges.
struct LrnParams {
    std::size_t size = 5; // n, window size in channels
    double k = 2.0;
    double alpha = 1e-4;
    double beta = 0.75;
};

template <typename T>
struct LinearParams {
    Tensor<T> weight; // [out_dim, in_dim]
    Tensor<T> bias;   // [out_dim]

    std::size_t out_dim() const { return weight.extent(0); }
    std::size_t in_dim() const { return weight.extent(1); }
};

namespace detail {

inline std::size_t conv_extent(std::size_t in, std::size_t pad, std::size_t kernel,
                               std::size_t stride, const std::string& what) {
    if (in + 2 * pad < kernel) {
        throw ShapeError(what + ": kernel " + std::to_string(kernel) +
                         " larger than padded input " + std::to_string(in + 2 * pad));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

// [C,H,W] -> [C,H+2ph,W+2pw], zero borders. A padded copy keeps the conv
// inner loops branch-free.
template <typename T>
Tensor<T> pad_chw(const Tensor<T>& in, std::size_t ph, std::size_t pw) {
    if (ph == 0 && pw == 0) return in;
    std::size_t c = in.extent(0), h = in.extent(1), w = in.extent(2);
    Tensor<T> out({c, h + 2 * ph, w + 2 * pw});
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t y = 0; y < h; ++y) {
            const T* src = in.data() + (ic * h + y) * w;
            T* dst = out.data() + (ic * (h + 2 * ph) + y + ph) * (w + 2 * pw) + pw;
            std::copy(src, src + w, dst);
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_chw(const Tensor<T>& in, std::size_t ph, std::size_t pw) {
    if (ph == 0 && pw == 0) return in;
    std::size_t c = in.extent(0), hp = in.extent(1), wp = in.extent(2);
    std::size_t h = hp - 2 * ph, w = wp - 2 * pw;
    Tensor<T> out({c, h, w});
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t y = 0; y < h; ++y) {
            const T* src = in.data() + (ic * hp + y + ph) * wp + pw;
            T* dst = out.data() + (ic * h + y) * w;
            std::copy(src, src + w, dst);
        }
    }
    return out;
}

} // namespace detail

// ---- conv2d -------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& p) {
    if (input.rank() != 3) throw ShapeError("conv2d input must be [C,H,W]");
    std::size_t ci = input.extent(0), h = input.extent(1), w = input.extent(2);
    if (ci != p.in_channels()) {
        throw ShapeError("conv2d input channels " + std::to_string(ci) + " != kernel in_channels " +
                         std::to_string(p.in_channels()));
    }
    std::size_t ho = detail::conv_extent(h, p.pad_h, p.kh(), p.stride_h, "conv2d H");
    std::size_t wo = detail::conv_extent(w, p.pad_w, p.kw(), p.stride_w, "conv2d W");
    std::size_t co = p.out_channels(), kh = p.kh(), kw = p.kw();

    Tensor<T> padded = detail::pad_chw(input, p.pad_h, p.pad_w);
    std::size_t hp = h + 2 * p.pad_h, wp = w + 2 * p.pad_w;

    Tensor<T> out({co, ho, wo});
    for (std::size_t oc = 0; oc < co; ++oc) {
        T b = p.bias[oc];
        T* outc = out.data() + oc * ho * wo;
        std::fill(outc, outc + ho * wo, b);
    }
    const T* pin = padded.data();
    const T* ker = p.kernels.data();
    for (std::size_t oc = 0; oc < co; ++oc) {
        T* outc = out.data() + oc * ho * wo;
        for (std::size_t ic = 0; ic < ci; ++ic) {
            const T* inc = pin + ic * hp * wp;
            const T* kerc = ker + (oc * ci + ic) * kh * kw;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    T wgt = kerc[ky * kw + kx];
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const T* inrow = inc + (oy * p.stride_h + ky) * wp + kx;
                        T* outrow = outc + oy * wo;
                        if (p.stride_w == 1) {
                            for (std::size_t ox = 0; ox < wo; ++ox) outrow[ox] += wgt * inrow[ox];
                        } else {
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                outrow[ox] += wgt * inrow[ox * p.stride_w];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
struct ConvGrads {
    Tensor<T> kernels;
    Tensor<T> bias;
    Tensor<T> input;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p,
                             const Tensor<T>& upstream) {
    std::size_t ci = input.extent(0), h = input.extent(1), w = input.extent(2);
    std::size_t ho = detail::conv_extent(h, p.pad_h, p.kh(), p.stride_h, "conv2d H");
    std::size_t wo = detail::conv_extent(w, p.pad_w, p.kw(), p.stride_w, "conv2d W");
    std::size_t co = p.out_channels(), kh = p.kh(), kw = p.kw();
    if (upstream.shape() != Shape{co, ho, wo}) {
        throw ShapeError("conv2d_backward upstream shape " + shape_str(upstream.shape()) +
                         " != " + shape_str({co, ho, wo}));
    }

    Tensor<T> padded = detail::pad_chw(input, p.pad_h, p.pad_w);
    std::size_t hp = h + 2 * p.pad_h, wp = w + 2 * p.pad_w;

    ConvGrads<T> g{Tensor<T>(p.kernels.shape()), Tensor<T>(p.bias.shape()),
                   Tensor<T>({ci, h, w})};
    Tensor<T> gpad({ci, hp, wp});

    const T* ker = p.kernels.data();
    for (std::size_t oc = 0; oc < co; ++oc) {
        const T* upc = upstream.data() + oc * ho * wo;
        T acc = T(0);
        for (std::size_t i = 0; i < ho * wo; ++i) acc += upc[i];
        g.bias[oc] = acc;

        for (std::size_t ic = 0; ic < ci; ++ic) {
            const T* inc = padded.data() + ic * hp * wp;
            T* ginc = gpad.data() + ic * hp * wp;
            const T* kerc = ker + (oc * ci + ic) * kh * kw;
            T* gkerc = g.kernels.data() + (oc * ci + ic) * kh * kw;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    T wgt = kerc[ky * kw + kx];
                    T wacc = T(0);
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const T* uprow = upc + oy * wo;
                        const T* inrow = inc + (oy * p.stride_h + ky) * wp + kx;
                        T* grow = ginc + (oy * p.stride_h + ky) * wp + kx;
                        if (p.stride_w == 1) {
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                wacc += uprow[ox] * inrow[ox];
                                grow[ox] += uprow[ox] * wgt;
                            }
                        } else {
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                wacc += uprow[ox] * inrow[ox * p.stride_w];
                                grow[ox * p.stride_w] += uprow[ox] * wgt;
                            }
                        }
                    }
                    gkerc[ky * kw + kx] += wacc;
                }
            }
        }
    }
    g.input = detail::crop_chw(gpad, p.pad_h, p.pad_w);
    return g;
}

// ---- maxpool ------------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
    Tensor<T> output;
    Tensor<std::size_t> argmax; // flat input offset of the winner per output cell
    Shape input_shape;
};

template <typename T>
MaxPoolResult<T> maxpool(const Tensor<T>& input, std::size_t kh, std::size_t kw, std::size_t sh,
                         std::size_t sw) {
    if (input.rank() != 3) throw ShapeError("maxpool input must be [C,H,W]");
    std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    std::size_t ho = detail::conv_extent(h, 0, kh, sh, "maxpool H");
    std::size_t wo = detail::conv_extent(w, 0, kw, sw, "maxpool W");
    MaxPoolResult<T> r{Tensor<T>({c, ho, wo}), Tensor<std::size_t>({c, ho, wo}), input.shape()};
    for (std::size_t ic = 0; ic < c; ++ic) {
        const T* inc = input.data() + ic * h * w;
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                std::size_t base_y = oy * sh, base_x = ox * sw;
                std::size_t best = base_y * w + base_x;
                T best_v = inc[best];
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        std::size_t off = (base_y + ky) * w + (base_x + kx);
                        if (inc[off] > best_v) { // ties keep the lowest index
                            best_v = inc[off];
                            best = off;
                        }
                    }
                }
                r.output.at(ic, oy, ox) = best_v;
                r.argmax.at(ic, oy, ox) = ic * h * w + best;
            }
        }
    }
    return r;
}

template <typename T>
MaxPoolResult<T> maxpool(const Tensor<T>& input, std::size_t kernel, std::size_t stride) {
    return maxpool(input, kernel, kernel, stride, stride);
}

// Routes each upstream value to the recorded argmax position.
template <typename T>
Tensor<T> maxpool_backward(const MaxPoolResult<T>& fwd, const Tensor<T>& upstream) {
    if (upstream.shape() != fwd.output.shape()) {
        throw ShapeError("maxpool_backward upstream shape mismatch");
    }
    Tensor<T> grad(fwd.input_shape);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        grad[fwd.argmax[i]] += upstream[i];
    }
    return grad;
}

// ---- relu ---------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    return elementwise(input, [](T v) { return v > T(0) ? v : T(0); });
}

// Gradient is 0 where input <= 0 (including exactly 0).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
    if (!input.same_shape(upstream)) throw ShapeError("relu_backward shape mismatch");
    Tensor<T> grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad[i] = input[i] > T(0) ? upstream[i] : T(0);
    }
    return grad;
}

// ---- local response normalization ----------------------------------------------

template <typename T>
Tensor<T> lrn(const Tensor<T>& input, const LrnParams& p) {
    if (input.rank() != 3) throw ShapeError("lrn input must be [C,H,W]");
    std::size_t c = input.extent(0), hw = input.extent(1) * input.extent(2);
    std::size_t half = p.size / 2;
    Tensor<T> out(input.shape());
    const T* a = input.data();
    T* b = out.data();
    for (std::size_t i = 0; i < hw; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            std::size_t lo = ch >= half ? ch - half : 0;
            std::size_t hi = std::min(c - 1, ch + half);
            double s = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                double v = static_cast<double>(a[j * hw + i]);
                s += v * v;
            }
            double scale = p.k + (p.alpha / static_cast<double>(p.size)) * s;
            b[ch * hw + i] =
                static_cast<T>(static_cast<double>(a[ch * hw + i]) * std::pow(scale, -p.beta));
        }
    }
    return out;
}

// d b_c / d a_j = delta_{cj} s_c^{-beta}
//               - 2 (alpha beta / n) a_c a_j s_c^{-beta-1} [j in window(c)]
template <typename T>
Tensor<T> lrn_backward(const Tensor<T>& input, const LrnParams& p, const Tensor<T>& upstream) {
    if (!input.same_shape(upstream)) throw ShapeError("lrn_backward shape mismatch");
    std::size_t c = input.extent(0), hw = input.extent(1) * input.extent(2);
    std::size_t half = p.size / 2;
    Tensor<T> grad(input.shape());
    const T* a = input.data();
    const T* up = upstream.data();
    T* g = grad.data();
    std::vector<double> t(c); // up_c * a_c * s_c^{-beta-1}
    std::vector<double> direct(c);
    for (std::size_t i = 0; i < hw; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            std::size_t lo = ch >= half ? ch - half : 0;
            std::size_t hi = std::min(c - 1, ch + half);
            double s = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                double v = static_cast<double>(a[j * hw + i]);
                s += v * v;
            }
            double scale = p.k + (p.alpha / static_cast<double>(p.size)) * s;
            double u = static_cast<double>(up[ch * hw + i]);
            direct[ch] = u * std::pow(scale, -p.beta);
            t[ch] = u * static_cast<double>(a[ch * hw + i]) * std::pow(scale, -p.beta - 1.0);
        }
        double factor = 2.0 * p.alpha * p.beta / static_cast<double>(p.size);
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t lo = j >= half ? j - half : 0;
            std::size_t hi = std::min(c - 1, j + half);
            double tsum = 0.0;
            for (std::size_t ch = lo; ch <= hi; ++ch) tsum += t[ch];
            g[j * hw + i] =
                static_cast<T>(direct[j] - factor * static_cast<double>(a[j * hw + i]) * tsum);
        }
    }
    return grad;
}

// ---- linear -------------------------------------------------------------------

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const LinearParams<T>& p) {
    if (input.rank() != 1 || input.extent(0) != p.in_dim()) {
        throw ShapeError("linear input shape " + shape_str(input.shape()) + " != [" +
                         std::to_string(p.in_dim()) + "]");
    }
    Tensor<T> out({p.out_dim()});
    for (std::size_t o = 0; o < p.out_dim(); ++o) {
        const T* row = p.weight.data() + o * p.in_dim();
        T acc = p.bias[o];
        for (std::size_t i = 0; i < p.in_dim(); ++i) acc += row[i] * input[i];
        out[o] = acc;
    }
    return out;
}

template <typename T>
struct LinearGrads {
    Tensor<T> weight;
    Tensor<T> bias;
    Tensor<T> input;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& input, const LinearParams<T>& p,
                               const Tensor<T>& upstream) {
    if (upstream.rank() != 1 || upstream.extent(0) != p.out_dim()) {
        throw ShapeError("linear_backward upstream shape mismatch");
    }
    LinearGrads<T> g{Tensor<T>(p.weight.shape()), Tensor<T>(p.bias.shape()),
                     Tensor<T>(input.shape())};
    for (std::size_t o = 0; o < p.out_dim(); ++o) {
        T u = upstream[o];
        g.bias[o] = u;
        const T* row = p.weight.data() + o * p.in_dim();
        T* grow = g.weight.data() + o * p.in_dim();
        for (std::size_t i = 0; i < p.in_dim(); ++i) {
            grow[i] = u * input[i]; // outer(upstream, input)
            g.input[i] += u * row[i];
        }
    }
    return g;
}

// ---- softmax cross-entropy -------------------------------------------------------

template <typename T>
struct SoftmaxCeResult {
    T loss;
    Tensor<T> probs;      // softmax(logits)
    Tensor<T> logit_grad; // probs - onehot(label)
};

template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label) {
    if (logits.rank() != 1) throw ShapeError("softmax_cross_entropy expects rank-1 logits");
    std::size_t k = logits.extent(0);
    if (label >= k) {
        throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(k) + " classes");
    }
    T m = logits[0];
    for (std::size_t i = 1; i < k; ++i) m = std::max(m, logits[i]);
    Tensor<T> probs({k});
    T z = T(0);
    for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(logits[i] - m);
        z += probs[i];
    }
    for (std::size_t i = 0; i < k; ++i) probs[i] /= z;
    T loss = std::log(z) - (logits[label] - m);
    Tensor<T> grad = probs;
    grad[label] -= T(1);
    return SoftmaxCeResult<T>{loss, std::move(probs), std::move(grad)};
}

// ---- SGD with momentum -----------------------------------------------------------

// v <- momentum*v - lr*(g + weight_decay*p); p <- p + v
template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity, double lr,
              double momentum, double weight_decay) {
    if (!param.same_shape(grad) || !param.same_shape(velocity)) {
        throw ShapeError("sgd_step shape mismatch: param " + shape_str(param.shape()) + ", grad " +
                         shape_str(grad.shape()) + ", velocity " + shape_str(velocity.shape()));
    }
    T m = static_cast<T>(momentum), e = static_cast<T>(lr), wd = static_cast<T>(weight_decay);
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = m * velocity[i] - e * (grad[i] + wd * param[i]);
        param[i] += velocity[i];
    }
}

} // namespace afcn
