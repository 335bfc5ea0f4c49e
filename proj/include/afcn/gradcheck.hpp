#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "afcn/attention.hpp"
#include "afcn/layers.hpp"
#include "afcn/model.hpp"
#include "afcn/random.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

struct GradCheckOptions {
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    std::size_t max_coords = 150; // sampled per tensor; all coords when fewer
    std::uint64_t seed = 7;
};

struct GradCheckReport {
    std::string name;
    std::size_t coords = 0;
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    bool ok = false;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

// Central-difference check of `analytic` against `loss`, which must recompute
// the scalar loss from the current contents of `param`. The tensor is restored
// after each probe. rel = |a - n| / max(|a| + |n|, 1e-8).
template <typename LossFn>
GradCheckReport grad_check(const std::string& name, Tensor<double>& param,
                           const Tensor<double>& analytic, LossFn&& loss,
                           const GradCheckOptions& opt = {}) {
    if (!param.same_shape(analytic)) throw ShapeError("grad_check: analytic shape mismatch");
    std::vector<std::size_t> coords(param.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.max_coords) {
        Rng rng(mix_seed(opt.seed, detail::fnv1a(name)));
        rng.shuffle(coords);
        coords.resize(opt.max_coords);
    }

    GradCheckReport rep;
    rep.name = name;
    rep.coords = coords.size();
    for (std::size_t idx : coords) {
        double saved = param[idx];
        param[idx] = saved + opt.epsilon;
        double up = loss();
        param[idx] = saved - opt.epsilon;
        double down = loss();
        param[idx] = saved;
        double numeric = (up - down) / (2.0 * opt.epsilon);
        double a = analytic[idx];
        double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_coord = idx;
            rep.analytic_at_worst = a;
            rep.numeric_at_worst = numeric;
        }
    }
    rep.ok = rep.max_rel_err < opt.tolerance;
    return rep;
}

// ---- the full suite ------------------------------------------------------------------

struct GradSuiteOptions {
    GradCheckOptions check;
    std::string corrupt; // report name whose analytic gradient gets perturbed (test hook)
    std::string only;    // when set, run only checks whose name starts with this prefix
};

namespace detail {

inline Tensor<double> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    for (auto& v : t) v = rng.uniform(lo, hi);
    return t;
}

// Values pairwise separated by >= ~1e-2 so max-pool winners and ReLU signs
// cannot flip under the probe epsilon.
inline Tensor<double> kink_safe_tensor(const Shape& s, Rng& rng) {
    std::size_t n = shape_size(s);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    Tensor<double> t(s);
    for (std::size_t i = 0; i < n; ++i) {
        double mag = 0.05 + 0.01 * static_cast<double>(order[i]);
        t[i] = rng.next_unit() < 0.5 ? -mag : mag;
    }
    return t;
}

inline double dot_all(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct SuiteSink {
    std::vector<GradCheckReport>& out;
    const GradSuiteOptions& opts;

    template <typename LossFn>
    void run(const std::string& name, Tensor<double>& param, Tensor<double> analytic,
             LossFn&& loss) {
        if (!opts.only.empty() && name.rfind(opts.only, 0) != 0) return;
        if (opts.corrupt == name && analytic.size() > 0) analytic[0] += 0.01;
        out.push_back(grad_check(name, param, analytic, loss, opts.check));
    }
};

inline void check_conv_case(SuiteSink& sink, const std::string& tag, Rng& rng,
                            const Shape& in_shape, const Shape& ker_shape, std::size_t sh,
                            std::size_t sw, std::size_t ph, std::size_t pw) {
    Tensor<double> x = random_tensor(in_shape, rng);
    ConvParams<double> p;
    p.kernels = random_tensor(ker_shape, rng);
    p.bias = random_tensor({ker_shape[0]}, rng);
    p.stride_h = sh;
    p.stride_w = sw;
    p.pad_h = ph;
    p.pad_w = pw;
    Tensor<double> r = random_tensor(conv2d(x, p).shape(), rng);
    auto loss = [&] { return dot_all(conv2d(x, p), r); };
    ConvGrads<double> g = conv2d_backward(x, p, r);
    sink.run(tag + ".kernels", p.kernels, g.kernels, loss);
    sink.run(tag + ".bias", p.bias, g.bias, loss);
    sink.run(tag + ".input", x, g.input, loss);
}

inline void check_model_case(SuiteSink& sink, const std::string& tag, const ModelConfig& cfg,
                             const Shape& input_shape, Rng& rng) {
    Model<double> m = build_model<double>(cfg, rng.next_u64());
    // Zero-bias init leaves ReLU pre-activations centered on 0; nudge so the
    // finite-difference probes stay off the kinks.
    for (auto& c : m.convs) {
        for (auto& b : c.bias) b = rng.uniform(0.05, 0.15);
    }
    Tensor<double> x = random_tensor(input_shape, rng, 0.0, 1.0);
    std::size_t label = 1 % cfg.num_classes;
    auto loss = [&] {
        ForwardTape<double> tape = model_forward(m, x);
        return static_cast<double>(softmax_cross_entropy(tape.logits, label).loss);
    };
    ForwardTape<double> tape = model_forward(m, x);
    auto ce = softmax_cross_entropy(tape.logits, label);
    ModelGrads<double> g = model_backward(m, tape, ce.logit_grad);
    auto params = named_tensors(m);
    auto grads = named_grads(g);
    for (std::size_t i = 0; i < params.size(); ++i) {
        sink.run(tag + "." + params[i].first, *params[i].second, *grads[i].second, loss);
    }
    sink.run(tag + ".input", x, g.input, loss);
}

} // namespace detail

// Stack small enough to accept a [1,40,50] input while exercising every layer
// kind (conv, ReLU, LRN, pool, attention, classifier).
inline ModelConfig gradcheck_model_config() {
    ModelConfig cfg;
    cfg.channel_scale = 0.125;
    cfg.stages = {
        {square_conv(64, 5, 2, 0, true), PoolSpec{3, 3, 2, 2}},
        {square_conv(96, 3, 1, 1, true), PoolSpec{3, 3, 2, 2}},
        {square_conv(128, 3, 1, 1, false), std::nullopt},
    };
    cfg.attention_dim = 8;
    cfg.lambda = 0.3;
    return cfg;
}

// Every layer, the attention block, and two end-to-end models, all in double
// precision with frozen seeds.
inline std::vector<GradCheckReport> run_gradcheck_suite(const GradSuiteOptions& opts = {}) {
    std::vector<GradCheckReport> reports;
    detail::SuiteSink sink{reports, opts};
    Rng rng(mix_seed(opts.check.seed, 0x5eedu));

    detail::check_conv_case(sink, "conv2d", rng, {3, 8, 9}, {4, 3, 3, 3}, 1, 1, 1, 1);
    detail::check_conv_case(sink, "conv2d_strided", rng, {2, 11, 10}, {3, 2, 3, 2}, 2, 1, 0, 1);

    { // maxpool, values spaced away from ties
        Tensor<double> x = detail::kink_safe_tensor({2, 6, 7}, rng);
        Tensor<double> r = detail::random_tensor(maxpool(x, 3, 2, 2, 2).output.shape(), rng);
        auto loss = [&] { return detail::dot_all(maxpool(x, 3, 2, 2, 2).output, r); };
        Tensor<double> analytic = maxpool_backward(maxpool(x, 3, 2, 2, 2), r);
        sink.run("maxpool.input", x, analytic, loss);
    }
    { // relu, values away from the kink
        Tensor<double> x = detail::kink_safe_tensor({3, 5, 4}, rng);
        Tensor<double> r = detail::random_tensor(x.shape(), rng);
        auto loss = [&] { return detail::dot_all(relu(x), r); };
        Tensor<double> analytic = relu_backward(x, r);
        sink.run("relu.input", x, analytic, loss);
    }
    {
        LrnParams lp;
        Tensor<double> x = detail::random_tensor({6, 4, 5}, rng);
        Tensor<double> r = detail::random_tensor(x.shape(), rng);
        auto loss = [&] { return detail::dot_all(lrn(x, lp), r); };
        Tensor<double> analytic = lrn_backward(x, lp, r);
        sink.run("lrn.input", x, analytic, loss);
    }
    {
        LinearParams<double> p{detail::random_tensor({5, 9}, rng), detail::random_tensor({5}, rng)};
        Tensor<double> x = detail::random_tensor({9}, rng);
        Tensor<double> r = detail::random_tensor({5}, rng);
        auto loss = [&] { return detail::dot_all(linear(x, p), r); };
        LinearGrads<double> g = linear_backward(x, p, r);
        sink.run("linear.weight", p.weight, g.weight, loss);
        sink.run("linear.bias", p.bias, g.bias, loss);
        sink.run("linear.input", x, g.input, loss);
    }
    {
        Tensor<double> logits = detail::random_tensor({4}, rng);
        auto loss = [&] { return static_cast<double>(softmax_cross_entropy(logits, 2).loss); };
        Tensor<double> analytic = softmax_cross_entropy(logits, 2).logit_grad;
        sink.run("softmax_ce.logits", logits, analytic, loss);
    }
    { // attention block on its own grid
        Rng arng(rng.next_u64());
        AttentionParams<double> p = init_attention<double>(5, 6, 0.3, arng);
        Tensor<double> feats = detail::random_tensor({5, 3, 4}, rng);
        Tensor<double> r = detail::random_tensor({5}, rng);
        auto loss = [&] {
            return detail::dot_all(attention_forward(feats, p).context, r);
        };
        AttentionGrads<double> g = attention_backward(p, attention_forward(feats, p), r);
        sink.run("attention.w", p.w, g.w, loss);
        sink.run("attention.b", p.b, g.b, loss);
        sink.run("attention.u", p.u, g.u, loss);
        sink.run("attention.features", feats, g.features, loss);
    }

    detail::check_model_case(sink, "model40", gradcheck_model_config(), {1, 40, 50}, rng);

    ModelConfig alex;
    alex.channel_scale = 0.125;
    alex.attention_dim = 16;
    detail::check_model_case(sink, "alexnet125", alex, {1, 200, 70}, rng);
    return reports;
}

} // namespace afcn
