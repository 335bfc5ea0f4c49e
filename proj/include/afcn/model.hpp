#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "afcn/attention.hpp"
#include "afcn/error.hpp"
#include "afcn/io.hpp"
#include "afcn/layers.hpp"
#include "afcn/random.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// ---- encoder stack description ----------------------------------------------------

struct ConvSpec {
    std::size_t channels = 0;
    std::size_t kh = 3, kw = 3;
    std::size_t sh = 1, sw = 1;
    std::size_t ph = 0, pw = 0;
    bool lrn = false;
};

struct PoolSpec {
    std::size_t kh = 3, kw = 3;
    std::size_t sh = 2, sw = 2;
};

struct EncoderStage {
    ConvSpec conv;
    std::optional<PoolSpec> pool;
};

inline ConvSpec square_conv(std::size_t channels, std::size_t k, std::size_t s, std::size_t p,
                            bool lrn) {
    return ConvSpec{channels, k, k, s, s, p, p, lrn};
}

// Classic AlexNet minus the fully connected layers: conv1 96@11x11 s4 +LRN,
// pool 3/2, conv2 256@5x5 p2 +LRN, pool 3/2, conv3 384@3x3 p1, conv4 384@3x3 p1,
// conv5 256@3x3 p1, pool 3/2.
inline std::vector<EncoderStage> default_alexnet_stages() {
    return {
        {square_conv(96, 11, 4, 0, true), PoolSpec{3, 3, 2, 2}},
        {square_conv(256, 5, 1, 2, true), PoolSpec{3, 3, 2, 2}},
        {square_conv(384, 3, 1, 1, false), std::nullopt},
        {square_conv(384, 3, 1, 1, false), std::nullopt},
        {square_conv(256, 3, 1, 1, false), PoolSpec{3, 3, 2, 2}},
    };
}

struct ModelConfig {
    std::size_t input_channels = 1; // 3 only for importing image-pretrained conv1 weights
    std::size_t num_classes = 4;
    double channel_scale = 1.0;
    std::vector<EncoderStage> stages = default_alexnet_stages();
    std::size_t attention_dim = 0; // 0 means "match the final channel count"
    double lambda = 0.3;
    LrnParams lrn;
    double log_offset = 1.0; // features enter as log(x + offset); 0 disables
};

inline std::size_t scaled_channels(std::size_t base, double scale) {
    auto c = static_cast<std::size_t>(std::max<long long>(1, std::llround(base * scale)));
    return c;
}

// Stage list with channel_scale applied; the single source of truth for
// build_model, infer_shapes and receptive-field geometry.
inline std::vector<EncoderStage> resolved_stages(const ModelConfig& cfg) {
    auto stages = cfg.stages;
    for (auto& st : stages) st.conv.channels = scaled_channels(st.conv.channels, cfg.channel_scale);
    return stages;
}

// ---- shape inference ---------------------------------------------------------------

struct ShapeTrace {
    std::vector<std::pair<std::string, Shape>> layers; // name -> [C,F,T] after the layer
    std::size_t out_c = 0, out_f = 0, out_t = 0;
    std::size_t positions() const { return out_f * out_t; }
};

namespace detail {

inline std::size_t layer_extent(std::size_t in, std::size_t pad, std::size_t kernel,
                                std::size_t stride, const std::string& layer, char axis) {
    if (in + 2 * pad < kernel) {
        throw ShapeError(layer + ": " + std::string(1, axis) + " extent " + std::to_string(in) +
                         " (+" + std::to_string(2 * pad) + " pad) collapses below kernel " +
                         std::to_string(kernel));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

} // namespace detail

// Pure floor arithmetic over the stack; errors name the first layer whose
// output would collapse below one cell.
inline ShapeTrace infer_shapes(const ModelConfig& cfg, const Shape& input) {
    if (input.size() != 3) throw ShapeError("infer_shapes input must be [C,F,T]");
    if (input[0] != cfg.input_channels) {
        throw ShapeError("input has " + std::to_string(input[0]) + " channels, config expects " +
                         std::to_string(cfg.input_channels));
    }
    ShapeTrace tr;
    std::size_t f = input[1], t = input[2];
    std::size_t pool_idx = 0;
    auto stages = resolved_stages(cfg);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& st = stages[i];
        std::string cname = "conv" + std::to_string(i + 1);
        f = detail::layer_extent(f, st.conv.ph, st.conv.kh, st.conv.sh, cname, 'F');
        t = detail::layer_extent(t, st.conv.pw, st.conv.kw, st.conv.sw, cname, 'T');
        tr.layers.emplace_back(cname, Shape{st.conv.channels, f, t});
        if (st.pool) {
            ++pool_idx;
            std::string pname = "pool" + std::to_string(pool_idx);
            f = detail::layer_extent(f, 0, st.pool->kh, st.pool->sh, pname, 'F');
            t = detail::layer_extent(t, 0, st.pool->kw, st.pool->sw, pname, 'T');
            tr.layers.emplace_back(pname, Shape{st.conv.channels, f, t});
        }
    }
    tr.out_c = stages.empty() ? cfg.input_channels : stages.back().conv.channels;
    tr.out_f = f;
    tr.out_t = t;
    return tr;
}

inline bool shapes_valid(const ModelConfig& cfg, std::size_t bins, std::size_t frames) {
    try {
        infer_shapes(cfg, {cfg.input_channels, bins, frames});
        return true;
    } catch (const ShapeError&) {
        return false;
    }
}

// Smallest frame count the stack accepts at the given bin count.
inline std::size_t min_input_frames(const ModelConfig& cfg, std::size_t bins) {
    constexpr std::size_t kLimit = 1 << 14;
    for (std::size_t t = 1; t < kLimit; ++t) {
        if (shapes_valid(cfg, bins, t)) return t;
    }
    throw ConfigError("stack accepts no input shorter than " + std::to_string(kLimit) + " frames");
}

// ---- the model ---------------------------------------------------------------------

template <typename T>
struct Model {
    ModelConfig config;
    std::vector<ConvParams<T>> convs; // one per stage
    AttentionParams<T> attn;
    LinearParams<T> classifier;

    std::size_t encoder_channels() const { return convs.back().out_channels(); }
};

template <typename T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    auto stages = resolved_stages(cfg);
    if (stages.empty()) throw ConfigError("encoder needs at least one conv stage");
    if (cfg.input_channels != 1 && cfg.input_channels != 3) {
        throw ConfigError("input_channels must be 1 or 3");
    }
    if (cfg.num_classes < 2) throw ConfigError("num_classes must be at least 2");

    Model<T> m;
    m.config = cfg;
    Rng rng(seed);
    std::size_t in_ch = cfg.input_channels;
    for (const auto& st : stages) {
        ConvParams<T> p;
        p.kernels = Tensor<T>({st.conv.channels, in_ch, st.conv.kh, st.conv.kw});
        p.bias = Tensor<T>({st.conv.channels});
        p.stride_h = st.conv.sh;
        p.stride_w = st.conv.sw;
        p.pad_h = st.conv.ph;
        p.pad_w = st.conv.pw;
        double fan_in = static_cast<double>(in_ch * st.conv.kh * st.conv.kw);
        double bound = std::sqrt(6.0 / fan_in); // Kaiming-uniform, zero bias
        for (auto& v : p.kernels) v = static_cast<T>(rng.uniform(-bound, bound));
        m.convs.push_back(std::move(p));
        in_ch = st.conv.channels;
    }
    std::size_t c = in_ch;
    std::size_t d = cfg.attention_dim == 0 ? c : cfg.attention_dim;
    m.attn = init_attention<T>(c, d, cfg.lambda, rng);

    m.classifier.weight = Tensor<T>({cfg.num_classes, c});
    m.classifier.bias = Tensor<T>({cfg.num_classes});
    double bound = std::sqrt(6.0 / static_cast<double>(c));
    for (auto& v : m.classifier.weight) v = static_cast<T>(rng.uniform(-bound, bound));
    return m;
}

// Fixed order; also the checkpoint tensor order.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> named_tensors(Model<T>& m) {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < m.convs.size(); ++i) {
        std::string base = "encoder.conv" + std::to_string(i + 1);
        out.emplace_back(base + ".kernels", &m.convs[i].kernels);
        out.emplace_back(base + ".bias", &m.convs[i].bias);
    }
    out.emplace_back("attention.w", &m.attn.w);
    out.emplace_back("attention.b", &m.attn.b);
    out.emplace_back("attention.u", &m.attn.u);
    out.emplace_back("classifier.weight", &m.classifier.weight);
    out.emplace_back("classifier.bias", &m.classifier.bias);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors(const Model<T>& m) {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [name, t] : named_tensors(const_cast<Model<T>&>(m))) out.emplace_back(name, t);
    return out;
}

// ---- feature preparation ------------------------------------------------------------

// [F,T] magnitude grid -> [C_in,F,T] model input: optional log compression, then
// channel replication (3-channel mode exists only for imported conv1 weights).
template <typename T>
Tensor<T> prepare_features(const Tensor<T>& grid, const ModelConfig& cfg) {
    if (grid.rank() != 2) throw ShapeError("prepare_features expects a [bins,frames] grid");
    std::size_t f = grid.extent(0), t = grid.extent(1);
    Tensor<T> out({cfg.input_channels, f, t});
    T off = static_cast<T>(cfg.log_offset);
    for (std::size_t i = 0; i < f * t; ++i) {
        T v = cfg.log_offset > 0 ? std::log(grid[i] + off) : grid[i];
        for (std::size_t ch = 0; ch < cfg.input_channels; ++ch) out[ch * f * t + i] = v;
    }
    return out;
}

// ---- forward with tape ----------------------------------------------------------------

template <typename T>
struct StageTape {
    Tensor<T> conv_out; // pre-ReLU
    Tensor<T> relu_out;
    Tensor<T> lrn_out;       // valid iff has_lrn
    MaxPoolResult<T> pool;   // valid iff has_pool
    bool has_lrn = false;
    bool has_pool = false;

    const Tensor<T>& output() const {
        if (has_pool) return pool.output;
        if (has_lrn) return lrn_out;
        return relu_out;
    }
};

template <typename T>
struct ForwardTape {
    Tensor<T> input;
    std::vector<StageTape<T>> stages;
    AttentionResult<T> attn;
    Tensor<T> logits;

    const Tensor<T>& stage_input(std::size_t i) const {
        return i == 0 ? input : stages[i - 1].output();
    }
};

template <typename T>
ForwardTape<T> model_forward(const Model<T>& m, const Tensor<T>& input) {
    if (input.rank() != 3) throw ShapeError("model input must be [C,F,T]");
    try {
        infer_shapes(m.config, input.shape());
    } catch (const ShapeError& e) {
        throw ShapeError(std::string(e.what()) + "; this stack needs at least " +
                         std::to_string(min_input_frames(m.config, input.extent(1))) +
                         " frames at " + std::to_string(input.extent(1)) + " bins");
    }

    ForwardTape<T> tape;
    tape.input = input;
    auto stages = resolved_stages(m.config);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        StageTape<T> st;
        st.conv_out = conv2d(tape.stage_input(i), m.convs[i]);
        st.relu_out = relu(st.conv_out);
        st.has_lrn = stages[i].conv.lrn;
        if (st.has_lrn) st.lrn_out = lrn(st.relu_out, m.config.lrn);
        st.has_pool = stages[i].pool.has_value();
        if (st.has_pool) {
            const Tensor<T>& pre = st.has_lrn ? st.lrn_out : st.relu_out;
            st.pool = maxpool(pre, stages[i].pool->kh, stages[i].pool->kw, stages[i].pool->sh,
                              stages[i].pool->sw);
        }
        tape.stages.push_back(std::move(st));
    }
    tape.attn = attention_forward(tape.stages.back().output(), m.attn);
    tape.logits = linear(tape.attn.context, m.classifier);
    return tape;
}

// ---- backward ---------------------------------------------------------------------------

template <typename T>
struct ModelGrads {
    std::vector<Tensor<T>> conv_kernels;
    std::vector<Tensor<T>> conv_bias;
    Tensor<T> attn_w, attn_b, attn_u;
    Tensor<T> cls_weight, cls_bias;
    Tensor<T> input;
};

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> named_grads(ModelGrads<T>& g) {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < g.conv_kernels.size(); ++i) {
        std::string base = "encoder.conv" + std::to_string(i + 1);
        out.emplace_back(base + ".kernels", &g.conv_kernels[i]);
        out.emplace_back(base + ".bias", &g.conv_bias[i]);
    }
    out.emplace_back("attention.w", &g.attn_w);
    out.emplace_back("attention.b", &g.attn_b);
    out.emplace_back("attention.u", &g.attn_u);
    out.emplace_back("classifier.weight", &g.cls_weight);
    out.emplace_back("classifier.bias", &g.cls_bias);
    return out;
}

template <typename T>
ModelGrads<T> model_backward(const Model<T>& m, const ForwardTape<T>& tape,
                             const Tensor<T>& logit_grad) {
    ModelGrads<T> g;
    auto cls = linear_backward(tape.attn.context, m.classifier, logit_grad);
    g.cls_weight = std::move(cls.weight);
    g.cls_bias = std::move(cls.bias);

    auto att = attention_backward(m.attn, tape.attn, cls.input);
    g.attn_w = std::move(att.w);
    g.attn_b = std::move(att.b);
    g.attn_u = std::move(att.u);

    g.conv_kernels.resize(m.convs.size());
    g.conv_bias.resize(m.convs.size());
    Tensor<T> up = std::move(att.features);
    for (std::size_t i = m.convs.size(); i-- > 0;) {
        const StageTape<T>& st = tape.stages[i];
        if (st.has_pool) up = maxpool_backward(st.pool, up);
        if (st.has_lrn) up = lrn_backward(st.relu_out, m.config.lrn, up);
        up = relu_backward(st.conv_out, up);
        auto cg = conv2d_backward(tape.stage_input(i), m.convs[i], up);
        g.conv_kernels[i] = std::move(cg.kernels);
        g.conv_bias[i] = std::move(cg.bias);
        up = std::move(cg.input);
    }
    g.input = std::move(up);
    return g;
}

template <typename T>
ModelGrads<T> zero_grads_like(const Model<T>& m, const Shape& input_shape) {
    ModelGrads<T> g;
    for (const auto& c : m.convs) {
        g.conv_kernels.emplace_back(c.kernels.shape());
        g.conv_bias.emplace_back(c.bias.shape());
    }
    g.attn_w = Tensor<T>(m.attn.w.shape());
    g.attn_b = Tensor<T>(m.attn.b.shape());
    g.attn_u = Tensor<T>(m.attn.u.shape());
    g.cls_weight = Tensor<T>(m.classifier.weight.shape());
    g.cls_bias = Tensor<T>(m.classifier.bias.shape());
    g.input = Tensor<T>(input_shape);
    return g;
}

template <typename T>
void accumulate_grads(ModelGrads<T>& acc, ModelGrads<T>& g) {
    auto a = named_grads(acc), b = named_grads(g);
    for (std::size_t i = 0; i < a.size(); ++i) {
        Tensor<T>&dst = *a[i].second, &src = *b[i].second;
        if (!dst.same_shape(src)) throw ShapeError("gradient accumulation shape mismatch");
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
}

template <typename T>
void scale_grads(ModelGrads<T>& g, T s) {
    for (auto& [name, t] : named_grads(g)) {
        for (auto& v : *t) v *= s;
    }
}

// ---- prediction convenience --------------------------------------------------------------

template <typename T>
struct Prediction {
    Tensor<T> logits;      // [num_classes]
    Tensor<T> alpha;       // [L]
    std::size_t grid_f = 0; // attention grid extents (L = grid_f * grid_t)
    std::size_t grid_t = 0;
};

template <typename T>
Prediction<T> predict(const Model<T>& m, const Tensor<T>& grid) {
    Tensor<T> input = prepare_features(grid, m.config);
    ForwardTape<T> tape = model_forward(m, input);
    const Shape& fs = tape.attn.feature_shape; // [C,F',T']
    return Prediction<T>{std::move(tape.logits), std::move(tape.attn.alpha), fs[1], fs[2]};
}

// ---- checkpoint I/O --------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'A', 'F', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensorF {
    std::string name;
    Tensor<float> values;
};

template <typename T>
void write_checkpoint_file(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.str(name);
        w.u8(static_cast<std::uint8_t>(tensor->rank()));
        for (std::size_t d = 0; d < tensor->rank(); ++d) {
            w.u32(static_cast<std::uint32_t>(tensor->extent(d)));
        }
        for (const T& v : *tensor) w.f32(static_cast<float>(v));
    }
    w.u32(crc32(w.bytes().data(), w.bytes().size()));
    write_file(path, w.bytes());
}

inline std::vector<NamedTensorF> read_checkpoint_file(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() < 16) throw FormatError(path.string() + ": truncated checkpoint");
    ByteReader crc_reader(bytes.data() + bytes.size() - 4, 4, path.string());
    std::uint32_t stored = crc_reader.u32();
    std::uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored != actual) {
        throw FormatError(path.string() + ": CRC mismatch (file corrupt)");
    }
    ByteReader r(bytes.data(), bytes.size() - 4, path.string());
    if (r.str(4) != std::string(kCheckpointMagic, 4)) {
        throw FormatError(path.string() + ": bad magic");
    }
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    }
    std::uint32_t count = r.u32();
    std::vector<NamedTensorF> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        std::uint8_t rank = r.u8();
        Shape shape(rank);
        for (auto& e : shape) e = r.u32();
        Tensor<float> t(shape);
        for (auto& v : t) v = r.f32();
        out.push_back(NamedTensorF{std::move(name), std::move(t)});
    }
    return out;
}

template <typename T>
void save_checkpoint(const Model<T>& m, const std::filesystem::path& path) {
    write_checkpoint_file(path, named_tensors(m));
}

// Rebuilds the model from cfg and replaces every parameter from the file; the
// file must contain exactly the expected tensor names with matching shapes.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg) {
    Model<T> m = build_model<T>(cfg, 0);
    std::map<std::string, Tensor<float>> file_tensors;
    for (auto& nt : read_checkpoint_file(path)) file_tensors.emplace(nt.name, std::move(nt.values));

    for (auto& [name, tensor] : named_tensors(m)) {
        auto it = file_tensors.find(name);
        if (it == file_tensors.end()) {
            throw FormatError(path.string() + ": checkpoint missing tensor '" + name + "'");
        }
        if (it->second.shape() != tensor->shape()) {
            throw FormatError(path.string() + ": tensor '" + name + "' has shape " +
                              shape_str(it->second.shape()) + ", model expects " +
                              shape_str(tensor->shape()));
        }
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            (*tensor)[i] = static_cast<T>(it->second[i]);
        }
        file_tensors.erase(it);
    }
    if (!file_tensors.empty()) {
        throw FormatError(path.string() + ": unknown tensor name '" +
                          file_tensors.begin()->first + "'");
    }
    return m;
}

// Overwrites encoder tensors from a checkpoint-format file holding a subset of
// encoder tensor names; attention and classifier stay as initialized. With
// strict=false a 3-input-channel conv1 kernel collapses onto a 1-channel model
// by summing over the input-channel axis.
template <typename T>
void import_encoder(const std::filesystem::path& path, Model<T>& m, bool strict) {
    std::map<std::string, Tensor<T>*> mine;
    for (auto& [name, tensor] : named_tensors(m)) {
        if (name.rfind("encoder.", 0) == 0) mine[name] = tensor;
    }
    std::vector<std::string> mismatches;
    for (auto& nt : read_checkpoint_file(path)) {
        auto it = mine.find(nt.name);
        if (it == mine.end()) {
            throw ImportError(path.string() + ": '" + nt.name +
                              "' is not an encoder tensor of this model");
        }
        Tensor<T>& dst = *it->second;
        if (nt.values.shape() == dst.shape()) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(nt.values[i]);
            continue;
        }
        bool conv1_3to1 = nt.name == "encoder.conv1.kernels" && nt.values.rank() == 4 &&
                          dst.rank() == 4 && nt.values.extent(1) == 3 && dst.extent(1) == 1 &&
                          nt.values.extent(0) == dst.extent(0) &&
                          nt.values.extent(2) == dst.extent(2) &&
                          nt.values.extent(3) == dst.extent(3);
        if (conv1_3to1 && !strict) {
            std::size_t oc = dst.extent(0), kh = dst.extent(2), kw = dst.extent(3);
            for (std::size_t o = 0; o < oc; ++o) {
                for (std::size_t i = 0; i < kh * kw; ++i) {
                    float s = 0.0f;
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        s += nt.values[(o * 3 + ch) * kh * kw + i];
                    }
                    dst[o * kh * kw + i] = static_cast<T>(s);
                }
            }
            continue;
        }
        mismatches.push_back(nt.name + ": file " + shape_str(nt.values.shape()) + " vs model " +
                             shape_str(dst.shape()));
    }
    if (!mismatches.empty()) {
        std::ostringstream os;
        os << path.string() << ": shape mismatches:";
        for (const auto& s : mismatches) os << " [" << s << "]";
        throw ImportError(os.str());
    }
}

} // namespace afcn
