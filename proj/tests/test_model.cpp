#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "afcn/io.hpp"
#include "afcn/model.hpp"
#include "afcn/random.hpp"
#include "oracles.hpp"

using namespace afcn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "afcn_model_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.stages = {
        {square_conv(4, 5, 2, 0, true), PoolSpec{3, 3, 2, 2}},
        {square_conv(6, 3, 1, 1, false), std::nullopt},
    };
    cfg.attention_dim = 5;
    return cfg;
}

Tensor<float> random_grid(std::size_t bins, std::size_t frames, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<float> g({bins, frames});
    for (auto& v : g) v = static_cast<float>(rng.uniform(0.0, 4.0));
    return g;
}

} // namespace

TEST(InferShapes, DefaultStackReferenceCase) {
    ModelConfig cfg; // full-width AlexNet stack
    ShapeTrace tr = infer_shapes(cfg, {1, 200, 97});
    EXPECT_EQ(tr.out_f, 5u);
    EXPECT_EQ(tr.out_t, 1u);
    EXPECT_EQ(tr.out_c, 256u);
    EXPECT_EQ(tr.positions(), 5u);
}

TEST(InferShapes, MatchesFloorOracleOnRandomStacks) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        ModelConfig cfg;
        cfg.stages.clear();
        std::size_t n = 1 + rng.index(4);
        for (std::size_t s = 0; s < n; ++s) {
            EncoderStage st;
            st.conv = square_conv(1 + rng.index(8), 1 + rng.index(7), 1 + rng.index(4),
                                  rng.index(3), false);
            if (rng.index(2)) st.pool = PoolSpec{1 + rng.index(3), 1 + rng.index(3),
                                                 1 + rng.index(3), 1 + rng.index(3)};
            cfg.stages.push_back(st);
        }
        std::size_t bins = 1 + rng.index(160), frames = 1 + rng.index(160);
        auto want = oracles::stack_shape(cfg, bins, frames);
        if (!want) {
            EXPECT_FALSE(shapes_valid(cfg, bins, frames));
            EXPECT_THROW(infer_shapes(cfg, {1, bins, frames}), ShapeError);
        } else {
            ShapeTrace tr = infer_shapes(cfg, {1, bins, frames});
            EXPECT_EQ(tr.out_c, want->channels);
            EXPECT_EQ(tr.out_f, want->f);
            EXPECT_EQ(tr.out_t, want->t);
        }
    }
}

TEST(InferShapes, MinInputFrames) {
    ModelConfig cfg;
    EXPECT_EQ(min_input_frames(cfg, 200), 67u);
    // narrow time pooling at the last stage admits much shorter inputs
    cfg.stages[4].pool = PoolSpec{3, 1, 2, 1};
    EXPECT_EQ(min_input_frames(cfg, 200), 35u);
}

TEST(InferShapes, ChannelScaleFloorsAtOne) {
    EXPECT_EQ(scaled_channels(96, 0.25), 24u);
    EXPECT_EQ(scaled_channels(96, 0.125), 12u);
    EXPECT_EQ(scaled_channels(3, 0.1), 1u); // never collapses to zero
    EXPECT_EQ(scaled_channels(96, 1.0), 96u);
}

TEST(Model, ForwardProducesLogitsOnVariableLengths) {
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, 3);
    for (std::size_t frames : {30u, 51u, 90u}) {
        Tensor<float> grid = random_grid(40, frames, frames);
        Tensor<float> feat = prepare_features(grid, cfg);
        ForwardTape<float> tape = model_forward(m, feat);
        ASSERT_EQ(tape.logits.shape(), (Shape{4}));
        EXPECT_TRUE(tape.logits.all_finite());
    }
}

TEST(Model, TooShortInputExplains) {
    ModelConfig cfg; // default stack needs 67 frames
    Model<float> m = build_model<float>(cfg, 3);
    Tensor<float> feat = prepare_features(random_grid(200, 40, 1), cfg);
    try {
        model_forward(m, feat);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("at least 67 frames"), std::string::npos)
            << e.what();
    }
}

TEST(Model, BuildIsDeterministic) {
    ModelConfig cfg = tiny_config();
    Model<float> a = build_model<float>(cfg, 11);
    Model<float> b = build_model<float>(cfg, 11);
    Model<float> c = build_model<float>(cfg, 12);
    auto ta = named_tensors(a), tb = named_tensors(b), tc = named_tensors(c);
    ASSERT_EQ(ta.size(), tb.size());
    bool any_diff_seed_differs = false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        EXPECT_EQ(ta[i].first, tb[i].first);
        ASSERT_EQ(ta[i].second->size(), tb[i].second->size());
        for (std::size_t j = 0; j < ta[i].second->size(); ++j) {
            EXPECT_EQ((*ta[i].second)[j], (*tb[i].second)[j]);
            if ((*ta[i].second)[j] != (*tc[i].second)[j]) any_diff_seed_differs = true;
        }
    }
    EXPECT_TRUE(any_diff_seed_differs);
}

TEST(Model, PrepareFeaturesAppliesLogTransform) {
    ModelConfig cfg = tiny_config();
    Tensor<float> grid({2, 2}, {0.0f, 1.0f, 3.0f, 7.0f});
    Tensor<float> feat = prepare_features(grid, cfg);
    ASSERT_EQ(feat.shape(), (Shape{1, 2, 2}));
    EXPECT_FLOAT_EQ(feat.at(0, 0, 0), std::log(1.0f));
    EXPECT_FLOAT_EQ(feat.at(0, 1, 1), std::log(8.0f));
    cfg.log_offset = 0.0; // disables the transform
    Tensor<float> raw = prepare_features(grid, cfg);
    EXPECT_FLOAT_EQ(raw.at(0, 1, 0), 3.0f);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, 5);
    fs::path p1 = temp_dir() / "a.afcn";
    fs::path p2 = temp_dir() / "b.afcn";
    save_checkpoint(m, p1);
    Model<float> back = load_checkpoint<float>(p1, cfg);
    save_checkpoint(back, p2);
    EXPECT_EQ(read_file(p1.string()), read_file(p2.string()));
}

TEST(Checkpoint, DoubleModelRoundTripsThroughF32) {
    ModelConfig cfg = tiny_config();
    Model<double> m = build_model<double>(cfg, 5);
    fs::path p1 = temp_dir() / "d1.afcn";
    fs::path p2 = temp_dir() / "d2.afcn";
    save_checkpoint(m, p1);
    Model<double> back = load_checkpoint<double>(p1, cfg);
    save_checkpoint(back, p2);
    EXPECT_EQ(read_file(p1.string()), read_file(p2.string()));
}

TEST(Checkpoint, DetectsCorruption) {
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, 5);
    fs::path p = temp_dir() / "corrupt.afcn";
    save_checkpoint(m, p);
    auto bytes = read_file(p.string());
    bytes[bytes.size() / 2] ^= 0x40;
    fs::path pc = temp_dir() / "corrupt2.afcn";
    write_file(pc.string(), bytes);
    EXPECT_THROW(load_checkpoint<float>(pc, cfg), FormatError);
}

TEST(Checkpoint, RejectsWrongArchitecture) {
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, 5);
    fs::path p = temp_dir() / "arch.afcn";
    save_checkpoint(m, p);
    ModelConfig other = tiny_config();
    other.stages[0].conv.channels = 9; // shape mismatch
    EXPECT_THROW(load_checkpoint<float>(p, other), FormatError);
    ModelConfig deeper = tiny_config();
    deeper.stages.push_back({square_conv(4, 3, 1, 1, false), std::nullopt});
    EXPECT_THROW(load_checkpoint<float>(p, deeper), FormatError); // missing tensor
}

TEST(Checkpoint, NamedTensorInventory) {
    ModelConfig cfg; // five conv stages
    cfg.channel_scale = 0.125;
    Model<float> m = build_model<float>(cfg, 1);
    auto named = named_tensors(m);
    // 5 stages x (kernels, bias) + attention w/b/u + classifier weight/bias
    ASSERT_EQ(named.size(), 15u);
    EXPECT_EQ(named[0].first, "encoder.conv1.kernels");
    EXPECT_EQ(named[1].first, "encoder.conv1.bias");
    EXPECT_EQ(named[8].first, "encoder.conv5.kernels");
    EXPECT_EQ(named[10].first, "attention.w");
    EXPECT_EQ(named[13].first, "classifier.weight");
}

// Donor files carry only encoder tensors; import rejects anything else.
void save_encoder_only(const Model<float>& m, const fs::path& p) {
    std::vector<std::pair<std::string, const Tensor<float>*>> enc;
    for (auto& [name, tensor] : named_tensors(m)) {
        if (name.rfind("encoder.", 0) == 0) enc.emplace_back(name, tensor);
    }
    write_checkpoint_file(p, enc);
}

TEST(ImportEncoder, SumsRgbKernelsIntoMono) {
    // donor trained on 3-channel input
    ModelConfig donor_cfg = tiny_config();
    donor_cfg.input_channels = 3;
    Model<float> donor = build_model<float>(donor_cfg, 21);
    fs::path p = temp_dir() / "donor.afcn";
    save_encoder_only(donor, p);

    ModelConfig cfg = tiny_config(); // mono input
    Model<float> target = build_model<float>(cfg, 22);
    import_encoder(p, target, /*strict=*/false);

    // conv1 kernels become the channel sum of the donor's
    const auto& dk = donor.convs[0].kernels;
    const auto& tk = target.convs[0].kernels;
    ASSERT_EQ(tk.shape(), (Shape{4, 1, 5, 5}));
    for (std::size_t oc = 0; oc < 4; ++oc) {
        for (std::size_t y = 0; y < 5; ++y) {
            for (std::size_t x = 0; x < 5; ++x) {
                float want = dk.at(oc, 0, y, x) + dk.at(oc, 1, y, x) + dk.at(oc, 2, y, x);
                EXPECT_FLOAT_EQ(tk.at(oc, 0, y, x), want);
            }
        }
    }
    // deeper stages copy through unchanged
    for (std::size_t i = 0; i < donor.convs[1].kernels.size(); ++i) {
        EXPECT_EQ(target.convs[1].kernels[i], donor.convs[1].kernels[i]);
    }
    // attention and classifier remain the target's own (different seeds differ)
    bool classifier_kept = false;
    for (std::size_t i = 0; i < target.classifier.weight.size(); ++i) {
        if (target.classifier.weight[i] != donor.classifier.weight[i]) classifier_kept = true;
    }
    EXPECT_TRUE(classifier_kept);
}

TEST(ImportEncoder, StrictModeRejectsChannelMismatch) {
    ModelConfig donor_cfg = tiny_config();
    donor_cfg.input_channels = 3;
    Model<float> donor = build_model<float>(donor_cfg, 21);
    fs::path p = temp_dir() / "donor_strict.afcn";
    save_encoder_only(donor, p);
    Model<float> target = build_model<float>(tiny_config(), 22);
    EXPECT_THROW(import_encoder(p, target, /*strict=*/true), ImportError);
}

TEST(ImportEncoder, RejectsFullCheckpointAsDonor) {
    Model<float> donor = build_model<float>(tiny_config(), 21);
    fs::path p = temp_dir() / "donor_full.afcn";
    save_checkpoint(donor, p); // carries attention + classifier tensors too
    Model<float> target = build_model<float>(tiny_config(), 22);
    EXPECT_THROW(import_encoder(p, target, /*strict=*/false), ImportError);
}

TEST(Model, GridiDimensionsExposedByPredict) {
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, 3);
    Tensor<float> grid = random_grid(40, 60, 2);
    Prediction<float> pred = predict(m, grid);
    ShapeTrace tr = infer_shapes(cfg, {1, 40, 60});
    EXPECT_EQ(pred.grid_f, tr.out_f);
    EXPECT_EQ(pred.grid_t, tr.out_t);
    EXPECT_EQ(pred.alpha.size(), tr.positions());
    double sum = 0.0;
    for (float v : pred.alpha) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-5);
}
