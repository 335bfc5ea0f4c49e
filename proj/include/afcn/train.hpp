#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "afcn/data.hpp"
#include "afcn/dsp.hpp"
#include "afcn/error.hpp"
#include "afcn/eval.hpp"
#include "afcn/model.hpp"
#include "afcn/random.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// One training/evaluation item: raw magnitude grid plus its class.
template <typename T>
struct Sample {
    Tensor<T> grid; // [bins, frames]
    std::size_t label = 0;
    std::string id;
};

template <typename T>
Sample<T> sample_from_wav(const std::filesystem::path& wav, std::size_t label,
                          const SpectrogramConfig& cfg) {
    Spectrogram sp = spectrogram(read_wav(wav.string()), cfg);
    return Sample<T>{cast_tensor<T>(sp.grid), label, wav.stem().string()};
}

template <typename T>
Sample<T> sample_from_cache(const std::filesystem::path& cache_file, std::size_t label) {
    Spectrogram sp = read_spectrogram_cache(cache_file.string());
    return Sample<T>{cast_tensor<T>(sp.grid), label, cache_file.stem().string()};
}

template <typename T>
std::vector<Sample<T>> load_cached_samples(const std::vector<Utterance>& utts,
                                           const std::vector<std::size_t>& indices,
                                           const std::filesystem::path& cache_dir) {
    std::vector<Sample<T>> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        std::filesystem::path f = cache_dir / (utts[i].id + ".spg1");
        if (!std::filesystem::exists(f)) {
            throw Error("missing feature cache " + f.string() + " (run extract first)");
        }
        out.push_back(sample_from_cache<T>(f, utts[i].label));
        out.back().id = utts[i].id;
    }
    return out;
}

template <typename T>
std::size_t predict_label(const Model<T>& m, const Sample<T>& s) {
    Prediction<T> p = predict(m, s.grid);
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.logits.size(); ++k) {
        if (p.logits[k] > p.logits[best]) best = k;
    }
    return best;
}

template <typename T>
ConfusionMatrix evaluate_model(const Model<T>& m, const std::vector<Sample<T>>& set) {
    ConfusionMatrix cm(m.config.num_classes);
    for (const auto& s : set) cm.add(s.label, predict_label(m, s));
    return cm;
}

// ---- the training loop -----------------------------------------------------------

struct TrainOptions {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t accum_window = 16; // batch size 1 with summed grads, mean-scaled
    std::size_t max_epochs = 200;
    std::size_t patience = 10;     // validation-UA early stop
    double train_wa_target = 1.0;  // stop rule when there is no validation set
    std::size_t min_epochs = 1;
    std::size_t freeze_through = 0; // conv stages 1..k stay at their initial values
    std::uint64_t seed = 1;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_wa = 0.0;
    double val_ua = 0.0;
    bool has_val = false;
};

struct TrainResult {
    std::vector<EpochStats> log;
    std::size_t best_epoch = 0; // 1-based; 0 when no validation tracking
    double best_val_ua = 0.0;
    std::size_t steps = 0;
    bool hit_train_target = false;
};

namespace detail {

template <typename T>
bool frozen_name(const std::string& name, const TrainOptions& opt, const Model<T>& m) {
    if (m.config.lambda == 0.0 && name.rfind("attention.", 0) == 0) {
        return true; // uniform-pooling ablation: scores are unused, keep params pinned
    }
    for (std::size_t i = 1; i <= opt.freeze_through; ++i) {
        if (name.rfind("encoder.conv" + std::to_string(i) + ".", 0) == 0) return true;
    }
    return false;
}

} // namespace detail

// SGD with momentum over shuffled single utterances, gradients accumulated in
// index order over accum_window-sized bundles (deterministic for any worker
// count). Early stop: best validation UA with patience when a validation set
// exists, else a train-WA target confirmed by a fresh evaluation pass.
template <typename T>
TrainResult train_model(Model<T>& model, const std::vector<Sample<T>>& train,
                        const std::vector<Sample<T>>& val, const TrainOptions& opt) {
    if (train.empty()) throw ArgumentError("empty training set");
    if (opt.accum_window == 0) throw ArgumentError("accum_window must be positive");

    auto params = named_tensors(model);
    std::vector<Tensor<T>> velocity;
    velocity.reserve(params.size());
    for (auto& [name, t] : params) velocity.emplace_back(t->shape());

    Model<T> best = model;
    TrainResult result;
    result.best_val_ua = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffler(mix_seed(opt.seed, epoch));
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        std::size_t running_correct = 0;
        for (std::size_t start = 0; start < order.size(); start += opt.accum_window) {
            std::size_t n = std::min(opt.accum_window, order.size() - start);
            ModelGrads<T> acc = zero_grads_like(model, {1, 1, 1});
            for (std::size_t j = 0; j < n; ++j) {
                const Sample<T>& s = train[order[start + j]];
                Tensor<T> input = prepare_features(s.grid, model.config);
                ForwardTape<T> tape = model_forward(model, input);
                auto ce = softmax_cross_entropy(tape.logits, s.label);
                loss_sum += static_cast<double>(ce.loss);
                std::size_t pred = 0;
                for (std::size_t k = 1; k < tape.logits.size(); ++k) {
                    if (tape.logits[k] > tape.logits[pred]) pred = k;
                }
                if (pred == s.label) ++running_correct;
                ModelGrads<T> g = model_backward(model, tape, ce.logit_grad);
                accumulate_grads(acc, g);
            }
            scale_grads(acc, T(1) / static_cast<T>(n));

            auto grads = named_grads(acc);
            ++result.steps;
            for (std::size_t p = 0; p < params.size(); ++p) {
                if (detail::frozen_name(params[p].first, opt, model)) continue;
                sgd_step(*params[p].second, *grads[p].second, velocity[p], opt.lr, opt.momentum,
                         opt.weight_decay);
                if (!params[p].second->all_finite()) {
                    throw NanAbort(result.steps, "parameter tensor " + params[p].first);
                }
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(train.size());

        if (!val.empty()) {
            ConfusionMatrix cm = evaluate_model(model, val);
            st.has_val = true;
            st.val_wa = weighted_accuracy(cm);
            st.val_ua = unweighted_accuracy(cm);
            if (st.val_ua > result.best_val_ua) {
                result.best_val_ua = st.val_ua;
                result.best_epoch = epoch;
                best = model;
                since_best = 0;
            } else {
                ++since_best;
            }
            result.log.push_back(st);
            if (epoch >= opt.min_epochs && since_best > opt.patience) break;
        } else {
            result.log.push_back(st);
            double running_wa =
                static_cast<double>(running_correct) / static_cast<double>(train.size());
            if (epoch >= opt.min_epochs && opt.train_wa_target > 0.0 &&
                running_wa >= opt.train_wa_target) {
                // confirm with the final parameters before stopping
                ConfusionMatrix cm = evaluate_model(model, train);
                if (weighted_accuracy(cm) >= opt.train_wa_target) {
                    result.hit_train_target = true;
                    break;
                }
            }
        }
    }

    if (!val.empty() && result.best_epoch > 0) model = best;
    return result;
}

inline std::string training_log_csv(const TrainResult& r) {
    std::ostringstream os;
    os.precision(12);
    os << "epoch,train_loss,val_wa,val_ua\n";
    for (const auto& st : r.log) {
        os << st.epoch << "," << st.train_loss << ",";
        if (st.has_val) {
            os << st.val_wa << "," << st.val_ua;
        } else {
            os << "nan,nan";
        }
        os << "\n";
    }
    return os.str();
}

} // namespace afcn
