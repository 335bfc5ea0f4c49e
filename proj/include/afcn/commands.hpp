#pragma once

#include <cstddef>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "afcn/data.hpp"
#include "afcn/dsp.hpp"
#include "afcn/error.hpp"
#include "afcn/eval.hpp"
#include "afcn/gradcheck.hpp"
#include "afcn/heatmap.hpp"
#include "afcn/model.hpp"
#include "afcn/runconfig.hpp"
#include "afcn/threadpool.hpp"
#include "afcn/train.hpp"

namespace afcn {

namespace detail {

inline std::string class_column_name(std::size_t k, std::size_t num_classes) {
    if (num_classes == kClassNames.size()) return kClassNames[k];
    return "class" + std::to_string(k);
}

inline std::string metrics_header(std::size_t num_classes) {
    std::string h = "fold,wa,ua";
    for (std::size_t k = 0; k < num_classes; ++k) {
        h += ",recall_" + class_column_name(k, num_classes);
    }
    return h;
}

inline void append_metrics_row(std::ostringstream& os, const std::string& fold_tag,
                               const ConfusionMatrix& cm) {
    os << fold_tag << "," << weighted_accuracy(cm) << "," << unweighted_accuracy(cm);
    for (std::size_t k = 0; k < cm.num_classes(); ++k) {
        os << ",";
        if (auto r = cm.recall(k)) {
            os << *r;
        } else {
            os << "nan";
        }
    }
    os << "\n";
}

inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "truth";
    for (std::size_t p = 0; p < cm.num_classes(); ++p) {
        os << ",pred_" << class_column_name(p, cm.num_classes());
    }
    os << "\n";
    for (std::size_t t = 0; t < cm.num_classes(); ++t) {
        os << class_column_name(t, cm.num_classes());
        for (std::size_t p = 0; p < cm.num_classes(); ++p) os << "," << cm.count(t, p);
        os << "\n";
    }
    return os.str();
}

inline std::filesystem::path require_manifest(const RunConfig& rc) {
    if (rc.manifest.empty()) throw ConfigError("config has no 'manifest' entry");
    return rc.manifest;
}

inline std::filesystem::path require_cache_dir(const RunConfig& rc) {
    if (rc.cache_dir.empty()) throw ConfigError("config has no 'cache_dir' entry");
    return rc.cache_dir;
}

} // namespace detail

// ---- synth --------------------------------------------------------------------

inline int cmd_synth(const RunConfig& rc, const std::filesystem::path& out_dir) {
    SynthConfig sc;
    sc.per_class = rc.synth_per_class;
    sc.num_sessions = rc.synth_sessions;
    sc.sample_rate_hz = rc.synth_sample_rate;
    sc.dur_min_s = rc.synth_dur_min;
    sc.dur_max_s = rc.synth_dur_max;
    sc.seed = rc.seed;
    SynthCorpus corpus = synth_corpus(out_dir, sc);
    std::cout << "wrote " << corpus.num_utterances << " utterances\n"
              << "manifest: " << corpus.manifest_path.string() << "\n"
              << "meta:     " << corpus.meta_path.string() << "\n";
    return 0;
}

// ---- extract ------------------------------------------------------------------

inline int cmd_extract(const RunConfig& rc) {
    auto manifest = detail::require_manifest(rc);
    auto cache_dir = detail::require_cache_dir(rc);
    std::vector<Utterance> utts = load_manifest(manifest);
    std::filesystem::create_directories(cache_dir);

    enum class Outcome { kWritten, kSkipped, kFailed };
    struct Slot {
        Outcome outcome = Outcome::kFailed;
        std::string message;
    };
    std::vector<Slot> slots(utts.size());

    parallel_for(utts.size(), [&](std::size_t i) {
        const Utterance& u = utts[i];
        std::filesystem::path target = cache_dir / (u.id + ".spg1");
        try {
            std::error_code ec;
            if (std::filesystem::exists(target, ec) &&
                std::filesystem::last_write_time(target, ec) >=
                    std::filesystem::last_write_time(u.path, ec) &&
                !ec) {
                WavInfo info = read_wav_info(u.path.string());
                std::size_t window = rc.spect.window_samples(info.sample_rate_hz);
                std::size_t shift = rc.spect.shift_samples(info.sample_rate_hz);
                std::size_t frames = num_frames_for(info.sample_count, window, shift);
                if (std::filesystem::file_size(target) ==
                    spectrogram_cache_size(rc.spect.keep_bins, frames)) {
                    slots[i] = {Outcome::kSkipped, ""};
                    return;
                }
            }
            Spectrogram sp = spectrogram(read_wav(u.path.string()), rc.spect);
            write_spectrogram_cache(target.string(), sp);
            slots[i] = {Outcome::kWritten, ""};
        } catch (const std::exception& e) {
            slots[i] = {Outcome::kFailed, e.what()};
        }
    });

    std::size_t written = 0, skipped = 0, failed = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        switch (slots[i].outcome) {
        case Outcome::kWritten: ++written; break;
        case Outcome::kSkipped: ++skipped; break;
        case Outcome::kFailed:
            ++failed;
            std::cout << "FAILED " << utts[i].id << ": " << slots[i].message << "\n";
            break;
        }
    }
    std::cout << "extracted " << written << ", up-to-date " << skipped << ", failed " << failed
              << "\n";
    return failed == 0 ? 0 : 1;
}

// ---- train --------------------------------------------------------------------

namespace detail {

template <typename T>
int run_train(const RunConfig& rc, std::size_t fold, const std::filesystem::path& out_dir) {
    std::vector<Utterance> utts = load_manifest(require_manifest(rc));
    FoldSplit split = split_fold(utts, fold);
    auto cache_dir = require_cache_dir(rc);
    std::vector<Sample<T>> train = load_cached_samples<T>(utts, split.train, cache_dir);
    std::vector<Sample<T>> val = load_cached_samples<T>(utts, split.val, cache_dir);

    Model<T> model = build_model<T>(rc.model, rc.seed);
    if (!rc.import_path.empty()) import_encoder(rc.import_path, model, rc.import_strict);

    TrainOptions opt;
    opt.lr = rc.lr;
    opt.momentum = rc.momentum;
    opt.weight_decay = rc.weight_decay;
    opt.accum_window = rc.accum_window;
    opt.max_epochs = rc.max_epochs;
    opt.patience = rc.patience;
    opt.train_wa_target = rc.train_wa_target;
    opt.freeze_through = rc.freeze_through;
    opt.seed = rc.seed;

    TrainResult result = train_model(model, train, val, opt);

    std::filesystem::create_directories(out_dir);
    std::string tag = "fold" + std::to_string(fold);
    std::filesystem::path ckpt = out_dir / (tag + ".afcn");
    save_checkpoint(model, ckpt);
    write_text_file((out_dir / ("train_" + tag + ".csv")).string(), training_log_csv(result));

    std::ostringstream log;
    log << "# resolved configuration\n" << resolved_config_text(rc);
    log << "# fold = " << fold << "\n";
    log << "# train/val/test sizes = " << split.train.size() << "/" << split.val.size() << "/"
        << split.test.size() << "\n";
    log << "# epochs_run = " << result.log.size() << "\n";
    log << "# optimizer_steps = " << result.steps << "\n";
    if (!val.empty()) {
        log << "# best_epoch = " << result.best_epoch << "\n";
        log << "# best_val_ua = " << result.best_val_ua << "\n";
    }
    write_text_file((out_dir / ("run_" + tag + ".log")).string(), log.str());

    std::cout << "trained fold " << fold << ": " << result.log.size() << " epochs, checkpoint "
              << ckpt.string() << "\n";
    if (!val.empty()) {
        std::cout << "best val UA " << result.best_val_ua << " at epoch " << result.best_epoch
                  << "\n";
    }
    return 0;
}

} // namespace detail

inline int cmd_train(const RunConfig& rc, std::size_t fold, const std::filesystem::path& out_dir) {
    if (rc.precision == "double") return detail::run_train<double>(rc, fold, out_dir);
    return detail::run_train<float>(rc, fold, out_dir);
}

// ---- eval ---------------------------------------------------------------------

namespace detail {

template <typename T>
ConfusionMatrix eval_fold(const RunConfig& rc, const std::vector<Utterance>& utts,
                          std::size_t fold, const std::filesystem::path& checkpoint,
                          const std::string& split_name) {
    if (!std::filesystem::exists(checkpoint)) {
        throw Error("missing checkpoint " + checkpoint.string());
    }
    FoldSplit split = split_fold(utts, fold);
    const std::vector<std::size_t>* idx = &split.test;
    if (split_name == "train") idx = &split.train;
    else if (split_name == "val") idx = &split.val;
    else if (split_name != "test") throw ArgumentError("unknown split '" + split_name + "'");

    Model<T> model = load_checkpoint<T>(checkpoint, rc.model);
    std::vector<Sample<T>> samples = load_cached_samples<T>(utts, *idx, require_cache_dir(rc));
    return evaluate_model(model, samples);
}

template <typename T>
int run_eval(const RunConfig& rc, const std::filesystem::path& checkpoint,
             const std::optional<std::size_t>& fold, const std::string& split_name,
             const std::filesystem::path& out_dir) {
    std::vector<Utterance> utts = load_manifest(require_manifest(rc));
    std::filesystem::create_directories(out_dir);

    std::ostringstream metrics;
    metrics.precision(12);
    metrics << metrics_header(rc.model.num_classes) << "\n";

    if (fold) {
        ConfusionMatrix cm = eval_fold<T>(rc, utts, *fold, checkpoint, split_name);
        append_metrics_row(metrics, std::to_string(*fold), cm);
        write_text_file((out_dir / ("confusion_fold" + std::to_string(*fold) + ".csv")).string(),
                        confusion_csv(cm));
        write_text_file((out_dir / "metrics.csv").string(), metrics.str());
        std::cout << "fold " << *fold << " " << split_name << ": WA " << weighted_accuracy(cm)
                  << ", UA " << unweighted_accuracy(cm) << "\n";
        return 0;
    }

    // all folds: checkpoint is a directory of fold<k>.afcn files; reports both
    // the across-fold mean and the pooled-counts variant.
    std::size_t folds = num_folds(utts);
    ConfusionMatrix pooled(rc.model.num_classes);
    double wa_sum = 0.0, ua_sum = 0.0;
    for (std::size_t k = 0; k < folds; ++k) {
        std::filesystem::path ckpt = checkpoint / ("fold" + std::to_string(k) + ".afcn");
        ConfusionMatrix cm = eval_fold<T>(rc, utts, k, ckpt, split_name);
        append_metrics_row(metrics, std::to_string(k), cm);
        write_text_file((out_dir / ("confusion_fold" + std::to_string(k) + ".csv")).string(),
                        confusion_csv(cm));
        wa_sum += weighted_accuracy(cm);
        ua_sum += unweighted_accuracy(cm);
        pooled.merge(cm);
    }
    metrics << "mean," << wa_sum / static_cast<double>(folds) << ","
            << ua_sum / static_cast<double>(folds);
    for (std::size_t k = 0; k < rc.model.num_classes; ++k) metrics << ",";
    metrics << "\n";
    append_metrics_row(metrics, "pooled", pooled);
    write_text_file((out_dir / "confusion_pooled.csv").string(), confusion_csv(pooled));
    write_text_file((out_dir / "metrics.csv").string(), metrics.str());
    std::cout << "evaluated " << folds << " folds: mean WA " << wa_sum / folds << ", mean UA "
              << ua_sum / folds << ", pooled WA " << weighted_accuracy(pooled) << ", pooled UA "
              << unweighted_accuracy(pooled) << "\n";
    return 0;
}

} // namespace detail

inline int cmd_eval(const RunConfig& rc, const std::filesystem::path& checkpoint,
                    const std::optional<std::size_t>& fold, const std::string& split_name,
                    const std::filesystem::path& out_dir) {
    if (rc.precision == "double") {
        return detail::run_eval<double>(rc, checkpoint, fold, split_name, out_dir);
    }
    return detail::run_eval<float>(rc, checkpoint, fold, split_name, out_dir);
}

// ---- attend -------------------------------------------------------------------

namespace detail {

template <typename T>
int run_attend(const RunConfig& rc, const std::filesystem::path& checkpoint,
               const std::filesystem::path& wav, const std::string& out_prefix) {
    Model<T> model = load_checkpoint<T>(checkpoint, rc.model);
    Spectrogram sp = spectrogram(read_wav(wav.string()), rc.spect);
    Prediction<T> pred = predict(model, cast_tensor<T>(sp.grid));

    Tensor<double> grid = alpha_grid(cast_tensor<double>(pred.alpha), pred.grid_f, pred.grid_t);
    Tensor<double> up =
        upsample_alpha(grid, rf_geometry(rc.model), sp.bins(), sp.frames());

    write_alpha_csv(out_prefix + "_alpha.csv", grid);
    write_alpha_pgm(out_prefix + "_alpha.pgm", up);
    write_spectrogram_pgm(out_prefix + "_spec.pgm", sp.grid);

    std::size_t best = 0;
    for (std::size_t k = 1; k < pred.logits.size(); ++k) {
        if (pred.logits[k] > pred.logits[best]) best = k;
    }
    std::cout << "predicted class: " << detail::class_column_name(best, rc.model.num_classes)
              << "\n"
              << "alpha grid " << pred.grid_f << "x" << pred.grid_t << " -> " << out_prefix
              << "_alpha.csv, " << out_prefix << "_alpha.pgm, " << out_prefix << "_spec.pgm\n";
    return 0;
}

} // namespace detail

inline int cmd_attend(const RunConfig& rc, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& wav, const std::string& out_prefix) {
    if (rc.precision == "double") return detail::run_attend<double>(rc, checkpoint, wav, out_prefix);
    return detail::run_attend<float>(rc, checkpoint, wav, out_prefix);
}

// ---- gradcheck ------------------------------------------------------------------

inline int cmd_gradcheck(const std::string& corrupt = "", const std::string& only = "") {
    GradSuiteOptions opts;
    opts.corrupt = corrupt;
    opts.only = only;
    std::vector<GradCheckReport> reports = run_gradcheck_suite(opts);
    if (reports.empty()) {
        std::cout << "no checks matched\n";
        return 1;
    }
    bool all_ok = true;
    std::cout << "check, coords, max_rel_err, status\n";
    for (const auto& r : reports) {
        std::ostringstream row;
        row.precision(3);
        row << r.name << ", " << r.coords << ", " << std::scientific << r.max_rel_err << ", "
            << (r.ok ? "ok" : "FAIL");
        if (!r.ok) {
            row << " (coord " << r.worst_coord << ": analytic " << r.analytic_at_worst
                << " vs numeric " << r.numeric_at_worst << ")";
            all_ok = false;
        }
        std::cout << row.str() << "\n";
    }
    std::cout << (all_ok ? "gradcheck passed" : "gradcheck FAILED") << "\n";
    return all_ok ? 0 : 1;
}

} // namespace afcn
