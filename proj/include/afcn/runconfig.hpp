#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "afcn/data.hpp"
#include "afcn/dsp.hpp"
#include "afcn/error.hpp"
#include "afcn/model.hpp"

namespace afcn {

// Everything a run needs, parsed from a flat key=value file. Defaults are the
// full-scale stack with the standard 40ms/10ms front end.
struct RunConfig {
    SpectrogramConfig spect;
    ModelConfig model;

    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t accum_window = 16;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    double train_wa_target = 1.0; // stop rule when a fold has no validation split
    std::string precision = "float"; // float | double
    std::size_t freeze_through = 0;  // conv stages 1..k excluded from updates
    std::string import_path;         // optional pretrained encoder
    bool import_strict = false;
    std::uint64_t seed = 1;

    std::string manifest;
    std::string cache_dir;

    std::size_t synth_per_class = 50;
    std::size_t synth_sessions = 5;
    double synth_dur_min = 0.5;
    double synth_dur_max = 3.0;
    std::uint32_t synth_sample_rate = 16000;
};

namespace detail {

struct KeyParse {
    const std::string& key;
    const std::string& where;

    [[noreturn]] void bad(const std::string& what) const {
        throw ConfigError(where + ": " + what + " for key '" + key + "'");
    }

    double num(const std::string& v) const {
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) bad("trailing characters in '" + v + "'");
            return d;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad("cannot parse number '" + v + "'");
        }
    }
    std::size_t uint(const std::string& v) const {
        double d = num(v);
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
            bad("expected a non-negative integer, got '" + v + "'");
        }
        return static_cast<std::size_t>(d);
    }
    std::uint64_t u64(const std::string& v) const {
        try {
            std::size_t used = 0;
            std::uint64_t r = std::stoull(v, &used);
            if (used != v.size()) bad("trailing characters in '" + v + "'");
            return r;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad("cannot parse integer '" + v + "'");
        }
    }
    bool flag(const std::string& v) const {
        if (v == "0" || v == "false") return false;
        if (v == "1" || v == "true") return true;
        bad("expected 0/1, got '" + v + "'");
    }
    // "3" -> (3,3); "3x1" -> (3,1)
    std::pair<std::size_t, std::size_t> dims(const std::string& v) const {
        auto x = v.find('x');
        if (x == std::string::npos) {
            std::size_t k = uint(v);
            return {k, k};
        }
        return {uint(v.substr(0, x)), uint(v.substr(x + 1))};
    }
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string dims_str(std::size_t a, std::size_t b) {
    return a == b ? std::to_string(a) : std::to_string(a) + "x" + std::to_string(b);
}

// Stage index of the n-th pooled stage (pool1 = first stage that pools).
inline std::size_t pool_stage(const std::vector<EncoderStage>& stages, std::size_t pool_no,
                              const KeyParse& kp) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i].pool && ++seen == pool_no) return i;
    }
    kp.bad("stack has no pool" + std::to_string(pool_no));
}

} // namespace detail

// The text format addresses the default 5-conv/3-pool topology; stacks with a
// different layer count are a programmatic (ModelConfig) concern.
inline void apply_config_key(RunConfig& rc, const std::string& key, const std::string& value,
                             const std::string& where) {
    detail::KeyParse kp{key, where};
    auto& stages = rc.model.stages;

    if (key == "window_ms") rc.spect.window_ms = kp.num(value);
    else if (key == "shift_ms") rc.spect.shift_ms = kp.num(value);
    else if (key == "dft_len") rc.spect.dft_len = kp.uint(value);
    else if (key == "keep_bins") rc.spect.keep_bins = kp.uint(value);
    else if (key == "input_channels") rc.model.input_channels = kp.uint(value);
    else if (key == "num_classes") rc.model.num_classes = kp.uint(value);
    else if (key == "channel_scale") rc.model.channel_scale = kp.num(value);
    else if (key == "attention_dim") rc.model.attention_dim = kp.uint(value);
    else if (key == "lambda") rc.model.lambda = kp.num(value);
    else if (key == "log_offset") rc.model.log_offset = kp.num(value);
    else if (key == "lrn_size") rc.model.lrn.size = kp.uint(value);
    else if (key == "lrn_k") rc.model.lrn.k = kp.num(value);
    else if (key == "lrn_alpha") rc.model.lrn.alpha = kp.num(value);
    else if (key == "lrn_beta") rc.model.lrn.beta = kp.num(value);
    else if (key == "lr") rc.lr = kp.num(value);
    else if (key == "momentum") rc.momentum = kp.num(value);
    else if (key == "weight_decay") rc.weight_decay = kp.num(value);
    else if (key == "accum_window") rc.accum_window = kp.uint(value);
    else if (key == "max_epochs") rc.max_epochs = kp.uint(value);
    else if (key == "patience") rc.patience = kp.uint(value);
    else if (key == "train_wa_target") rc.train_wa_target = kp.num(value);
    else if (key == "precision") {
        if (value != "float" && value != "double") kp.bad("expected float|double, got '" + value + "'");
        rc.precision = value;
    } else if (key == "freeze_through") rc.freeze_through = kp.uint(value);
    else if (key == "import_encoder") rc.import_path = value;
    else if (key == "import_strict") rc.import_strict = kp.flag(value);
    else if (key == "seed") rc.seed = kp.u64(value);
    else if (key == "manifest") rc.manifest = value;
    else if (key == "cache_dir") rc.cache_dir = value;
    else if (key == "synth_per_class") rc.synth_per_class = kp.uint(value);
    else if (key == "synth_sessions") rc.synth_sessions = kp.uint(value);
    else if (key == "synth_dur_min") rc.synth_dur_min = kp.num(value);
    else if (key == "synth_dur_max") rc.synth_dur_max = kp.num(value);
    else if (key == "synth_sample_rate") rc.synth_sample_rate = static_cast<std::uint32_t>(kp.uint(value));
    else if (key.rfind("conv", 0) == 0 || key.rfind("pool", 0) == 0) {
        auto us = key.find('_');
        if (us == std::string::npos || us < 5) throw ConfigError(where + ": unknown key '" + key + "'");
        std::size_t idx = 0;
        try {
            idx = std::stoul(key.substr(4, us - 4));
        } catch (const std::exception&) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        std::string field = key.substr(us + 1);
        if (key[0] == 'c') {
            if (idx < 1 || idx > stages.size()) kp.bad("stack has no conv" + std::to_string(idx));
            ConvSpec& c = stages[idx - 1].conv;
            if (field == "channels") c.channels = kp.uint(value);
            else if (field == "kernel") std::tie(c.kh, c.kw) = kp.dims(value);
            else if (field == "stride") std::tie(c.sh, c.sw) = kp.dims(value);
            else if (field == "pad") std::tie(c.ph, c.pw) = kp.dims(value);
            else if (field == "lrn") c.lrn = kp.flag(value);
            else throw ConfigError(where + ": unknown key '" + key + "'");
        } else {
            PoolSpec& p = *stages[detail::pool_stage(stages, idx, kp)].pool;
            if (field == "kernel") std::tie(p.kh, p.kw) = kp.dims(value);
            else if (field == "stride") std::tie(p.sh, p.sw) = kp.dims(value);
            else throw ConfigError(where + ": unknown key '" + key + "'");
        }
    } else {
        throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig rc;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::string where = origin + ":" + std::to_string(lineno);
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        apply_config_key(rc, key, value, where);
    }
    return rc;
}

inline RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_run_config_text(os.str(), path.string());
}

// Full key set with resolved values, echoed into run logs so a run can be
// replayed from its log alone.
inline std::string resolved_config_text(const RunConfig& rc) {
    std::ostringstream os;
    os.precision(17);
    os << "window_ms = " << rc.spect.window_ms << "\n";
    os << "shift_ms = " << rc.spect.shift_ms << "\n";
    os << "dft_len = " << rc.spect.dft_len << "\n";
    os << "keep_bins = " << rc.spect.keep_bins << "\n";
    os << "input_channels = " << rc.model.input_channels << "\n";
    os << "num_classes = " << rc.model.num_classes << "\n";
    os << "channel_scale = " << rc.model.channel_scale << "\n";
    os << "attention_dim = " << rc.model.attention_dim << "\n";
    os << "lambda = " << rc.model.lambda << "\n";
    os << "log_offset = " << rc.model.log_offset << "\n";
    os << "lrn_size = " << rc.model.lrn.size << "\n";
    os << "lrn_k = " << rc.model.lrn.k << "\n";
    os << "lrn_alpha = " << rc.model.lrn.alpha << "\n";
    os << "lrn_beta = " << rc.model.lrn.beta << "\n";
    std::size_t pool_no = 0;
    for (std::size_t i = 0; i < rc.model.stages.size(); ++i) {
        const ConvSpec& c = rc.model.stages[i].conv;
        std::string tag = "conv" + std::to_string(i + 1) + "_";
        os << tag << "channels = " << c.channels << "\n";
        os << tag << "kernel = " << detail::dims_str(c.kh, c.kw) << "\n";
        os << tag << "stride = " << detail::dims_str(c.sh, c.sw) << "\n";
        os << tag << "pad = " << detail::dims_str(c.ph, c.pw) << "\n";
        os << tag << "lrn = " << (c.lrn ? 1 : 0) << "\n";
        if (rc.model.stages[i].pool) {
            const PoolSpec& p = *rc.model.stages[i].pool;
            std::string ptag = "pool" + std::to_string(++pool_no) + "_";
            os << ptag << "kernel = " << detail::dims_str(p.kh, p.kw) << "\n";
            os << ptag << "stride = " << detail::dims_str(p.sh, p.sw) << "\n";
        }
    }
    os << "lr = " << rc.lr << "\n";
    os << "momentum = " << rc.momentum << "\n";
    os << "weight_decay = " << rc.weight_decay << "\n";
    os << "accum_window = " << rc.accum_window << "\n";
    os << "max_epochs = " << rc.max_epochs << "\n";
    os << "patience = " << rc.patience << "\n";
    os << "train_wa_target = " << rc.train_wa_target << "\n";
    os << "precision = " << rc.precision << "\n";
    os << "freeze_through = " << rc.freeze_through << "\n";
    if (!rc.import_path.empty()) {
        os << "import_encoder = " << rc.import_path << "\n";
        os << "import_strict = " << (rc.import_strict ? 1 : 0) << "\n";
    }
    os << "seed = " << rc.seed << "\n";
    os << "manifest = " << rc.manifest << "\n";
    os << "cache_dir = " << rc.cache_dir << "\n";
    os << "synth_per_class = " << rc.synth_per_class << "\n";
    os << "synth_sessions = " << rc.synth_sessions << "\n";
    os << "synth_dur_min = " << rc.synth_dur_min << "\n";
    os << "synth_dur_max = " << rc.synth_dur_max << "\n";
    os << "synth_sample_rate = " << rc.synth_sample_rate << "\n";
    return os.str();
}

} // namespace afcn
