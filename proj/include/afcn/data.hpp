#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "afcn/dsp.hpp"
#include "afcn/error.hpp"
#include "afcn/io.hpp"
#include "afcn/random.hpp"

namespace afcn {

inline constexpr std::array<const char*, 4> kClassNames = {"neutral", "happy", "sad", "angry"};

inline std::size_t label_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (name == kClassNames[i]) return i;
    }
    throw ManifestError("unknown label '" + name + "'");
}

struct Utterance {
    std::string id;
    std::filesystem::path path; // absolute or resolved against the manifest directory
    std::size_t label = 0;
    std::string session;
    std::string speaker;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string zero_pad(std::size_t n, int width) {
    std::ostringstream os;
    os.width(width);
    os.fill('0');
    os << n;
    return os.str();
}

} // namespace detail

inline constexpr const char* kManifestHeader = "id,path,label,session,speaker";

inline std::vector<Utterance> load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ManifestError("cannot open manifest " + manifest_path.string());
    std::filesystem::path base = manifest_path.parent_path();

    std::string line;
    if (!std::getline(in, line)) throw ManifestError(manifest_path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw ManifestError(manifest_path.string() + ":1: header must be '" +
                            std::string(kManifestHeader) + "', got '" + line + "'");
    }

    std::vector<Utterance> utts;
    std::set<std::string> ids;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv(line);
        std::string where = manifest_path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 5) {
            throw ManifestError(where + ": expected 5 fields, got " +
                                std::to_string(fields.size()));
        }
        for (std::size_t i = 0; i < 5; ++i) {
            if (fields[i].empty()) {
                throw ManifestError(where + ": empty field " + std::to_string(i + 1));
            }
        }
        Utterance u;
        u.id = fields[0];
        std::filesystem::path p(fields[1]);
        u.path = p.is_absolute() ? p : base / p;
        try {
            u.label = label_from_name(fields[2]);
        } catch (const ManifestError& e) {
            throw ManifestError(where + ": " + e.what());
        }
        u.session = fields[3];
        u.speaker = fields[4];
        if (!ids.insert(u.id).second) throw ManifestError(where + ": duplicate id '" + u.id + "'");
        utts.push_back(std::move(u));
    }
    if (utts.empty()) throw ManifestError(manifest_path.string() + ": no utterances");
    return utts;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utts) {
    std::ostringstream os;
    os << kManifestHeader << "\n";
    for (const auto& u : utts) {
        os << u.id << "," << u.path.generic_string() << "," << kClassNames[u.label] << ","
           << u.session << "," << u.speaker << "\n";
    }
    write_text_file(path, os.str());
}

// ---- speaker-disjoint session folds ----------------------------------------------

struct FoldSplit {
    std::size_t fold = 0;
    std::string held_session;
    std::string val_speaker;
    std::vector<std::size_t> train; // indices into the source utterance list
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Fold k holds out the k-th session (sessions sorted lexicographically); within
// the held-out session the lexicographically first speaker becomes validation
// and the remaining speakers become test. Everything else trains.
inline FoldSplit split_fold(const std::vector<Utterance>& utts, std::size_t fold) {
    std::set<std::string> session_set;
    std::map<std::string, std::set<std::string>> speaker_sessions;
    for (const auto& u : utts) {
        session_set.insert(u.session);
        speaker_sessions[u.speaker].insert(u.session);
    }
    for (const auto& [spk, sessions] : speaker_sessions) {
        if (sessions.size() > 1) {
            throw SplitError("speaker '" + spk + "' appears in " +
                             std::to_string(sessions.size()) +
                             " sessions; session folds would leak speakers");
        }
    }
    std::vector<std::string> sessions(session_set.begin(), session_set.end());
    if (fold >= sessions.size()) {
        throw SplitError("fold " + std::to_string(fold) + " out of range for " +
                         std::to_string(sessions.size()) + " sessions");
    }
    FoldSplit s;
    s.fold = fold;
    s.held_session = sessions[fold];

    std::set<std::string> held_speakers;
    for (const auto& u : utts) {
        if (u.session == s.held_session) held_speakers.insert(u.speaker);
    }
    if (held_speakers.size() < 2) {
        throw SplitError("session '" + s.held_session +
                         "' has fewer than two speakers; cannot carve out a validation split");
    }
    s.val_speaker = *held_speakers.begin();

    for (std::size_t i = 0; i < utts.size(); ++i) {
        const auto& u = utts[i];
        if (u.session != s.held_session) {
            s.train.push_back(i);
        } else if (u.speaker == s.val_speaker) {
            s.val.push_back(i);
        } else {
            s.test.push_back(i);
        }
    }
    return s;
}

inline std::size_t num_folds(const std::vector<Utterance>& utts) {
    std::set<std::string> sessions;
    for (const auto& u : utts) sessions.insert(u.session);
    return sessions.size();
}

// Full cross-validation plan; enforces the expected corpus structure of
// num_folds sessions with two speakers each.
inline std::vector<FoldSplit> split_folds(const std::vector<Utterance>& utts,
                                          std::size_t folds = 5) {
    std::map<std::string, std::set<std::string>> session_speakers;
    for (const auto& u : utts) session_speakers[u.session].insert(u.speaker);
    if (session_speakers.size() != folds) {
        throw SplitError("expected " + std::to_string(folds) + " sessions, found " +
                         std::to_string(session_speakers.size()));
    }
    for (const auto& [sess, speakers] : session_speakers) {
        if (speakers.size() != 2) {
            throw SplitError("session '" + sess + "' has " + std::to_string(speakers.size()) +
                             " speakers, expected 2");
        }
    }
    std::vector<FoldSplit> plan;
    plan.reserve(folds);
    for (std::size_t k = 0; k < folds; ++k) plan.push_back(split_fold(utts, k));
    return plan;
}

// ---- synthetic corpus -------------------------------------------------------------

struct SynthConfig {
    std::size_t per_class = 50; // utterances per class, spread over sessions/speakers
    std::size_t num_sessions = 5;
    std::uint32_t sample_rate_hz = 16000;
    double dur_min_s = 0.5;
    double dur_max_s = 3.0;
    std::uint64_t seed = 1;
};

struct SynthUtterance {
    SampleBuffer audio;
    std::size_t voiced_start = 0; // first nonzero sample
    std::size_t voiced_end = 0;   // one past the last nonzero sample
};

// One class = band-limited noise (a sum of random-phase sinusoids confined to a
// class-specific frequency band) with a class-specific amplitude-modulation
// rate, padded by exact-zero silence on both ends.
inline SynthUtterance make_synthetic_utterance(std::size_t label, std::size_t total_samples,
                                               std::uint32_t sample_rate_hz, Rng& rng) {
    if (label >= kClassNames.size()) throw ArgumentError("synthetic label out of range");
    static constexpr double kBandLow[4] = {150.0, 1150.0, 2150.0, 3150.0};
    static constexpr double kBandHigh[4] = {950.0, 1950.0, 2950.0, 3950.0};
    static constexpr double kAmRate[4] = {2.0, 5.0, 8.0, 11.0};

    SynthUtterance out;
    out.audio.sample_rate_hz = sample_rate_hz;
    out.audio.samples.assign(total_samples, 0.0);

    double lead_frac = rng.uniform(0.10, 0.20);
    double trail_frac = rng.uniform(0.10, 0.20);
    out.voiced_start = static_cast<std::size_t>(std::llround(lead_frac * total_samples));
    out.voiced_end =
        total_samples - static_cast<std::size_t>(std::llround(trail_frac * total_samples));

    double jitter = rng.uniform(-50.0, 50.0);
    double lo = kBandLow[label] + jitter, hi = kBandHigh[label] + jitter;
    constexpr std::size_t kTones = 48;
    std::vector<double> freq(kTones), phase(kTones);
    for (std::size_t t = 0; t < kTones; ++t) {
        freq[t] = rng.uniform(lo, hi);
        phase[t] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    double am_rate = kAmRate[label] * rng.uniform(0.9, 1.1);
    double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    double peak = 0.0;
    double dt = 1.0 / sample_rate_hz;
    for (std::size_t n = out.voiced_start; n < out.voiced_end; ++n) {
        double tsec = static_cast<double>(n) * dt;
        double v = 0.0;
        for (std::size_t t = 0; t < kTones; ++t) {
            v += std::sin(2.0 * std::numbers::pi * freq[t] * tsec + phase[t]);
        }
        v *= 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * am_rate * tsec + am_phase);
        out.audio.samples[n] = v;
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0.0) {
        double gain = 0.7 / peak;
        for (std::size_t n = out.voiced_start; n < out.voiced_end; ++n) {
            out.audio.samples[n] *= gain;
        }
    }
    return out;
}

struct SynthCorpus {
    std::filesystem::path manifest_path;
    std::filesystem::path meta_path;
    std::size_t num_utterances = 0;
};

inline constexpr const char* kMetaHeader = "id,voiced_start,voiced_end";

// Writes wav/<id>.wav files plus manifest.csv and meta.csv (voiced span in
// samples) under out_dir. Fully determined by cfg.seed.
inline SynthCorpus synth_corpus(const std::filesystem::path& out_dir, const SynthConfig& cfg) {
    if (cfg.num_sessions == 0 || cfg.per_class == 0) {
        throw ArgumentError("synthetic corpus needs at least one session and one utterance");
    }
    if (!(cfg.dur_min_s > 0.0) || cfg.dur_max_s < cfg.dur_min_s) {
        throw ArgumentError("invalid synthetic duration range");
    }
    std::filesystem::create_directories(out_dir / "wav");

    std::vector<Utterance> manifest;
    std::ostringstream meta;
    meta << kMetaHeader << "\n";

    std::size_t index = 0;
    for (std::size_t label = 0; label < kClassNames.size(); ++label) {
        for (std::size_t j = 0; j < cfg.per_class; ++j, ++index) {
            std::size_t session = j % cfg.num_sessions;
            std::size_t spk_in_session = (j / cfg.num_sessions) % 2;
            Rng rng(mix_seed(cfg.seed, index));

            double dur = rng.uniform(cfg.dur_min_s, cfg.dur_max_s);
            auto total =
                static_cast<std::size_t>(std::llround(dur * cfg.sample_rate_hz));
            SynthUtterance su = make_synthetic_utterance(label, total, cfg.sample_rate_hz, rng);

            Utterance u;
            u.id = "u" + detail::zero_pad(index, 4) + "_" + kClassNames[label];
            u.session = "s" + std::to_string(session + 1);
            u.speaker = "p" + detail::zero_pad(session * 2 + spk_in_session + 1, 2);
            u.label = label;
            std::filesystem::path rel = std::filesystem::path("wav") / (u.id + ".wav");
            write_wav_pcm16(out_dir / rel, su.audio);
            u.path = rel; // manifest-relative
            manifest.push_back(u);
            meta << u.id << "," << su.voiced_start << "," << su.voiced_end << "\n";
        }
    }

    SynthCorpus result;
    result.manifest_path = out_dir / "manifest.csv";
    result.meta_path = out_dir / "meta.csv";
    result.num_utterances = manifest.size();
    write_manifest(result.manifest_path, manifest);
    write_text_file(result.meta_path, meta.str());
    return result;
}

struct VoicedSpan {
    std::size_t start = 0;
    std::size_t end = 0;
};

inline std::map<std::string, VoicedSpan> load_meta(const std::filesystem::path& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw ManifestError("cannot open meta file " + meta_path.string());
    std::string line;
    if (!std::getline(in, line)) throw ManifestError(meta_path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetaHeader) {
        throw ManifestError(meta_path.string() + ":1: header must be '" +
                            std::string(kMetaHeader) + "'");
    }
    std::map<std::string, VoicedSpan> meta;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv(line);
        std::string where = meta_path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 3) throw ManifestError(where + ": expected 3 fields");
        try {
            meta[fields[0]] = VoicedSpan{std::stoul(fields[1]), std::stoul(fields[2])};
        } catch (const std::exception&) {
            throw ManifestError(where + ": bad voiced span");
        }
    }
    return meta;
}

} // namespace afcn
