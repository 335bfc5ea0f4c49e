#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "afcn/error.hpp"
#include "afcn/io.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// PCM audio normalized to [-1, 1].
struct SampleBuffer {
    std::vector<double> samples;
    std::uint32_t sample_rate_hz = 0;
};

struct SpectrogramConfig {
    double window_ms = 40.0;
    double shift_ms = 10.0;
    std::size_t dft_len = 800;
    std::size_t keep_bins = 200;

    std::size_t window_samples(std::uint32_t rate_hz) const {
        return static_cast<std::size_t>(std::llround(window_ms * rate_hz / 1000.0));
    }
    std::size_t shift_samples(std::uint32_t rate_hz) const {
        return static_cast<std::size_t>(std::llround(shift_ms * rate_hz / 1000.0));
    }

    void validate(std::uint32_t rate_hz) const {
        if (keep_bins > dft_len / 2 + 1) {
            throw ArgumentError("keep_bins " + std::to_string(keep_bins) + " exceeds dft_len/2+1 = " +
                                std::to_string(dft_len / 2 + 1));
        }
        if (window_samples(rate_hz) > dft_len) {
            throw ArgumentError("window of " + std::to_string(window_samples(rate_hz)) +
                                " samples exceeds dft_len " + std::to_string(dft_len));
        }
        if (window_samples(rate_hz) < 2 || shift_samples(rate_hz) < 1) {
            throw ArgumentError("window/shift too small at rate " + std::to_string(rate_hz));
        }
    }
};

// Frequency x time magnitude grid: grid[f][t], magnitudes >= 0.
struct Spectrogram {
    Tensor<double> grid;
    SpectrogramConfig config;
    std::uint32_t sample_rate_hz = 0;

    std::size_t bins() const { return grid.extent(0); }
    std::size_t frames() const { return grid.extent(1); }
};

// ---- WAV --------------------------------------------------------------------

// RIFF/WAVE, PCM 16-bit little-endian, mono. Samples normalized by 1/32768.
inline SampleBuffer read_wav(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r(bytes, path);
    if (r.str(4) != "RIFF") r.fail("bad RIFF magic");
    r.u32(); // declared size, unused
    if (r.str(4) != "WAVE") r.fail("bad WAVE magic");

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    while (r.remaining() >= 8) {
        std::string chunk = r.str(4);
        std::uint32_t chunk_size = r.u32();
        if (chunk == "fmt ") {
            if (chunk_size < 16) r.fail("fmt chunk too small");
            std::uint16_t format = r.u16();
            channels = r.u16();
            rate = r.u32();
            r.u32(); // byte rate
            r.u16(); // block align
            bits = r.u16();
            r.skip(chunk_size - 16);
            if (format != 1) r.fail("format=" + std::to_string(format) + " unsupported (PCM only)");
            if (channels != 1) r.fail("channels=" + std::to_string(channels) + " unsupported");
            if (bits != 16) r.fail("bits=" + std::to_string(bits) + " unsupported");
            have_fmt = true;
        } else if (chunk == "data") {
            if (!have_fmt) r.fail("data chunk before fmt chunk");
            if (chunk_size % 2 != 0) r.fail("odd data chunk size for 16-bit PCM");
            std::size_t n = chunk_size / 2;
            SampleBuffer buf;
            buf.sample_rate_hz = rate;
            buf.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                buf.samples[i] = static_cast<double>(r.i16()) / 32768.0;
            }
            return buf;
        } else {
            // unknown chunk, skip (chunks are word-aligned)
            r.skip(chunk_size + (chunk_size % 2));
        }
    }
    r.fail("missing data chunk");
}

struct WavInfo {
    std::size_t sample_count = 0;
    std::uint32_t sample_rate_hz = 0;
};

// Header walk only; used to predict cache sizes without decoding samples.
inline WavInfo read_wav_info(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r(bytes, path);
    if (r.str(4) != "RIFF") r.fail("bad RIFF magic");
    r.u32();
    if (r.str(4) != "WAVE") r.fail("bad WAVE magic");
    std::uint32_t rate = 0;
    bool have_fmt = false;
    while (r.remaining() >= 8) {
        std::string chunk = r.str(4);
        std::uint32_t chunk_size = r.u32();
        if (chunk == "fmt ") {
            if (chunk_size < 16) r.fail("fmt chunk too small");
            r.u16();
            r.u16();
            rate = r.u32();
            r.skip(chunk_size - 8);
            have_fmt = true;
        } else if (chunk == "data") {
            if (!have_fmt) r.fail("data chunk before fmt chunk");
            return WavInfo{chunk_size / 2, rate};
        } else {
            r.skip(chunk_size + (chunk_size % 2));
        }
    }
    r.fail("missing data chunk");
    return {};
}

inline void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                            std::uint32_t rate_hz) {
    ByteWriter w;
    std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    w.str("RIFF");
    w.u32(36 + data_bytes);
    w.str("WAVE");
    w.str("fmt ");
    w.u32(16);
    w.u16(1); // PCM
    w.u16(1); // mono
    w.u32(rate_hz);
    w.u32(rate_hz * 2); // byte rate
    w.u16(2);           // block align
    w.u16(16);          // bits
    w.str("data");
    w.u32(data_bytes);
    for (double s : samples) {
        double clipped = std::min(1.0, std::max(-1.0, s));
        w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::llround(clipped * 32767.0))));
    }
    write_file(path, w.bytes());
}

inline void write_wav_pcm16(const std::string& path, const SampleBuffer& buf) {
    write_wav_pcm16(path, buf.samples, buf.sample_rate_hz);
}

// ---- framing and transform ----------------------------------------------------

// Symmetric Hamming: w[k] = 0.54 - 0.46 cos(2 pi k / (n-1)).
inline std::vector<double> hamming_window(std::size_t n) {
    if (n < 2) throw ArgumentError("hamming window needs n >= 2, got " + std::to_string(n));
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                      static_cast<double>(n - 1));
    }
    return w;
}

inline std::size_t num_frames_for(std::size_t n_samples, std::size_t window, std::size_t shift) {
    if (n_samples < window) {
        throw TooShortError("signal of " + std::to_string(n_samples) +
                            " samples is shorter than one window of " + std::to_string(window));
    }
    return (n_samples - window) / shift + 1;
}

// Frame i covers samples [i*shift, i*shift + window); the Hamming window is
// applied pointwise; a trailing partial frame is discarded.
inline std::vector<std::vector<double>> frame_signal(const SampleBuffer& buf,
                                                     const SpectrogramConfig& cfg) {
    cfg.validate(buf.sample_rate_hz);
    std::size_t window = cfg.window_samples(buf.sample_rate_hz);
    std::size_t shift = cfg.shift_samples(buf.sample_rate_hz);
    std::size_t frames = num_frames_for(buf.samples.size(), window, shift);
    auto w = hamming_window(window);
    std::vector<std::vector<double>> out(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        out[i].resize(window);
        const double* src = buf.samples.data() + i * shift;
        for (std::size_t k = 0; k < window; ++k) out[i][k] = src[k] * w[k];
    }
    return out;
}

// Direct O(N^2) DFT with precomputed twiddles. dft_len 800 is not a
// power of two; at desk scale the direct transform is fast enough.
class DftTable {
public:
    explicit DftTable(std::size_t n) : n_(n), cos_(n), sin_(n) {
        for (std::size_t m = 0; m < n; ++m) {
            double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
            cos_[m] = std::cos(angle);
            sin_[m] = std::sin(angle);
        }
    }

    std::size_t length() const { return n_; }

    // |X_k| for k = 0..n/2 of the zero-padded frame.
    std::vector<double> magnitude(const std::vector<double>& frame) const {
        if (frame.size() > n_) {
            throw ArgumentError("frame of " + std::to_string(frame.size()) +
                                " samples exceeds dft_len " + std::to_string(n_));
        }
        std::size_t bins = n_ / 2 + 1;
        std::vector<double> mag(bins);
        for (std::size_t k = 0; k < bins; ++k) {
            double re = 0.0, im = 0.0;
            std::size_t idx = 0; // (k*j) mod n, maintained incrementally
            for (std::size_t j = 0; j < frame.size(); ++j) {
                re += frame[j] * cos_[idx];
                im -= frame[j] * sin_[idx];
                idx += k;
                if (idx >= n_) idx -= n_;
            }
            mag[k] = std::sqrt(re * re + im * im);
        }
        return mag;
    }

private:
    std::size_t n_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

inline std::vector<double> dft_magnitude(const std::vector<double>& frame, std::size_t dft_len) {
    return DftTable(dft_len).magnitude(frame);
}

inline Spectrogram spectrogram(const SampleBuffer& buf, const SpectrogramConfig& cfg) {
    auto frames = frame_signal(buf, cfg);
    DftTable dft(cfg.dft_len);
    Tensor<double> grid({cfg.keep_bins, frames.size()});
    for (std::size_t t = 0; t < frames.size(); ++t) {
        auto mag = dft.magnitude(frames[t]);
        for (std::size_t f = 0; f < cfg.keep_bins; ++f) grid.at(f, t) = mag[f];
    }
    return Spectrogram{std::move(grid), cfg, buf.sample_rate_hz};
}

// ---- SPG1 cache ----------------------------------------------------------------
// magic "SPG1", u32 keep_bins, u32 num_frames, u32 sample_rate, then
// keep_bins*num_frames float32 little-endian, time-major (frame 0's bins first).

inline void write_spectrogram_cache(const std::string& path, const Spectrogram& spec) {
    ByteWriter w;
    w.str("SPG1");
    w.u32(static_cast<std::uint32_t>(spec.bins()));
    w.u32(static_cast<std::uint32_t>(spec.frames()));
    w.u32(spec.sample_rate_hz);
    for (std::size_t t = 0; t < spec.frames(); ++t) {
        for (std::size_t f = 0; f < spec.bins(); ++f) {
            w.f32(static_cast<float>(spec.grid.at(f, t)));
        }
    }
    write_file(path, w.bytes());
}

inline std::size_t spectrogram_cache_size(std::size_t keep_bins, std::size_t num_frames) {
    return 16 + 4 * keep_bins * num_frames;
}

inline Spectrogram read_spectrogram_cache(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r(bytes, path);
    if (r.str(4) != "SPG1") r.fail("bad magic (expected SPG1)");
    std::size_t bins = r.u32();
    std::size_t frames = r.u32();
    std::uint32_t rate = r.u32();
    if (bins == 0 || frames == 0) r.fail("empty grid");
    Tensor<double> grid({bins, frames});
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t f = 0; f < bins; ++f) {
            grid.at(f, t) = static_cast<double>(r.f32());
        }
    }
    Spectrogram spec;
    spec.grid = std::move(grid);
    spec.config.keep_bins = bins;
    spec.sample_rate_hz = rate;
    return spec;
}

} // namespace afcn
