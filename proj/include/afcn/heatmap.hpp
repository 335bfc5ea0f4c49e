#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "afcn/error.hpp"
#include "afcn/io.hpp"
#include "afcn/model.hpp"
#include "afcn/tensor.hpp"

namespace afcn {

// Receptive-field center geometry of the encoder output grid: cell i sits over
// input pixel offset + i * jump along each axis.
struct AxisGeometry {
    double offset = 0.0;
    double jump = 1.0;
};

struct RfGeometry {
    AxisGeometry freq;
    AxisGeometry time;
};

namespace detail {

inline void compose_layer(AxisGeometry& g, std::size_t kernel, std::size_t stride,
                          std::size_t pad) {
    g.offset += (static_cast<double>(kernel - 1) / 2.0 - static_cast<double>(pad)) * g.jump;
    g.jump *= static_cast<double>(stride);
}

} // namespace detail

inline RfGeometry rf_geometry(const ModelConfig& cfg) {
    RfGeometry g;
    for (const auto& st : resolved_stages(cfg)) {
        detail::compose_layer(g.freq, st.conv.kh, st.conv.sh, st.conv.ph);
        detail::compose_layer(g.time, st.conv.kw, st.conv.sw, st.conv.pw);
        if (st.pool) {
            detail::compose_layer(g.freq, st.pool->kh, st.pool->sh, 0);
            detail::compose_layer(g.time, st.pool->kw, st.pool->sw, 0);
        }
    }
    return g;
}

// [L] attention weights back to their [F',T'] grid arrangement.
inline Tensor<double> alpha_grid(const Tensor<double>& alpha, std::size_t grid_f,
                                 std::size_t grid_t) {
    if (alpha.size() != grid_f * grid_t) {
        throw ShapeError("alpha length " + std::to_string(alpha.size()) + " != " +
                         std::to_string(grid_f) + "x" + std::to_string(grid_t));
    }
    return reshape(alpha, {grid_f, grid_t});
}

// Nearest-receptive-field-center upsampling: every spectrogram pixel takes the
// weight of the grid cell whose center is closest. Deliberately blocky — the
// attention grid is coarse and smoothing would fabricate resolution.
inline Tensor<double> upsample_alpha(const Tensor<double>& grid, const RfGeometry& geom,
                                     std::size_t out_h, std::size_t out_w) {
    if (grid.rank() != 2) throw ShapeError("upsample_alpha expects an [F',T'] grid");
    std::size_t gf = grid.extent(0), gt = grid.extent(1);
    Tensor<double> out({out_h, out_w});
    auto nearest = [](double pixel, const AxisGeometry& ax, std::size_t cells) {
        double idx = (pixel - ax.offset) / ax.jump;
        long long r = std::llround(idx);
        return static_cast<std::size_t>(std::clamp<long long>(r, 0, static_cast<long long>(cells) - 1));
    };
    for (std::size_t y = 0; y < out_h; ++y) {
        std::size_t fy = nearest(static_cast<double>(y), geom.freq, gf);
        for (std::size_t x = 0; x < out_w; ++x) {
            std::size_t tx = nearest(static_cast<double>(x), geom.time, gt);
            out.at(y, x) = grid.at(fy, tx);
        }
    }
    return out;
}

inline void write_alpha_csv(const std::filesystem::path& path, const Tensor<double>& grid) {
    if (grid.rank() != 2) throw ShapeError("write_alpha_csv expects an [F',T'] grid");
    std::ostringstream os;
    os.precision(12);
    for (std::size_t f = 0; f < grid.extent(0); ++f) {
        for (std::size_t t = 0; t < grid.extent(1); ++t) {
            if (t) os << ",";
            os << grid.at(f, t);
        }
        os << "\n";
    }
    write_text_file(path, os.str());
}

// Grayscale rendering with the maximum weight mapped to white.
inline void write_alpha_pgm(const std::filesystem::path& path, const Tensor<double>& up) {
    double peak = 0.0;
    for (double v : up) peak = std::max(peak, v);
    std::vector<std::uint8_t> img(up.size(), 0);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < up.size(); ++i) {
            img[i] = static_cast<std::uint8_t>(std::llround(255.0 * up[i] / peak));
        }
    }
    write_pgm(path.string(), up.extent(0), up.extent(1), img);
}

// log scaling for visibility only; the stored caches stay linear.
inline void write_spectrogram_pgm(const std::filesystem::path& path, const Tensor<double>& grid) {
    std::vector<double> logged(grid.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        logged[i] = std::log1p(grid[i]);
        peak = std::max(peak, logged[i]);
    }
    std::vector<std::uint8_t> img(grid.size(), 0);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            img[i] = static_cast<std::uint8_t>(std::llround(255.0 * logged[i] / peak));
        }
    }
    write_pgm(path.string(), grid.extent(0), grid.extent(1), img);
}

} // namespace afcn
