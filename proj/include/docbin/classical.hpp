#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "docbin/image.hpp"

namespace docbin::classical {

/// Local threshold margin: a pixel is foreground only if it lies more than this below T,
/// so ties produced by floating-point mean/variance evaluation never flip pixels.
inline constexpr double kTieMargin = 1e-9;

struct LocalWindowParams {
    int window = 25;
    double k = 0.0;
    double r_dynamic = 0.5;

    static LocalWindowParams niblack_defaults() { return {25, -0.2, 0.5}; }
    static LocalWindowParams sauvola_defaults() { return {25, 0.5, 0.5}; }

    void validate() const {
        if (window < 3 || window % 2 == 0) throw ArgumentError("window must be odd and >= 3");
        if (!(r_dynamic > 0.0)) throw ArgumentError("Sauvola dynamic range must be positive");
    }
};

struct OtsuResult {
    double threshold = 0.0;
    BinaryMask mask;
};

/// Histogram bin of a [0,1] value on the 8-bit grid.
inline int otsu_bin(float v) {
    return static_cast<int>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

/// Global Otsu threshold over a 256-bin histogram.
/// Cut t puts bins [0, t) in the foreground class; the smallest maximizing t wins.
/// The returned threshold is (t - 0.5) / 255, so `v < threshold` selects exactly those bins.
inline OtsuResult otsu(const RasterImage& gray) {
    if (gray.channels() != 1) throw ArgumentError("otsu: expects a 1-channel image");
    std::array<std::uint64_t, 256> hist{};
    for (float v : gray.pixels()) ++hist[otsu_bin(v)];
    const double total = static_cast<double>(gray.size());

    int nonempty = 0;
    for (auto h : hist) nonempty += h > 0 ? 1 : 0;
    if (nonempty <= 1) {
        // Degenerate: nothing to separate.
        const double level = gray.empty() ? 0.0 : gray.pixels()[0];
        return {level, BinaryMask(gray.height(), gray.width(), false)};
    }

    double sum_all = 0.0;
    for (int b = 0; b < 256; ++b) sum_all += b * static_cast<double>(hist[b]);

    double best = -1.0;
    int best_cut = 0;
    double w0 = 0.0;
    double sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        if (t > 0) {
            w0 += static_cast<double>(hist[t - 1]);
            sum0 += (t - 1) * static_cast<double>(hist[t - 1]);
        }
        const double w1 = total - w0;
        double between = 0.0;
        if (w0 > 0 && w1 > 0) {
            const double m0 = sum0 / w0;
            const double m1 = (sum_all - sum0) / w1;
            between = (w0 / total) * (w1 / total) * (m0 - m1) * (m0 - m1);
        }
        if (between > best) {
            best = between;
            best_cut = t;
        }
    }

    std::vector<std::uint8_t> out(gray.size());
    const auto px = gray.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = otsu_bin(px[i]) < best_cut ? 1 : 0;
    return {(best_cut - 0.5) / 255.0, BinaryMask(gray.height(), gray.width(), std::move(out))};
}

namespace detail {

/// Windowed mean and standard deviation with edge replication, via summed-area tables.
struct LocalStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

inline LocalStats local_stats(const RasterImage& gray, int window) {
    const int h = gray.height();
    const int w = gray.width();
    const int r = window / 2;
    const int ph = h + 2 * r;
    const int pw = w + 2 * r;
    // (ph+1) x (pw+1) integral tables of the replicated image.
    std::vector<double> s1(static_cast<std::size_t>(ph + 1) * (pw + 1), 0.0);
    std::vector<double> s2(s1.size(), 0.0);
    auto idx = [pw](int y, int x) { return static_cast<std::size_t>(y) * (pw + 1) + x; };
    for (int y = 0; y < ph; ++y) {
        const int sy = std::clamp(y - r, 0, h - 1);
        double row1 = 0.0;
        double row2 = 0.0;
        for (int x = 0; x < pw; ++x) {
            const double v = gray.at(sy, std::clamp(x - r, 0, w - 1));
            row1 += v;
            row2 += v * v;
            s1[idx(y + 1, x + 1)] = s1[idx(y, x + 1)] + row1;
            s2[idx(y + 1, x + 1)] = s2[idx(y, x + 1)] + row2;
        }
    }
    const double n = static_cast<double>(window) * window;
    LocalStats out;
    out.mean.resize(static_cast<std::size_t>(h) * w);
    out.stddev.resize(out.mean.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Window centred at (y, x) spans padded rows y .. y + window - 1.
            const auto a = idx(y, x);
            const auto b = idx(y, x + window);
            const auto c = idx(y + window, x);
            const auto d = idx(y + window, x + window);
            const double sum = s1[d] - s1[b] - s1[c] + s1[a];
            const double sq = s2[d] - s2[b] - s2[c] + s2[a];
            const double mean = sum / n;
            const double var = std::max(0.0, sq / n - mean * mean);
            out.mean[static_cast<std::size_t>(y) * w + x] = mean;
            out.stddev[static_cast<std::size_t>(y) * w + x] = std::sqrt(var);
        }
    return out;
}

inline void check_local_input(const RasterImage& gray, const LocalWindowParams& p) {
    if (gray.channels() != 1) throw ArgumentError("local threshold: expects a 1-channel image");
    p.validate();
    if (p.window > gray.height() || p.window > gray.width()) {
        throw ArgumentError("local threshold: window " + std::to_string(p.window) + " larger than image");
    }
}

template <typename ThresholdFn>
BinaryMask apply_local(const RasterImage& gray, const LocalWindowParams& p, ThresholdFn threshold) {
    check_local_input(gray, p);
    const auto stats = local_stats(gray, p.window);
    std::vector<std::uint8_t> out(gray.size());
    const auto px = gray.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = threshold(stats.mean[i], stats.stddev[i]);
        out[i] = (t - px[i] > kTieMargin) ? 1 : 0;
    }
    return {gray.height(), gray.width(), std::move(out)};
}

}  // namespace detail

/// T = mean + k * stddev over the window.
inline BinaryMask niblack(const RasterImage& gray, const LocalWindowParams& p = LocalWindowParams::niblack_defaults()) {
    return detail::apply_local(gray, p, [k = p.k](double m, double s) { return m + k * s; });
}

/// T = mean * (1 + k * (stddev / R - 1)).
inline BinaryMask sauvola(const RasterImage& gray, const LocalWindowParams& p = LocalWindowParams::sauvola_defaults()) {
    return detail::apply_local(gray, p, [k = p.k, r = p.r_dynamic](double m, double s) {
        return m * (1.0 + k * (s / r - 1.0));
    });
}

}  // namespace docbin::classical
