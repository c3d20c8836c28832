#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "docbin/errors.hpp"

namespace docbin {

/// H x W x C image, row-major interleaved, every value finite and in [0, 1].
class RasterImage {
public:
    RasterImage() = default;

    RasterImage(int height, int width, int channels, float fill = 0.0f)
        : RasterImage(height, width, channels,
                      std::vector<float>(static_cast<std::size_t>(height) * width * channels, fill)) {}

    RasterImage(int height, int width, int channels, std::vector<float> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        if (height < 0 || width < 0) throw ArgumentError("RasterImage: negative dimension");
        if (channels != 1 && channels != 3) {
            throw ArgumentError("RasterImage: channels must be 1 or 3, got " + std::to_string(channels));
        }
        if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
            throw ArgumentError("RasterImage: data size does not match " + std::to_string(height) + "x" +
                                std::to_string(width) + "x" + std::to_string(channels));
        }
        for (float v : data_) {
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
                throw ArgumentError("RasterImage: value outside [0,1] or non-finite");
            }
        }
    }

    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }
    [[nodiscard]] std::span<const float> pixels() const& { return data_; }
    std::span<const float> pixels() const&& = delete;

    [[nodiscard]] float at(int y, int x, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 1;
    std::vector<float> data_;
};

/// H x W foreground map; true (1) marks ink.
class BinaryMask {
public:
    BinaryMask() = default;

    BinaryMask(int height, int width, bool fill = false)
        : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {
        if (height < 0 || width < 0) throw ArgumentError("BinaryMask: negative dimension");
    }

    BinaryMask(int height, int width, std::vector<std::uint8_t> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (height < 0 || width < 0) throw ArgumentError("BinaryMask: negative dimension");
        if (data_.size() != static_cast<std::size_t>(height) * width) {
            throw ArgumentError("BinaryMask: data size does not match dimensions");
        }
        for (auto& v : data_) v = v ? 1 : 0;
    }

    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::span<const std::uint8_t> pixels() const& { return data_; }
    std::span<const std::uint8_t> pixels() const&& = delete;

    [[nodiscard]] bool at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }

    /// Out-of-range coordinates read as background.
    [[nodiscard]] bool at_or_background(int y, int x) const {
        return y >= 0 && y < height_ && x >= 0 && x < width_ && at(y, x);
    }

    [[nodiscard]] std::size_t count() const {
        return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

inline bool same_size(const BinaryMask& a, const BinaryMask& b) {
    return a.height() == b.height() && a.width() == b.width();
}

inline bool same_size(const RasterImage& a, const BinaryMask& b) {
    return a.height() == b.height() && a.width() == b.width();
}

/// BT.601 luma; single-channel input passes through.
inline RasterImage to_grayscale(const RasterImage& img) {
    if (img.channels() == 1) return img;
    std::vector<float> out(static_cast<std::size_t>(img.height()) * img.width());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
        out[i] = static_cast<float>(std::clamp(y, 0.0, 1.0));
    }
    return {img.height(), img.width(), 1, std::move(out)};
}

/// Renders a mask as a 1-channel image: foreground 0.0, background 1.0.
inline RasterImage mask_to_image(const BinaryMask& mask) {
    std::vector<float> out(mask.size());
    const auto px = mask.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] ? 0.0f : 1.0f;
    return {mask.height(), mask.width(), 1, std::move(out)};
}

/// A pixel is foreground iff its value is strictly below thr.
inline BinaryMask image_to_mask(const RasterImage& img, float thr) {
    if (!(thr > 0.0f && thr < 1.0f)) throw ArgumentError("image_to_mask: threshold must lie in (0,1)");
    if (img.channels() != 1) throw ArgumentError("image_to_mask: expects a 1-channel image");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.height()) * img.width());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] < thr ? 1 : 0;
    return {img.height(), img.width(), std::move(out)};
}

/// Replicates a 1-channel image into 3 channels.
inline RasterImage to_rgb(const RasterImage& img) {
    if (img.channels() == 3) return img;
    std::vector<float> out(img.size() * 3);
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = px[i];
    return {img.height(), img.width(), 3, std::move(out)};
}

// ------------------------------------------------------------ geometry

/// Reflect index into [0, n) without repeating the edge sample (…2 1 0 1 2…).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline RasterImage crop(const RasterImage& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > img.height() || x0 + w > img.width()) {
        throw ArgumentError("crop: window outside image");
    }
    const int c = img.channels();
    std::vector<float> out(static_cast<std::size_t>(h) * w * c);
    const auto px = img.pixels();
    for (int y = 0; y < h; ++y) {
        const auto* src = px.data() + (static_cast<std::size_t>(y0 + y) * img.width() + x0) * c;
        std::copy_n(src, static_cast<std::size_t>(w) * c, out.data() + static_cast<std::size_t>(y) * w * c);
    }
    return {h, w, c, std::move(out)};
}

inline BinaryMask crop(const BinaryMask& m, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > m.height() || x0 + w > m.width()) {
        throw ArgumentError("crop: window outside mask");
    }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w);
    const auto px = m.pixels();
    for (int y = 0; y < h; ++y) {
        std::copy_n(px.data() + static_cast<std::size_t>(y0 + y) * m.width() + x0, w,
                    out.data() + static_cast<std::size_t>(y) * w);
    }
    return {h, w, std::move(out)};
}

/// Grows the image to at least min_h x min_w by mirror reflection at the bottom/right edges.
inline RasterImage reflect_pad(const RasterImage& img, int min_h, int min_w) {
    const int h = std::max(img.height(), min_h);
    const int w = std::max(img.width(), min_w);
    if (h == img.height() && w == img.width()) return img;
    const int c = img.channels();
    std::vector<float> out(static_cast<std::size_t>(h) * w * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = reflect_index(y, img.height());
            const int sx = reflect_index(x, img.width());
            for (int k = 0; k < c; ++k) out[(static_cast<std::size_t>(y) * w + x) * c + k] = img.at(sy, sx, k);
        }
    return {h, w, c, std::move(out)};
}

inline BinaryMask reflect_pad(const BinaryMask& m, int min_h, int min_w) {
    const int h = std::max(m.height(), min_h);
    const int w = std::max(m.width(), min_w);
    if (h == m.height() && w == m.width()) return m;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out[static_cast<std::size_t>(y) * w + x] = m.at(reflect_index(y, m.height()), reflect_index(x, m.width()));
        }
    return {h, w, std::move(out)};
}

/// Bilinear resampling with pixel-center alignment.
inline RasterImage resize_bilinear(const RasterImage& img, int h, int w) {
    if (h == img.height() && w == img.width()) return img;
    const int c = img.channels();
    std::vector<float> out(static_cast<std::size_t>(h) * w * c);
    const double sy = static_cast<double>(img.height()) / h;
    const double sx = static_cast<double>(img.width()) / w;
    for (int y = 0; y < h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ay = fy - y0;
        for (int x = 0; x < w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double ax = fx - x0;
            for (int k = 0; k < c; ++k) {
                const double top = img.at(y0, x0, k) * (1 - ax) + img.at(y0, x1, k) * ax;
                const double bot = img.at(y1, x0, k) * (1 - ax) + img.at(y1, x1, k) * ax;
                out[(static_cast<std::size_t>(y) * w + x) * c + k] =
                    static_cast<float>(std::clamp(top * (1 - ay) + bot * ay, 0.0, 1.0));
            }
        }
    }
    return {h, w, c, std::move(out)};
}

inline BinaryMask resize_nearest(const BinaryMask& m, int h, int w) {
    if (h == m.height() && w == m.width()) return m;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(m.height() - 1, static_cast<int>((y + 0.5) * m.height() / h));
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(m.width() - 1, static_cast<int>((x + 0.5) * m.width() / w));
            out[static_cast<std::size_t>(y) * w + x] = m.at(sy, sx);
        }
    }
    return {h, w, std::move(out)};
}

}  // namespace docbin
