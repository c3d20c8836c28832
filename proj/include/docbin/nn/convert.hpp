#pragma once

#include <algorithm>
#include <vector>

#include "docbin/image.hpp"
#include "docbin/nn/tensor.hpp"

namespace docbin::nn {

/// Packs equally sized images into an (N, C, H, W) tensor.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<RasterImage>& images) {
    if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
    const int h = images.front().height();
    const int w = images.front().width();
    const int c = images.front().channels();
    Tensor<T> out({static_cast<int>(images.size()), c, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        const auto& img = images[n];
        if (img.height() != h || img.width() != w || img.channels() != c) {
            throw ShapeError("images_to_tensor: images differ in shape");
        }
        const auto px = img.pixels();
        for (int k = 0; k < c; ++k)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    out.at(static_cast<int>(n), k, y, x) = static_cast<T>(px[(static_cast<std::size_t>(y) * w + x) * c + k]);
                }
    }
    return out;
}

template <typename T>
Tensor<T> image_to_tensor(const RasterImage& img) {
    return images_to_tensor<T>({img});
}

/// Masks rendered as images (ink 0, paper 1) in an (N, 1, H, W) tensor.
template <typename T>
Tensor<T> masks_to_tensor(const std::vector<BinaryMask>& masks) {
    if (masks.empty()) throw ShapeError("masks_to_tensor: empty batch");
    const int h = masks.front().height();
    const int w = masks.front().width();
    Tensor<T> out({static_cast<int>(masks.size()), 1, h, w});
    for (std::size_t n = 0; n < masks.size(); ++n) {
        if (masks[n].height() != h || masks[n].width() != w) throw ShapeError("masks_to_tensor: masks differ in shape");
        const auto px = masks[n].pixels();
        std::transform(px.begin(), px.end(), out.values().begin() + static_cast<std::ptrdiff_t>(n * px.size()),
                       [](std::uint8_t v) { return v ? T(0) : T(1); });
    }
    return out;
}

/// Sample n of an (N, C, H, W) tensor as an image; values are clamped into [0, 1].
template <typename T>
RasterImage tensor_to_image(const Tensor<T>& t, int n = 0) {
    const auto s = t.shape();
    if (s.c != 1 && s.c != 3) throw ShapeError("tensor_to_image: need 1 or 3 channels, got " + s.str());
    std::vector<float> out(static_cast<std::size_t>(s.h) * s.w * s.c);
    for (int k = 0; k < s.c; ++k)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                const double v = static_cast<double>(t.at(n, k, y, x));
                out[(static_cast<std::size_t>(y) * s.w + x) * s.c + k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    return {s.h, s.w, s.c, std::move(out)};
}

}  // namespace docbin::nn
