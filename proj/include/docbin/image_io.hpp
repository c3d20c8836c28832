#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "docbin/image.hpp"

namespace docbin {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext;
}

}  // namespace detail

inline bool is_supported_image(const std::filesystem::path& p) {
    const auto ext = detail::lower_extension(p);
    return ext == ".png" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

/// Reads an 8-bit PNG/TIFF/BMP. Gray stays 1-channel, colour becomes RGB; alpha is dropped.
inline RasterImage load_image(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw IoError("cannot read image: " + path.string());
    if (!is_supported_image(path)) throw FormatError("unsupported image format: " + path.string());
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw IoError("failed to decode image: " + path.string());
    if (raw.depth() != CV_8U) {
        throw FormatError("unsupported bit depth in " + path.string() + " (only 8-bit images are accepted)");
    }
    cv::Mat rgb;
    int channels = 0;
    switch (raw.channels()) {
        case 1:
            rgb = raw;
            channels = 1;
            break;
        case 2:
            cv::extractChannel(raw, rgb, 0);
            channels = 1;
            break;
        case 3:
            cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
            channels = 3;
            break;
        case 4:
            cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
            channels = 3;
            break;
        default:
            throw FormatError("unsupported channel count in " + path.string());
    }
    std::vector<float> data(static_cast<std::size_t>(rgb.rows) * rgb.cols * channels);
    for (int y = 0; y < rgb.rows; ++y) {
        const auto* row = rgb.ptr<unsigned char>(y);
        for (int i = 0; i < rgb.cols * channels; ++i) {
            data[static_cast<std::size_t>(y) * rgb.cols * channels + i] = static_cast<float>(row[i]) / 255.0f;
        }
    }
    return {rgb.rows, rgb.cols, channels, std::move(data)};
}

/// Writes an 8-bit PNG; value v is stored as round(255 v).
inline void save_png(const RasterImage& img, const std::filesystem::path& path) {
    const int c = img.channels();
    cv::Mat mat(img.height(), img.width(), c == 1 ? CV_8UC1 : CV_8UC3);
    const auto px = img.pixels();
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<unsigned char>(y);
        for (int i = 0; i < img.width() * c; ++i) {
            const float v = px[static_cast<std::size_t>(y) * img.width() * c + i];
            row[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    }
    if (c == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write " + path.string());
}

inline void save_png(const BinaryMask& mask, const std::filesystem::path& path) {
    save_png(mask_to_image(mask), path);
}

}  // namespace docbin
