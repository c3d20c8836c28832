#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "docbin/errors.hpp"
#include "docbin/image.hpp"
#include "docbin/image_io.hpp"

namespace docbin::data {

/// Aligned (degraded input, ground truth) pair plus where it came from.
struct PairedSample {
    RasterImage input;  // 3 channels
    BinaryMask target;
    std::string origin;  // "<dataset>/<stem>" or "<dataset>/<stem>@y,x:size"
    bool synthetic = false;
};

/// Stem part of an origin string: "dibco09/H01@12,40:256" -> "dibco09/H01".
inline std::string origin_stem(const std::string& origin) { return origin.substr(0, origin.find('@')); }

struct PatchSpec {
    int size = 256;
    int count_per_image = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (size < 1) throw ArgumentError("PatchSpec: size must be positive");
        if (count_per_image < 1) throw ArgumentError("PatchSpec: count_per_image must be >= 1");
    }
};

struct PairingOptions {
    std::vector<std::string> gt_suffixes{"_gt", "_GT"};
};

/// Renders ground truth as ink=1 where the (grayscale) value is below 0.5.
inline BinaryMask binarize_ground_truth(const RasterImage& gt) { return image_to_mask(to_grayscale(gt), 0.5f); }

/// Pairs `<stem>.<ext>` with `<stem><suffix>.<ext>` for every supported image
/// in `dir`. Results are sorted by stem.
inline std::vector<PairedSample> load_dibco_dir(const std::filesystem::path& dir, const PairingOptions& opts = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    const std::string dataset = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

    std::map<std::string, fs::path> inputs;
    std::map<std::string, std::vector<fs::path>> gts;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_supported_image(entry.path())) continue;
        const std::string stem = entry.path().stem().string();
        if (stem.empty() || stem.front() == '.') continue;
        bool is_gt = false;
        for (const auto& suffix : opts.gt_suffixes) {
            if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
                gts[stem.substr(0, stem.size() - suffix.size())].push_back(entry.path());
                is_gt = true;
                break;
            }
        }
        if (is_gt) continue;
        if (!inputs.emplace(stem, entry.path()).second) {
            throw DataError("duplicate input image for stem '" + stem + "' in " + dir.string());
        }
    }

    std::vector<std::string> orphans;
    for (const auto& [stem, _] : inputs)
        if (!gts.contains(stem)) orphans.push_back(stem);
    for (const auto& [stem, _] : gts)
        if (!inputs.contains(stem)) orphans.push_back(stem);
    if (!orphans.empty()) {
        std::sort(orphans.begin(), orphans.end());
        std::string list;
        for (const auto& s : orphans) list += (list.empty() ? "" : ", ") + s;
        throw DataError("unpaired files in " + dir.string() + ": " + list);
    }

    std::vector<PairedSample> out;
    for (const auto& [stem, path] : inputs) {
        const auto& gt_paths = gts.at(stem);
        if (gt_paths.size() != 1) throw DataError("more than one ground truth for stem '" + stem + "'");
        auto input = to_rgb(load_image(path));
        auto target = binarize_ground_truth(load_image(gt_paths.front()));
        if (!same_size(input, target)) {
            throw DataError("size mismatch for '" + stem + "': input " + std::to_string(input.height()) + "x" +
                            std::to_string(input.width()) + ", ground truth " + std::to_string(target.height()) +
                            "x" + std::to_string(target.width()));
        }
        out.push_back({std::move(input), std::move(target), dataset + "/" + stem, false});
    }
    return out;
}

inline std::string window_origin(const std::string& base, int y, int x, int size) {
    return origin_stem(base) + "@" + std::to_string(y) + "," + std::to_string(x) + ":" + std::to_string(size);
}

/// The same square window cut from input and target; both are reflection-padded
/// first when smaller than `size`.
inline PairedSample crop_window(const PairedSample& pair, int y, int x, int size) {
    const auto input = reflect_pad(pair.input, size, size);
    const auto target = reflect_pad(pair.target, size, size);
    return {crop(input, y, x, size, size), crop(target, y, x, size, size), window_origin(pair.origin, y, x, size),
            pair.synthetic};
}

inline std::vector<PairedSample> extract_patches(const PairedSample& pair, const PatchSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    const auto input = reflect_pad(pair.input, spec.size, spec.size);
    const auto target = reflect_pad(pair.target, spec.size, spec.size);
    std::uniform_int_distribution<int> py(0, input.height() - spec.size);
    std::uniform_int_distribution<int> px(0, input.width() - spec.size);
    std::vector<PairedSample> out;
    out.reserve(static_cast<std::size_t>(spec.count_per_image));
    for (int k = 0; k < spec.count_per_image; ++k) {
        const int y = py(rng);
        const int x = px(rng);
        out.push_back({crop(input, y, x, spec.size, spec.size), crop(target, y, x, spec.size, spec.size),
                       window_origin(pair.origin, y, x, spec.size), pair.synthetic});
    }
    return out;
}

/// Random square sub-crop (side between out_size and the short edge), then
/// bilinear resize of the input and nearest resize of the target to out_size.
inline PairedSample crop_resize_augment(const PairedSample& s, int out_size, std::mt19937_64& rng) {
    const int h = s.input.height();
    const int w = s.input.width();
    if (out_size < 1 || h < out_size || w < out_size) {
        throw ArgumentError("crop_resize_augment: sample " + std::to_string(h) + "x" + std::to_string(w) +
                            " smaller than " + std::to_string(out_size));
    }
    const int side = std::uniform_int_distribution<int>(out_size, std::min(h, w))(rng);
    const int y = std::uniform_int_distribution<int>(0, h - side)(rng);
    const int x = std::uniform_int_distribution<int>(0, w - side)(rng);
    return {resize_bilinear(crop(s.input, y, x, side, side), out_size, out_size),
            resize_nearest(crop(s.target, y, x, side, side), out_size, out_size), s.origin, s.synthetic};
}

struct TrainingSetSpec {
    int extract_size = 512;
    int stride = 512;
    int jitter = 0;
    int out_size = 256;
    std::uint64_t seed = 0;

    void validate() const {
        if (extract_size < 1 || out_size < 1 || out_size > extract_size) {
            throw ConfigError("training set: need 1 <= out_size <= extract_size");
        }
        if (stride < 1) throw ConfigError("training set: stride must be positive");
        if (jitter < 0) throw ConfigError("training set: jitter must be non-negative");
    }
};

/// Grid origins along one axis: 0, stride, ... and a final window flush with the edge.
inline std::vector<int> grid_positions(int length, int size, int stride) {
    std::vector<int> pos;
    const int last = std::max(0, length - size);
    for (int p = 0; p <= last; p += stride) pos.push_back(p);
    if (pos.back() != last) pos.push_back(last);
    return pos;
}

/// Lazily materialized training windows with epoch semantics. Window placement is
/// fixed at construction; per-epoch order and crop/resize draws derive from the seed.
class TrainingSet {
public:
    struct Window {
        std::size_t image = 0;
        int y = 0;
        int x = 0;
    };

    TrainingSet(std::vector<PairedSample> images, TrainingSetSpec spec) : spec_(spec) {
        spec_.validate();
        if (images.empty()) throw DataError("training set has no usable image pairs");
        std::mt19937_64 rng(spec_.seed ^ 0x9e3779b97f4a7c15ULL);
        for (auto& img : images) {
            img.input = reflect_pad(img.input, spec_.extract_size, spec_.extract_size);
            img.target = reflect_pad(img.target, spec_.extract_size, spec_.extract_size);
            const int max_y = img.input.height() - spec_.extract_size;
            const int max_x = img.input.width() - spec_.extract_size;
            std::uniform_int_distribution<int> jit(-spec_.jitter, spec_.jitter);
            for (int y : grid_positions(img.input.height(), spec_.extract_size, spec_.stride))
                for (int x : grid_positions(img.input.width(), spec_.extract_size, spec_.stride)) {
                    const int jy = spec_.jitter ? jit(rng) : 0;
                    const int jx = spec_.jitter ? jit(rng) : 0;
                    windows_.push_back({images_.size(), std::clamp(y + jy, 0, max_y), std::clamp(x + jx, 0, max_x)});
                }
            images_.push_back(std::move(img));
        }
    }

    static TrainingSet from_dirs(const std::vector<std::filesystem::path>& dirs, TrainingSetSpec spec,
                                 const PairingOptions& opts = {}) {
        if (dirs.empty()) throw ConfigError("training set: no dataset directories given");
        std::vector<PairedSample> all;
        for (const auto& d : dirs) {
            auto pairs = load_dibco_dir(d, opts);
            std::move(pairs.begin(), pairs.end(), std::back_inserter(all));
        }
        return TrainingSet(std::move(all), spec);
    }

    [[nodiscard]] std::size_t size() const { return windows_.size(); }
    [[nodiscard]] const TrainingSetSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<Window>& windows() const { return windows_; }

    /// Permutation of window indices for one epoch.
    [[nodiscard]] std::vector<std::size_t> epoch_order(std::int64_t epoch) const {
        std::vector<std::size_t> order(windows_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(mix(spec_.seed, static_cast<std::uint64_t>(epoch), 0x5eedULL));
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    }

    /// Sample for a window in a given epoch; identical arguments give identical samples.
    [[nodiscard]] PairedSample sample(std::size_t window, std::int64_t epoch) const {
        const auto& w = windows_.at(window);
        const auto& img = images_[w.image];
        auto patch = PairedSample{crop(img.input, w.y, w.x, spec_.extract_size, spec_.extract_size),
                                  crop(img.target, w.y, w.x, spec_.extract_size, spec_.extract_size),
                                  window_origin(img.origin, w.y, w.x, spec_.extract_size), false};
        std::mt19937_64 rng(mix(spec_.seed, static_cast<std::uint64_t>(epoch), window));
        return crop_resize_augment(patch, spec_.out_size, rng);
    }

    /// Every sample of an epoch in shuffled order.
    [[nodiscard]] std::vector<PairedSample> epoch(std::int64_t e) const {
        std::vector<PairedSample> out;
        for (std::size_t i : epoch_order(e)) out.push_back(sample(i, e));
        return out;
    }

    [[nodiscard]] std::set<std::string> stems() const {
        std::set<std::string> out;
        for (const auto& img : images_) out.insert(origin_stem(img.origin));
        return out;
    }

private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                          static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
        std::array<std::uint32_t, 2> words{};
        seq.generate(words.begin(), words.end());
        return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }

    TrainingSetSpec spec_;
    std::vector<PairedSample> images_;
    std::vector<Window> windows_;
};

/// Throws if any image stem appears in both the training and evaluation sets.
inline void require_disjoint(const std::set<std::string>& train_stems, const std::set<std::string>& eval_stems) {
    std::vector<std::string> shared;
    std::set_intersection(train_stems.begin(), train_stems.end(), eval_stems.begin(), eval_stems.end(),
                          std::back_inserter(shared));
    if (!shared.empty()) {
        std::string list;
        for (const auto& s : shared) list += (list.empty() ? "" : ", ") + s;
        throw DataError("train/eval overlap: " + list);
    }
}

inline std::set<std::string> stems_of(const std::vector<PairedSample>& samples) {
    std::set<std::string> out;
    for (const auto& s : samples) out.insert(origin_stem(s.origin));
    return out;
}

}  // namespace docbin::data
