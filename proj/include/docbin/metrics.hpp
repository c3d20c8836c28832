#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "docbin/image.hpp"

namespace docbin::metrics {

/// Pixel tallies with foreground as the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    [[nodiscard]] std::uint64_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline void require_same_size(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!same_size(a, b)) throw ArgumentError(std::string(what) + ": prediction and ground truth differ in size");
}

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "confusion");
    ConfusionCounts c;
    const auto p = pred.pixels();
    const auto g = gt.pixels();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] && g[i]) ++c.tp;
        else if (p[i]) ++c.fp;
        else if (g[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// 2tp / (2tp + fp + fn). Defined as 1 when both masks have no foreground.
/// Note: swapping the precision/recall denominators leaves this value unchanged.
inline double f_measure(const ConfusionCounts& c) {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double f_measure(const BinaryMask& pred, const BinaryMask& gt) { return f_measure(confusion(pred, gt)); }

/// Zhang-Suen thinning run to a fixpoint. Pixels outside the mask count as background.
/// A sub-iteration never deletes every pixel of an 8-connected component: when it would,
/// the first such pixel in raster order is kept (plain Zhang-Suen erases 2x2 blocks).
inline BinaryMask skeletonize(const BinaryMask& mask) {
    const int h = mask.height();
    const int w = mask.width();
    const int pw = w + 2;
    std::vector<std::uint8_t> g(static_cast<std::size_t>(h + 2) * pw, 0);
    auto at = [&](int y, int x) -> std::uint8_t& { return g[static_cast<std::size_t>(y + 1) * pw + (x + 1)]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) at(y, x) = mask.at(y, x) ? 1 : 0;

    std::vector<int> label(g.size(), -1);
    std::vector<std::size_t> stack;
    std::vector<std::uint8_t> marked(g.size(), 0);

    auto protect_components = [&](std::vector<std::size_t>& doomed) {
        std::fill(label.begin(), label.end(), -1);
        std::fill(marked.begin(), marked.end(), 0);
        for (auto i : doomed) marked[i] = 1;
        std::vector<std::size_t> keep;
        int next = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto start = static_cast<std::size_t>(y + 1) * pw + (x + 1);
                if (!g[start] || label[start] >= 0) continue;
                bool all_doomed = true;
                std::size_t first = start;
                label[start] = next;
                stack.assign(1, start);
                while (!stack.empty()) {
                    const auto cur = stack.back();
                    stack.pop_back();
                    if (!marked[cur]) all_doomed = false;
                    if (marked[cur] && cur < first) first = cur;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const auto nb = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cur) + dy * pw + dx);
                            if (g[nb] && label[nb] < 0) {
                                label[nb] = next;
                                stack.push_back(nb);
                            }
                        }
                }
                if (all_doomed) keep.push_back(first);
                ++next;
            }
        if (keep.empty()) return;
        std::erase_if(doomed, [&](std::size_t i) { return std::find(keep.begin(), keep.end(), i) != keep.end(); });
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<std::size_t> doomed;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    if (!at(y, x)) continue;
                    // P2..P9 clockwise from north.
                    const std::array<int, 8> p{at(y - 1, x),     at(y - 1, x + 1), at(y, x + 1), at(y + 1, x + 1),
                                               at(y + 1, x),     at(y + 1, x - 1), at(y, x - 1), at(y - 1, x - 1)};
                    int b = 0;
                    int a = 0;
                    for (int k = 0; k < 8; ++k) {
                        b += p[k];
                        if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
                    }
                    if (b < 2 || b > 6 || a != 1) continue;
                    const int n = p[0], e = p[2], s = p[4], wv = p[6];
                    if (pass == 0) {
                        if (n * e * s != 0 || e * s * wv != 0) continue;
                    } else {
                        if (n * e * wv != 0 || n * s * wv != 0) continue;
                    }
                    doomed.push_back(static_cast<std::size_t>(y + 1) * pw + (x + 1));
                }
            if (doomed.empty()) continue;
            protect_components(doomed);
            for (auto i : doomed) g[i] = 0;
            changed = changed || !doomed.empty();
        }
    }

    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = at(y, x);
    return {h, w, std::move(out)};
}

/// Precision against the full ground truth, recall against its skeleton.
/// Falls back to the plain F-measure when the ground truth has no foreground.
inline double pseudo_f_measure(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "pseudo_f_measure");
    if (gt.count() == 0) return f_measure(pred, gt);
    const auto c = confusion(pred, gt);
    const BinaryMask skel = skeletonize(gt);
    std::uint64_t skel_total = 0;
    std::uint64_t skel_hit = 0;
    const auto p = pred.pixels();
    const auto s = skel.pixels();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i]) {
            ++skel_total;
            if (p[i]) ++skel_hit;
        }
    }
    const double precision = (c.tp + c.fp) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double precall = static_cast<double>(skel_hit) / static_cast<double>(skel_total);
    if (precision + precall == 0.0) return 0.0;
    return 2.0 * precision * precall / (precision + precall);
}

/// 10 log10(1 / MSE) on {0,1} images; +inf when the masks are identical.
inline double psnr(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "psnr");
    const auto c = confusion(pred, gt);
    const auto diff = c.fp + c.fn;
    if (diff == 0) return std::numeric_limits<double>::infinity();
    // 1 / MSE == total / diff; the integer ratio keeps exact cases exact.
    return 10.0 * std::log10(static_cast<double>(c.total()) / static_cast<double>(diff));
}

/// Number of 8x8 blocks (top-left anchored, partial edge blocks included)
/// that contain both foreground and background.
inline std::uint64_t nubn(const BinaryMask& gt, int block = 8) {
    std::uint64_t count = 0;
    for (int by = 0; by < gt.height(); by += block)
        for (int bx = 0; bx < gt.width(); bx += block) {
            bool fg = false;
            bool bg = false;
            for (int y = by; y < std::min(by + block, gt.height()); ++y)
                for (int x = bx; x < std::min(bx + block, gt.width()); ++x) (gt.at(y, x) ? fg : bg) = true;
            if (fg && bg) ++count;
        }
    return count;
}

/// Normalized 5x5 reciprocal-distance weights: 1/sqrt(i^2 + j^2), centre 0, summing to 1.
inline std::array<std::array<double, 5>, 5> drd_weights() {
    std::array<std::array<double, 5>, 5> w{};
    double sum = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const int di = i - 2;
            const int dj = j - 2;
            w[i][j] = (di == 0 && dj == 0) ? 0.0 : 1.0 / std::sqrt(static_cast<double>(di * di + dj * dj));
            sum += w[i][j];
        }
    for (auto& row : w)
        for (auto& v : row) v /= sum;
    return w;
}

/// Sum over flipped pixels of weighted ground-truth disagreement, divided by NUBN.
inline double drd(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt, "drd");
    const auto blocks = nubn(gt);
    if (blocks == 0) throw UndefinedMetric("drd: ground truth has no non-uniform 8x8 block");
    static const auto weights = drd_weights();
    double total = 0.0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            const bool value = pred.at(y, x);
            if (value == gt.at(y, x)) continue;
            double dk = 0.0;
            for (int i = -2; i <= 2; ++i)
                for (int j = -2; j <= 2; ++j) {
                    const int yy = y + i;
                    const int xx = x + j;
                    if (yy < 0 || yy >= gt.height() || xx < 0 || xx >= gt.width()) continue;
                    if (gt.at(yy, xx) != value) dk += weights[i + 2][j + 2];
                }
            total += dk;
        }
    return total / static_cast<double>(blocks);
}

/// Scores for one prediction/ground-truth pair.
struct MetricReport {
    std::string image_id;
    double f_measure = 0.0;
    double pseudo_f_measure = 0.0;
    double psnr = 0.0;                 // +inf when prediction equals ground truth
    std::optional<double> drd;         // empty when the ground truth has no non-uniform block
    std::uint64_t nubn = 0;

    [[nodiscard]] bool psnr_infinite() const { return std::isinf(psnr); }
};

inline MetricReport score(const BinaryMask& pred, const BinaryMask& gt, std::string image_id) {
    MetricReport r;
    r.image_id = std::move(image_id);
    r.f_measure = f_measure(pred, gt);
    r.pseudo_f_measure = pseudo_f_measure(pred, gt);
    r.psnr = psnr(pred, gt);
    r.nubn = nubn(gt);
    if (r.nubn > 0) r.drd = drd(pred, gt);
    return r;
}

}  // namespace docbin::metrics
