#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond the image containers and are deliberately written the slow, obvious way.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "docbin/image.hpp"

namespace docbin::oracle {

// ------------------------------------------------------------------ fixtures

inline BinaryMask random_mask(int h, int w, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<std::uint8_t> d(static_cast<std::size_t>(h) * w);
    for (auto& v : d) v = coin(rng) ? 1 : 0;
    return {h, w, std::move(d)};
}

inline BinaryMask flip_some(const BinaryMask& m, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<std::uint8_t> d(m.pixels().begin(), m.pixels().end());
    for (auto& v : d)
        if (coin(rng)) v = 1 - v;
    return {m.height(), m.width(), std::move(d)};
}

inline RasterImage random_gray(int h, int w, std::mt19937_64& rng, bool on_byte_grid = true) {
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> d(static_cast<std::size_t>(h) * w);
    for (auto& v : d) v = on_byte_grid ? static_cast<float>(byte(rng)) / 255.0f : u(rng);
    return {h, w, 1, std::move(d)};
}

// ------------------------------------------------------------------ classical

struct OtsuOracle {
    int cut = 0;
    double threshold = 0.0;
};

/// Tries all 256 cut points, partitioning the raw pixel list each time.
inline OtsuOracle otsu_brute_force(const RasterImage& gray) {
    std::vector<int> bins;
    for (float v : gray.pixels()) bins.push_back(static_cast<int>(std::lround(static_cast<double>(v) * 255.0)));
    double best = -1.0;
    int best_cut = 0;
    for (int t = 0; t < 256; ++t) {
        double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int b : bins) {
            if (b < t) {
                n0 += 1;
                s0 += b;
            } else {
                n1 += 1;
                s1 += b;
            }
        }
        double var = 0.0;
        if (n0 > 0 && n1 > 0) {
            const double n = n0 + n1;
            var = (n0 / n) * (n1 / n) * (s0 / n0 - s1 / n1) * (s0 / n0 - s1 / n1);
        }
        if (var > best) {
            best = var;
            best_cut = t;
        }
    }
    return {best_cut, (best_cut - 0.5) / 255.0};
}

/// Local threshold from explicitly enumerated windows with edge replication.
template <typename Rule>
BinaryMask local_threshold_naive(const RasterImage& gray, int window, Rule rule) {
    const int r = window / 2;
    std::vector<std::uint8_t> out(gray.size());
    for (int y = 0; y < gray.height(); ++y)
        for (int x = 0; x < gray.width(); ++x) {
            std::vector<double> vals;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = std::min(std::max(y + dy, 0), gray.height() - 1);
                    const int xx = std::min(std::max(x + dx, 0), gray.width() - 1);
                    vals.push_back(gray.at(yy, xx));
                }
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(vals.size());
            const double t = rule(mean, std::sqrt(var));
            out[static_cast<std::size_t>(y) * gray.width() + x] = (t - gray.at(y, x) > 1e-9) ? 1 : 0;
        }
    return {gray.height(), gray.width(), std::move(out)};
}

// ------------------------------------------------------------------ metrics

struct Tally {
    double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Tally tally(const BinaryMask& pred, const BinaryMask& gt) {
    Tally t;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            const bool p = pred.at(y, x);
            const bool g = gt.at(y, x);
            if (p && g) t.tp += 1;
            if (p && !g) t.fp += 1;
            if (!p && g) t.fn += 1;
            if (!p && !g) t.tn += 1;
        }
    return t;
}

/// Harmonic mean of conventional precision and recall.
inline double f_measure(const BinaryMask& pred, const BinaryMask& gt) {
    const auto t = tally(pred, gt);
    if (t.tp + t.fp + t.fn == 0) return 1.0;
    if (t.tp == 0) return 0.0;
    const double precision = t.tp / (t.tp + t.fp);
    const double recall = t.tp / (t.tp + t.fn);
    return 2 * precision * recall / (precision + recall);
}

/// Textbook Zhang-Suen on a std::set of coordinates, with the same rule that a
/// sub-iteration may not erase an entire 8-connected component.
inline BinaryMask zhang_suen(const BinaryMask& m) {
    std::set<std::pair<int, int>> fg;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(y, x)) fg.insert({y, x});
    auto on = [&](int y, int x) { return fg.count({y, x}) ? 1 : 0; };

    auto components = [&]() {
        std::vector<std::set<std::pair<int, int>>> comps;
        std::set<std::pair<int, int>> seen;
        for (const auto& start : fg) {
            if (seen.count(start)) continue;
            std::set<std::pair<int, int>> comp;
            std::vector<std::pair<int, int>> todo{start};
            seen.insert(start);
            while (!todo.empty()) {
                auto [y, x] = todo.back();
                todo.pop_back();
                comp.insert({y, x});
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        std::pair<int, int> nb{y + dy, x + dx};
                        if (fg.count(nb) && !seen.count(nb)) {
                            seen.insert(nb);
                            todo.push_back(nb);
                        }
                    }
            }
            comps.push_back(comp);
        }
        return comps;
    };

    for (bool changed = true; changed;) {
        changed = false;
        for (int step = 1; step <= 2; ++step) {
            std::set<std::pair<int, int>> remove;
            for (auto [y, x] : fg) {
                const int p2 = on(y - 1, x), p3 = on(y - 1, x + 1), p4 = on(y, x + 1), p5 = on(y + 1, x + 1);
                const int p6 = on(y + 1, x), p7 = on(y + 1, x - 1), p8 = on(y, x - 1), p9 = on(y - 1, x - 1);
                const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                const std::array<int, 9> seq{p2, p3, p4, p5, p6, p7, p8, p9, p2};
                int a = 0;
                for (int i = 0; i < 8; ++i) a += (seq[i] == 0 && seq[i + 1] == 1);
                if (b < 2 || b > 6 || a != 1) continue;
                if (step == 1 && (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0)) continue;
                if (step == 2 && (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0)) continue;
                remove.insert({y, x});
            }
            if (remove.empty()) continue;
            for (const auto& comp : components()) {
                bool all = true;
                for (const auto& p : comp) all = all && remove.count(p);
                if (all) remove.erase(*comp.begin());  // smallest (row, col) = first in raster order
            }
            for (const auto& p : remove) fg.erase(p);
            changed = changed || !remove.empty();
        }
    }
    BinaryMask out(m.height(), m.width(), false);
    std::vector<std::uint8_t> d(m.size(), 0);
    for (auto [y, x] : fg) d[static_cast<std::size_t>(y) * m.width() + x] = 1;
    return {m.height(), m.width(), std::move(d)};
}

inline double pseudo_f_measure(const BinaryMask& pred, const BinaryMask& gt) {
    const auto t = tally(pred, gt);
    if (t.tp + t.fn == 0) return f_measure(pred, gt);
    const auto skel = zhang_suen(gt);
    double hit = 0, total = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x)
            if (skel.at(y, x)) {
                total += 1;
                hit += pred.at(y, x) ? 1 : 0;
            }
    const double precision = (t.tp + t.fp) > 0 ? t.tp / (t.tp + t.fp) : 0.0;
    const double precall = hit / total;
    if (precision + precall == 0) return 0.0;
    return 2 * precision * precall / (precision + precall);
}

inline double psnr(const BinaryMask& pred, const BinaryMask& gt) {
    double se = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            const double d = (pred.at(y, x) ? 1.0 : 0.0) - (gt.at(y, x) ? 1.0 : 0.0);
            se += d * d;
        }
    if (se == 0) return std::numeric_limits<double>::infinity();
    const double mse = se / static_cast<double>(gt.size());
    return 10.0 * std::log10(1.0 / mse);
}

inline int nubn(const BinaryMask& gt) {
    int count = 0;
    for (int by = 0; by * 8 < gt.height(); ++by)
        for (int bx = 0; bx * 8 < gt.width(); ++bx) {
            std::set<bool> seen;
            for (int y = by * 8; y < by * 8 + 8 && y < gt.height(); ++y)
                for (int x = bx * 8; x < bx * 8 + 8 && x < gt.width(); ++x) seen.insert(gt.at(y, x));
            if (seen.size() == 2) ++count;
        }
    return count;
}

inline double drd(const BinaryMask& pred, const BinaryMask& gt) {
    double wsum = 0;
    double w[5][5];
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double dist = std::hypot(i - 2.0, j - 2.0);
            w[i][j] = dist == 0 ? 0.0 : 1.0 / dist;
            wsum += w[i][j];
        }
    double total = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (pred.at(y, x) == gt.at(y, x)) continue;
            const double g = pred.at(y, x) ? 1.0 : 0.0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    const int yy = y + i - 2;
                    const int xx = x + j - 2;
                    const double b = (yy >= 0 && yy < gt.height() && xx >= 0 && xx < gt.width())
                                         ? (gt.at(yy, xx) ? 1.0 : 0.0)
                                         : g;
                    total += std::abs(b - g) * w[i][j] / wsum;
                }
        }
    return total / nubn(gt);
}

}  // namespace docbin::oracle
