#pragma once

// Brute-force reference implementations used only by the tests. Each one
// reaches its answer by enumeration rather than by the library's algorithm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "herdpose/core.hpp"

namespace herdpose::oracle {

/// IoU by counting unit pixels of integer-aligned boxes.
inline double raster_iou(const BBox& a, const BBox& b) {
    const int x0 = int(std::floor(std::min(a.x, b.x)));
    const int y0 = int(std::floor(std::min(a.y, b.y)));
    const int x1 = int(std::ceil(std::max(a.right(), b.right())));
    const int y1 = int(std::ceil(std::max(a.bottom(), b.bottom())));
    auto inside = [](const BBox& r, int px, int py) {
        return px >= r.x && px + 1 <= r.right() && py >= r.y && py + 1 <= r.bottom();
    };
    long inter = 0, uni = 0;
    for (int py = y0; py < y1; ++py) {
        for (int px = x0; px < x1; ++px) {
            const bool ia = inside(a, px, py), ib = inside(b, px, py);
            inter += ia && ib;
            uni += ia || ib;
        }
    }
    return uni ? double(inter) / double(uni) : 0.0;
}

inline std::vector<std::size_t> confidence_rank(const std::vector<Instance>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (*v[a].score != *v[b].score) return *v[a].score > *v[b].score;
        return v[a].id < v[b].id;
    });
    return idx;
}

/// Among all conflict-free subsets (no pair with IoU >= thr), the one whose
/// membership vector in confidence order is lexicographically largest.
inline std::vector<std::int64_t> nms_ids(const std::vector<Instance>& preds, double thr) {
    const auto rank = confidence_rank(preds);
    const std::size_t n = preds.size();
    std::vector<bool> best;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<bool> member(n);
        for (std::size_t r = 0; r < n; ++r) member[r] = (mask >> (n - 1 - r)) & 1u;
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = i + 1; j < n && ok; ++j) {
                if (member[i] && member[j] && iou(preds[rank[i]].bbox, preds[rank[j]].bbox) >= thr) ok = false;
            }
        }
        if (ok && member > best) best = member;
    }
    std::vector<std::int64_t> out;
    for (std::size_t r = 0; r < n; ++r) {
        if (best[r]) out.push_back(preds[rank[r]].id);
    }
    return out;
}

/// Enumerates every partial one-to-one assignment of predictions to ground
/// truths with IoU >= thr and returns the lexicographically best one, where
/// predictions are compared in confidence order by (IoU, -gt id) and an
/// unmatched prediction ranks below any match. Map: prediction id -> gt id.
inline std::map<std::int64_t, std::int64_t> match_pairs(const std::vector<Instance>& preds,
                                                         const std::vector<Instance>& gts, double thr) {
    const auto rank = confidence_rank(preds);
    using Key = std::vector<std::pair<double, std::int64_t>>;
    Key best_key;
    std::vector<int> best_choice, choice(preds.size(), -1);
    std::vector<bool> used(gts.size(), false);
    bool have = false;

    std::function<void(std::size_t)> rec = [&](std::size_t r) {
        if (r == rank.size()) {
            Key key;
            for (std::size_t k = 0; k < rank.size(); ++k) {
                if (choice[k] < 0) {
                    key.emplace_back(-1.0, 0);
                } else {
                    key.emplace_back(iou(preds[rank[k]].bbox, gts[std::size_t(choice[k])].bbox),
                                     -gts[std::size_t(choice[k])].id);
                }
            }
            if (!have || key > best_key) {
                have = true;
                best_key = key;
                best_choice = choice;
            }
            return;
        }
        choice[r] = -1;
        rec(r + 1);
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || iou(preds[rank[r]].bbox, gts[g].bbox) < thr) continue;
            used[g] = true;
            choice[r] = int(g);
            rec(r + 1);
            used[g] = false;
            choice[r] = -1;
        }
    };
    rec(0);
    std::map<std::int64_t, std::int64_t> out;
    for (std::size_t k = 0; k < rank.size(); ++k) {
        if (best_choice[k] >= 0) out[preds[rank[k]].id] = gts[std::size_t(best_choice[k])].id;
    }
    return out;
}

/// Detections already ordered by rank; `tp[k]` labels the k-th. Builds every
/// rank cut, then integrates max precision at recall >= r over r in [0, 1].
inline double rank_cut_ap(const std::vector<bool>& tp, std::size_t num_gt) {
    std::vector<double> rec, prec;
    for (std::size_t k = 1; k <= tp.size(); ++k) {
        std::size_t hits = 0;
        for (std::size_t j = 0; j < k; ++j) hits += tp[j];
        rec.push_back(double(hits) / double(num_gt));
        prec.push_back(double(hits) / double(k));
    }
    std::vector<double> levels = rec;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    double ap = 0.0, prev = 0.0;
    for (double r : levels) {
        if (r <= 0.0) continue;
        double pmax = 0.0;
        for (std::size_t k = 0; k < rec.size(); ++k) {
            if (rec[k] >= r) pmax = std::max(pmax, prec[k]);
        }
        ap += (r - prev) * pmax;
        prev = r;
    }
    return ap;
}

/// Minimum total cost over every injective assignment of min(rows, cols) pairs.
inline double min_assignment_cost(const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size();
    if (rows == 0) return 0.0;
    const std::size_t cols = cost[0].size();
    const bool by_row = rows <= cols;
    const std::size_t n = by_row ? rows : cols, m = by_row ? cols : rows;
    std::vector<bool> used(m, false);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, double)> rec = [&](std::size_t i, double acc) {
        if (i == n) {
            best = std::min(best, acc);
            return;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = true;
            rec(i + 1, acc + (by_row ? cost[i][j] : cost[j][i]));
            used[j] = false;
        }
    };
    rec(0, 0.0);
    return best;
}

/// Tile origins by walking every candidate start and keeping the minimal
/// clamped sequence that reaches the frame edge.
inline std::vector<int> walk_origins(int extent, int side, int stride) {
    std::vector<int> xs;
    if (extent <= side) return {0};
    for (int x = 0;; x += stride) {
        if (x + side >= extent) {
            xs.push_back(extent - side);
            break;
        }
        xs.push_back(x);
    }
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

}  // namespace herdpose::oracle
