#include "dpark/eval/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpark/error.hpp"

namespace dpark::eval {

Box envelope(const Shape& s) {
    return std::visit(
        [](const auto& g) -> Box {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Box>) return g;
            else if constexpr (std::is_same_v<T, OrientedBox>) return g.envelope();
            else return polygon_envelope(g);
        },
        s);
}

Polygon outline(const Shape& s) {
    return std::visit(
        [](const auto& g) -> Polygon {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Polygon>) return g;
            else return to_polygon(g);
        },
        s);
}

double iou(const Shape& a, const Shape& b) { return dpark::iou(envelope(a), envelope(b)); }

namespace {

bool is_convex(const Polygon& p) {
    if (p.size() < 3) return false;
    int sign = 0;
    for (std::size_t i = 0, n = p.size(); i < n; ++i) {
        const double c = cross(p[(i + 1) % n] - p[i], p[(i + 2) % n] - p[(i + 1) % n]);
        if (c == 0.0) continue;
        const int s = c > 0 ? 1 : -1;
        if (sign != 0 && s != sign) return false;
        sign = s;
    }
    return true;
}

} // namespace

double polygon_iou(const Shape& a, const Shape& b) {
    const Polygon pa = outline(a), pb = outline(b);
    const double area_a = polygon_area(pa), area_b = polygon_area(pb);
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    double inter = 0.0;
    if (is_convex(pb)) inter = polygon_area(clip_to_convex(pa, pb));
    else if (is_convex(pa)) inter = polygon_area(clip_to_convex(pb, pa));
    else throw InvalidArgument("polygon_iou needs at least one convex shape");
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

Assignment hungarian(const std::vector<double>& cost, int rows, int cols) {
    if (rows < 0 || cols < 0 || cost.size() != static_cast<std::size_t>(rows) * cols)
        throw InvalidArgument("cost matrix size mismatch");
    for (double c : cost)
        if (!std::isfinite(c)) throw InvalidArgument("cost matrix entries must be finite");
    Assignment out;
    out.row_to_col.assign(rows, -1);
    if (rows == 0 || cols == 0) return out;

    // Shortest augmenting paths with potentials; needs n <= m, so work on the transpose otherwise.
    const bool transposed = rows > cols;
    const int n = transposed ? cols : rows, m = transposed ? rows : cols;
    const auto a = [&](int i, int j) {
        return transposed ? cost[static_cast<std::size_t>(j - 1) * cols + (i - 1)]
                          : cost[static_cast<std::size_t>(i - 1) * cols + (j - 1)];
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    for (int j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        const int r = transposed ? j - 1 : p[j] - 1;
        const int c = transposed ? p[j] - 1 : j - 1;
        out.row_to_col[r] = c;
        out.total_cost += cost[static_cast<std::size_t>(r) * cols + c];
    }
    return out;
}

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
    const int rows = static_cast<int>(cost.size());
    const int cols = rows ? static_cast<int>(cost.front().size()) : 0;
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != cols) throw InvalidArgument("ragged cost matrix");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return hungarian(flat, rows, cols);
}

MatchResult match_detections(const std::vector<Shape>& preds, const std::vector<Shape>& truths, double iou_thresh,
                             IouMode mode) {
    const int n = static_cast<int>(preds.size()), m = static_cast<int>(truths.size());
    std::vector<double> ious(static_cast<std::size_t>(n) * m), cost(ious.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double v = mode == IouMode::envelope ? iou(preds[i], truths[j]) : polygon_iou(preds[i], truths[j]);
            ious[static_cast<std::size_t>(i) * m + j] = v;
            cost[static_cast<std::size_t>(i) * m + j] = 1.0 - v;
        }
    }
    const auto assignment = hungarian(cost, n, m);
    MatchResult out;
    std::vector<char> truth_used(m, 0);
    for (int i = 0; i < n; ++i) {
        const int j = assignment.row_to_col[i];
        if (j >= 0 && ious[static_cast<std::size_t>(i) * m + j] >= iou_thresh) {
            out.pairs.push_back({i, j, ious[static_cast<std::size_t>(i) * m + j]});
            truth_used[j] = 1;
        } else {
            out.unmatched_preds.push_back(i);
        }
    }
    for (int j = 0; j < m; ++j)
        if (!truth_used[j]) out.unmatched_truths.push_back(j);
    return out;
}

} // namespace dpark::eval
