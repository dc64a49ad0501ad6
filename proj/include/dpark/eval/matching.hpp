#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpark/geometry.hpp"

namespace dpark::eval {

/// Geometry of a prediction or a ground-truth object.
using Shape = std::variant<Box, OrientedBox, Polygon>;

Box envelope(const Shape& s);
Polygon outline(const Shape& s);

/// IoU of the axis-aligned envelopes of `a` and `b`.
double iou(const Shape& a, const Shape& b);

/// Exact area IoU. At least one of the two shapes must be convex (a Box or OrientedBox, or a
/// convex polygon); the other may be any simple polygon.
double polygon_iou(const Shape& a, const Shape& b);

enum class IouMode { envelope, polygon };

struct Assignment {
    /// Column assigned to each row, -1 when the row is left over (more rows than columns).
    std::vector<int> row_to_col;
    double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of an n x m matrix (row-major), min(n, m) pairs.
/// Costs must be finite.
Assignment hungarian(const std::vector<double>& cost, int rows, int cols);
Assignment hungarian(const std::vector<std::vector<double>>& cost);

struct MatchPair {
    int pred = 0;
    int truth = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_preds;  ///< false positives
    std::vector<int> unmatched_truths; ///< false negatives
};

/// Hungarian assignment on 1 - IoU; assigned pairs with IoU below `iou_thresh` are dissolved
/// into one false positive and one false negative.
MatchResult match_detections(const std::vector<Shape>& preds, const std::vector<Shape>& truths, double iou_thresh,
                             IouMode mode = IouMode::envelope);

} // namespace dpark::eval
