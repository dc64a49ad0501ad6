#include "dpark/scanner.hpp"

#include <algorithm>
#include <tuple>

#include "dpark/parallel.hpp"

namespace dpark::scan {

namespace {

struct PassOffset {
    int dx;
    int dy;
};

constexpr PassOffset kPassOffsets[kPassCount] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};

PassOffset offset_of(int pass) {
    if (pass < 1 || pass > kPassCount) throw InvalidArgument("pass must be in 1..4");
    return kPassOffsets[pass - 1];
}

// Ties at exactly S - m go to the interior band (the lower-numbered pass).
bool interior(double t, int side, int margin, bool boundary) {
    return (boundary || t >= margin) && t <= side - margin;
}

bool seam(double t, int side, int margin) { return t > side - margin && t < side + margin; }

bool centroid_order(const GlobalDetection& a, const GlobalDetection& b) {
    const Vec2 ca = a.bbox.centroid(), cb = b.bbox.centroid();
    return std::tie(ca.y, ca.x, a.cls, b.confidence) < std::tie(cb.y, cb.x, b.cls, a.confidence);
}

} // namespace

bool keeps(int pass, Vec2 local, int side, int margin, bool left_boundary, bool top_boundary) {
    const auto off = offset_of(pass);
    const bool u = off.dx ? seam(local.x, side, margin) : interior(local.x, side, margin, left_boundary);
    const bool v = off.dy ? seam(local.y, side, margin) : interior(local.y, side, margin, top_boundary);
    return u && v;
}

int ownership(Vec2 local, int side, int margin, bool left_boundary, bool top_boundary) {
    for (int pass = 1; pass <= kPassCount; ++pass)
        if (keeps(pass, local, side, margin, left_boundary, top_boundary)) return pass;
    return 0;
}

Vec2 window_origin(const imagery::Mosaic& m, WindowSquare sq, int pass) {
    const auto off = offset_of(pass);
    return {static_cast<double>((sq.col + off.dx) * m.tile_size()), static_cast<double>((sq.row + off.dy) * m.tile_size())};
}

ImageKey window_key(const imagery::Mosaic& m, WindowSquare sq, int pass) {
    const auto off = offset_of(pass);
    const auto& o = m.origin();
    return {{o.x + sq.col + off.dx, o.y + sq.row + off.dy, o.z}, 0, 0};
}

RasterImage window_image(const imagery::Mosaic& m, WindowSquare sq, int pass) {
    const auto off = offset_of(pass);
    const int c = sq.col + off.dx, r = sq.row + off.dy;
    return imagery::stitch_2x2(m.tile_or_black(c, r), m.tile_or_black(c + 1, r), m.tile_or_black(c, r + 1),
                               m.tile_or_black(c + 1, r + 1));
}

SquareScan scan_square(const imagery::Mosaic& m, WindowSquare sq, const Detector& detector, const ScanConfig& cfg) {
    SquareScan out;
    const int side = 2 * m.tile_size();
    const bool left = sq.col == 0, top = sq.row == 0;
    for (int pass = 1; pass <= kPassCount; ++pass) {
        const auto key = window_key(m, sq, pass);
        std::vector<Detection> dets;
        try {
            dets = detector.locate(key, window_image(m, sq, pass));
        } catch (const BackendError& e) {
            out.skipped.push_back({key.str(), pass, e.what()});
            continue;
        }
        const auto off = offset_of(pass);
        const Vec2 shift{static_cast<double>(off.dx * m.tile_size()), static_cast<double>(off.dy * m.tile_size())};
        const Vec2 square_origin{static_cast<double>(sq.col * m.tile_size()), static_cast<double>(sq.row * m.tile_size())};
        for (const auto& d : dets) {
            const Vec2 local = d.bbox.centroid() + shift;
            if (ownership(local, side, cfg.margin_px, left, top) != pass) continue;
            GlobalDetection g;
            g.cls = d.cls;
            g.bbox = {d.bbox.x + shift.x + square_origin.x, d.bbox.y + shift.y + square_origin.y, d.bbox.w, d.bbox.h};
            g.confidence = d.confidence;
            g.square = sq;
            g.pass = pass;
            out.detections.push_back(g);
        }
    }
    return out;
}

std::vector<WindowSquare> region_squares(const imagery::Mosaic& m) {
    std::vector<WindowSquare> squares;
    for (int r = 0; r < m.rows(); r += 2)
        for (int c = 0; c < m.cols(); c += 2) squares.push_back({c, r});
    return squares;
}

RegionScan scan_region(const imagery::Mosaic& m, const Detector& detector, const ScanConfig& cfg) {
    const auto squares = region_squares(m);
    std::vector<SquareScan> per_square(squares.size());
    parallel_for(squares.size(), cfg.workers,
                 [&](std::size_t i) { per_square[i] = scan_square(m, squares[i], detector, cfg); });

    RegionScan out;
    std::vector<GlobalDetection> all;
    for (auto& s : per_square) {
        all.insert(all.end(), s.detections.begin(), s.detections.end());
        out.skipped.insert(out.skipped.end(), s.skipped.begin(), s.skipped.end());
    }
    out.detections = dedup(std::move(all), cfg.dedup_iou);
    out.suspected_oversize = static_cast<int>(std::count_if(out.detections.begin(), out.detections.end(), [&](const auto& d) {
        return d.bbox.w > cfg.max_object_px || d.bbox.h > cfg.max_object_px;
    }));
    return out;
}

std::vector<GlobalDetection> dedup(std::vector<GlobalDetection> dets, double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return centroid_order(a, b);
    });
    std::vector<GlobalDetection> kept;
    for (const auto& d : dets) {
        const bool suppressed =
            std::any_of(kept.begin(), kept.end(), [&](const auto& k) { return iou(d.bbox, k.bbox) >= iou_thresh; });
        if (!suppressed) kept.push_back(d);
    }
    std::stable_sort(kept.begin(), kept.end(), centroid_order);
    return kept;
}

} // namespace dpark::scan
