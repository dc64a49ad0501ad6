#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dpark/detector.hpp"
#include "dpark/imagery.hpp"

namespace dpark::scan {

struct ScanConfig {
    /// Centroids closer than this to a window border are left to another pass.
    int margin_px = 50;
    /// Largest object extent the pass layout guarantees to see whole; larger boxes are counted.
    int max_object_px = 100;
    double dedup_iou = 0.5;
    std::size_t workers = 4;
};

/// A 2x2 block of tiles, addressed by the mosaic grid position of its top-left tile.
struct WindowSquare {
    int col = 0;
    int row = 0;
    friend bool operator==(const WindowSquare&, const WindowSquare&) = default;
};

// The four passes of one square, each a 2x2-tile window:
//   1: the square itself          2: shifted one tile right
//   3: shifted one tile down      4: shifted one tile right and down
inline constexpr int kPassCount = 4;

/// Which pass keeps an object whose centroid sits at `local` (pixels from the square's
/// top-left corner). 0 means no pass of this square owns it. With side S and margin m:
/// pass 1 owns [m, S-m] on both axes, the seam passes own (S-m, S+m) on their seam axis,
/// pass 4 owns the (S-m, S+m)^2 corner. On a region's left/top boundary the lower margin
/// is waived so objects along the region edge are kept.
int ownership(Vec2 local, int side, int margin, bool left_boundary = false, bool top_boundary = false);

/// Keep region of a single pass, tested on its own (ownership() returns the first pass that keeps).
bool keeps(int pass, Vec2 local, int side, int margin, bool left_boundary = false, bool top_boundary = false);

struct GlobalDetection {
    ParkingClass cls = ParkingClass::dp_one_aisle;
    Box bbox; ///< mosaic pixel coordinates
    double confidence = 0.0;
    WindowSquare square;
    int pass = 0;

    friend bool operator==(const GlobalDetection&, const GlobalDetection&) = default;
};

struct SkippedWindow {
    std::string key;
    int pass = 0;
    std::string reason;
};

struct SquareScan {
    std::vector<GlobalDetection> detections;
    std::vector<SkippedWindow> skipped;
};

/// Top-left mosaic pixel of the window used by `pass`.
Vec2 window_origin(const imagery::Mosaic& m, WindowSquare sq, int pass);
ImageKey window_key(const imagery::Mosaic& m, WindowSquare sq, int pass);
RasterImage window_image(const imagery::Mosaic& m, WindowSquare sq, int pass);

/// Runs the four passes of one square (four locate calls) and keeps each detection only in
/// the pass that owns its centroid. Backend failures skip the pass and are reported.
SquareScan scan_square(const imagery::Mosaic& m, WindowSquare sq, const Detector& detector, const ScanConfig& cfg = {});

/// Squares tiling the mosaic at a stride of two tiles, row-major.
std::vector<WindowSquare> region_squares(const imagery::Mosaic& m);

struct RegionScan {
    std::vector<GlobalDetection> detections;
    std::vector<SkippedWindow> skipped;
    /// Kept detections with a side longer than max_object_px.
    int suspected_oversize = 0;
};

/// Scans every square concurrently, deduplicates, and sorts by centroid (y, then x).
RegionScan scan_region(const imagery::Mosaic& m, const Detector& detector, const ScanConfig& cfg = {});

/// Greedy NMS: highest confidence first, a detection survives iff its IoU with every kept one
/// is below `iou_thresh`.
std::vector<GlobalDetection> dedup(std::vector<GlobalDetection> dets, double iou_thresh);

} // namespace dpark::scan
