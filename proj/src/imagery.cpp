#include "dpark/imagery.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dpark/error.hpp"

namespace dpark::imagery {

std::vector<geo::TileCoord> enumerate_tiles(const BBox& bbox, int z) {
    const auto& tl = bbox.top_left;
    const auto& br = bbox.bottom_right;
    if (tl.lon > br.lon || tl.lat < br.lat) throw InvalidArgument("bbox top-left must be north-west of bottom-right");
    const auto a = geo::lonlat_to_global(tl, z);
    const auto b = geo::lonlat_to_global(br, z);
    const auto n = static_cast<std::int64_t>(geo::world_tiles(z));
    // Tile i covers [i, i+1); an upper edge lying exactly on a seam does not reach the next tile.
    const auto last = [](double lo, double hi) {
        const double f = std::floor(hi);
        return static_cast<std::int64_t>(hi > lo && f == hi ? f - 1 : f);
    };
    const auto clamp = [n](std::int64_t v) { return std::clamp<std::int64_t>(v, 0, n - 1); };
    const auto x0 = clamp(static_cast<std::int64_t>(std::floor(a.xf))), x1 = clamp(last(a.xf, b.xf));
    const auto y0 = clamp(static_cast<std::int64_t>(std::floor(a.yf))), y1 = clamp(last(a.yf, b.yf));
    std::vector<geo::TileCoord> out;
    out.reserve(static_cast<std::size_t>((x1 - x0 + 1) * (y1 - y0 + 1)));
    for (auto y = y0; y <= y1; ++y)
        for (auto x = x0; x <= x1; ++x) out.push_back({x, y, z});
    return out;
}

RasterImage stitch_2x2(const RasterImage& tl, const RasterImage& tr, const RasterImage& bl, const RasterImage& br) {
    const int n = tl.width();
    for (const auto* img : {&tl, &tr, &bl, &br}) {
        if (img->width() != n || img->height() != n) throw InvalidArgument("stitch_2x2 requires four equal square tiles");
    }
    RasterImage out(2 * n, 2 * n);
    out.blit(tl, 0, 0);
    out.blit(tr, 0, n);
    out.blit(bl, n, 0);
    out.blit(br, n, n);
    return out;
}

namespace {

constexpr double kLanczosA = 3.0;
// Fixed-point weights as in Pillow's 8-bit resampler, so tiles match what Pillow produces.
constexpr int kPrecisionBits = 32 - 8 - 2;

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

double lanczos(double x) {
    if (x < -kLanczosA || x >= kLanczosA) return 0.0;
    return sinc(x) * sinc(x / kLanczosA);
}

struct Taps {
    int first = 0;
    std::vector<std::int32_t> weights;
};

// Support widened by the reduction factor when shrinking; weights normalized, then quantized.
std::vector<Taps> compute_taps(int in_size, int out_size) {
    const double scale = static_cast<double>(in_size) / out_size;
    const double filter_scale = std::max(scale, 1.0);
    const double support = kLanczosA * filter_scale;
    std::vector<Taps> taps(out_size);
    std::vector<double> w;
    for (int i = 0; i < out_size; ++i) {
        const double center = (i + 0.5) * scale;
        const int lo = std::max(0, static_cast<int>(center - support + 0.5));
        const int hi = std::min(in_size, static_cast<int>(center + support + 0.5));
        w.clear();
        double total = 0.0;
        for (int j = lo; j < hi; ++j) {
            w.push_back(lanczos((j - center + 0.5) / filter_scale));
            total += w.back();
        }
        auto& t = taps[i];
        t.first = lo;
        for (double v : w) {
            if (total != 0.0) v /= total;
            const double fixed = v * (1 << kPrecisionBits);
            t.weights.push_back(static_cast<std::int32_t>(fixed < 0 ? fixed - 0.5 : fixed + 0.5));
        }
    }
    return taps;
}

std::uint8_t clip8(std::int64_t acc) {
    const std::int64_t v = acc >> kPrecisionBits;
    return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, 0, 255));
}

RasterImage horizontal_pass(const RasterImage& img, int target_width) {
    const auto taps = compute_taps(img.width(), target_width);
    RasterImage out(target_width, img.height());
    const auto src = img.bytes();
    auto dst = out.bytes();
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < target_width; ++c) {
            const auto& t = taps[c];
            std::int64_t acc[3] = {1 << (kPrecisionBits - 1), 1 << (kPrecisionBits - 1), 1 << (kPrecisionBits - 1)};
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const auto i = (static_cast<std::size_t>(r) * img.width() + t.first + k) * 3;
                for (int ch = 0; ch < 3; ++ch) acc[ch] += std::int64_t{src[i + ch]} * t.weights[k];
            }
            const auto o = (static_cast<std::size_t>(r) * target_width + c) * 3;
            for (int ch = 0; ch < 3; ++ch) dst[o + ch] = clip8(acc[ch]);
        }
    }
    return out;
}

RasterImage vertical_pass(const RasterImage& img, int target_height) {
    const auto taps = compute_taps(img.height(), target_height);
    RasterImage out(img.width(), target_height);
    const auto src = img.bytes();
    auto dst = out.bytes();
    const auto w = static_cast<std::size_t>(img.width());
    for (int r = 0; r < target_height; ++r) {
        const auto& t = taps[r];
        for (std::size_t c = 0; c < w; ++c) {
            std::int64_t acc[3] = {1 << (kPrecisionBits - 1), 1 << (kPrecisionBits - 1), 1 << (kPrecisionBits - 1)};
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const auto i = ((t.first + k) * w + c) * 3;
                for (int ch = 0; ch < 3; ++ch) acc[ch] += std::int64_t{src[i + ch]} * t.weights[k];
            }
            const auto o = (r * w + c) * 3;
            for (int ch = 0; ch < 3; ++ch) dst[o + ch] = clip8(acc[ch]);
        }
    }
    return out;
}

} // namespace

RasterImage resample_lanczos(const RasterImage& img, int target_width, int target_height) {
    if (target_width < 1 || target_height < 1) throw InvalidArgument("resample target must be >= 1");
    if (img.empty()) throw InvalidArgument("cannot resample an empty image");
    // Horizontal first, each pass rounded to 8 bits; a pass whose size is unchanged is skipped.
    RasterImage out = target_width == img.width() ? img : horizontal_pass(img, target_width);
    if (target_height != out.height()) out = vertical_pass(out, target_height);
    return out;
}

Mosaic::Mosaic(geo::TileCoord origin, int cols, int rows, int tile_size)
    : origin_(origin), cols_(cols), rows_(rows), tile_size_(tile_size) {
    if (cols < 0 || rows < 0 || tile_size <= 0) throw InvalidArgument("invalid mosaic dimensions");
    tiles_.resize(static_cast<std::size_t>(cols) * rows);
}

const RasterImage* Mosaic::tile(int col, int row) const {
    if (col < 0 || row < 0 || col >= cols_ || row >= rows_) return nullptr;
    const auto& t = tiles_[static_cast<std::size_t>(row) * cols_ + col];
    return t ? &*t : nullptr;
}

void Mosaic::set_tile(int col, int row, RasterImage img) {
    if (col < 0 || row < 0 || col >= cols_ || row >= rows_) throw InvalidArgument("tile position outside mosaic");
    if (img.width() != tile_size_ || img.height() != tile_size_)
        throw InvalidArgument("tile is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                              ", mosaic expects " + std::to_string(tile_size_));
    tiles_[static_cast<std::size_t>(row) * cols_ + col] = std::move(img);
}

RasterImage Mosaic::tile_or_black(int col, int row) const {
    if (const auto* t = tile(col, row)) return *t;
    return RasterImage(tile_size_, tile_size_);
}

RasterImage Mosaic::extract(int x0, int y0, int width, int height, bool* padded) const {
    RasterImage out(width, height);
    bool pad = false;
    const auto floordiv = [](int a, int b) { return a / b - ((a % b != 0) && (a < 0)); };
    const int tc0 = floordiv(x0, tile_size_), tc1 = floordiv(x0 + width - 1, tile_size_);
    const int tr0 = floordiv(y0, tile_size_), tr1 = floordiv(y0 + height - 1, tile_size_);
    for (int tr = tr0; tr <= tr1; ++tr) {
        for (int tc = tc0; tc <= tc1; ++tc) {
            if (const auto* t = tile(tc, tr)) {
                out.blit(*t, tr * tile_size_ - y0, tc * tile_size_ - x0);
            } else {
                pad = true;
            }
        }
    }
    if (padded) *padded = pad;
    return out;
}

geo::GlobalTilePoint Mosaic::to_global(double x, double y) const {
    return {static_cast<double>(origin_.x) + x / tile_size_, static_cast<double>(origin_.y) + y / tile_size_,
            origin_.z};
}

void Mosaic::from_global(const geo::GlobalTilePoint& p, double& x, double& y) const {
    x = (p.xf - static_cast<double>(origin_.x)) * tile_size_;
    y = (p.yf - static_cast<double>(origin_.y)) * tile_size_;
}

void crop_origin(double cx, double cy, int size, int& origin_x, int& origin_y) {
    origin_x = static_cast<int>(std::lround(cx - size / 2.0));
    origin_y = static_cast<int>(std::lround(cy - size / 2.0));
}

Crop crop_centered(const Mosaic& m, double cx, double cy, int size) {
    if (size <= 0) throw InvalidArgument("crop size must be positive");
    if (!(cx >= 0 && cy >= 0 && cx <= m.width_px() && cy <= m.height_px()))
        throw InvalidArgument("crop center outside mosaic");
    Crop crop;
    crop_origin(cx, cy, size, crop.origin_x, crop.origin_y);
    crop.image = m.extract(crop.origin_x, crop.origin_y, size, size, &crop.padded);
    return crop;
}

} // namespace dpark::imagery
