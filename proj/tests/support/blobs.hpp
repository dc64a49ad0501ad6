#pragma once

#include <atomic>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dpark/detector.hpp"
#include "dpark/imagery.hpp"
#include "dpark/raster.hpp"

namespace dpark::testing {

// Objects are painted as solid rectangles whose red channel encodes the class.
Rgb class_color(ParkingClass c);
std::optional<ParkingClass> color_class(Rgb px);

// 4-connected components of non-black pixels, one Detection per component with the
// component's bounding box (right/bottom exclusive). Confidence is the green channel / 255.
std::vector<Detection> find_blobs(const RasterImage& img);

// A locator that "sees" painted rectangles, cut off at the window border like a real
// detector would report a partly visible object.
class BlobBackend : public Backend {
public:
    std::vector<Detection> locate(const ImageKey&, const RasterImage& img) override { return find_blobs(img); }
    std::vector<OBBDetection> orient(const ImageKey&, const RasterImage&) override { return {}; }
};

// Forwards to another backend and records every locate key.
class CountingBackend : public Backend {
public:
    explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
    std::vector<Detection> locate(const ImageKey& key, const RasterImage& img) override {
        {
            std::lock_guard lock(mutex_);
            keys_.push_back(key.str());
        }
        return inner_->locate(key, img);
    }
    std::vector<OBBDetection> orient(const ImageKey& key, const RasterImage& img) override {
        return inner_->orient(key, img);
    }
    std::vector<std::string> keys() const {
        std::lock_guard lock(mutex_);
        return keys_;
    }

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mutex_;
    std::vector<std::string> keys_;
};

struct PaintedScene {
    RasterImage image; // the whole region
    imagery::Mosaic mosaic;
    std::vector<Box> rects; // painted rectangles, mosaic pixels, right/bottom exclusive
};

// `count` non-touching rectangles with sides in [4, max_side], about half of them centred near
// tile seams or seam corners, some flush against the region border.
PaintedScene random_painted_scene(std::mt19937_64& rng, geo::TileCoord origin, int cols, int rows, int count,
                                  int max_side = 100);

// Splits a region image into a mosaic of 256-px tiles.
imagery::Mosaic to_mosaic(const RasterImage& image, geo::TileCoord origin);

} // namespace dpark::testing
