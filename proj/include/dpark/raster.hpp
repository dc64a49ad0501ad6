#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dpark {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, rows stored top to bottom.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, Rgb fill = {0, 0, 0});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb at(int row, int col) const;
    void set(int row, int col, Rgb value);

    std::span<const std::uint8_t> bytes() const { return data_; }
    std::span<std::uint8_t> bytes() { return data_; }

    /// Copies `src` with its top-left pixel at (row, col); out-of-range parts are clipped.
    void blit(const RasterImage& src, int row, int col);

    /// Filled axis-aligned rectangle, clipped to the image.
    void fill_rect(int row, int col, int height, int width, Rgb value);

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

std::vector<std::uint8_t> encode_png(const RasterImage& img);
/// Decodes PNG or JPEG (sniffed from the magic bytes) into 8-bit RGB.
RasterImage decode_image(std::span<const std::uint8_t> bytes);

RasterImage read_image(const std::string& path);
/// Writes a PNG through a temporary file and rename, so concurrent writers never expose a partial file.
void write_png(const std::string& path, const RasterImage& img);

} // namespace dpark
