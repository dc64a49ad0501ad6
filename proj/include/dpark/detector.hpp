#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpark/error.hpp"
#include "dpark/geo.hpp"
#include "dpark/geometry.hpp"
#include "dpark/raster.hpp"

namespace dpark {

enum class ParkingClass { access_aisle, curbside, dp_no_aisle, dp_one_aisle, dp_two_aisle, one_aisle, two_aisle };

inline constexpr std::array<ParkingClass, 7> kAllParkingClasses = {
    ParkingClass::access_aisle, ParkingClass::curbside,  ParkingClass::dp_no_aisle, ParkingClass::dp_one_aisle,
    ParkingClass::dp_two_aisle, ParkingClass::one_aisle, ParkingClass::two_aisle};

std::string_view to_string(ParkingClass c);
std::optional<ParkingClass> parse_parking_class(std::string_view name);

/// Locator output in window pixel coordinates.
struct Detection {
    ParkingClass cls = ParkingClass::dp_one_aisle;
    Box bbox;
    double confidence = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class ObbKind { space, aisle };

std::string_view to_string(ObbKind k);
std::optional<ObbKind> parse_obb_kind(std::string_view name);

struct OBBDetection {
    ObbKind kind = ObbKind::space;
    OrientedBox obb;
    double confidence = 0.0;

    friend bool operator==(const OBBDetection&, const OBBDetection&) = default;
};

/// Identifies an image handed to a backend: the tile holding its top-left pixel and the
/// pixel offset of that corner inside the tile. Text form `z/x/y@ox,oy`.
struct ImageKey {
    geo::TileCoord tile;
    int offset_x = 0;
    int offset_y = 0;

    std::string str() const;
    static ImageKey parse(std::string_view text);
    friend bool operator==(const ImageKey&, const ImageKey&) = default;
};

/// A per-request failure. The pipeline degrades the affected window instead of aborting.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& what, std::string request_id = {})
        : Error(what), request_id_(std::move(request_id)) {}
    const std::string& request_id() const { return request_id_; }

private:
    std::string request_id_;
};

class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};
class HandshakeError : public BackendError {
public:
    using BackendError::BackendError;
};
class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Raw detection backend. Implementations must accept concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::vector<Detection> locate(const ImageKey& key, const RasterImage& img) = 0;
    virtual std::vector<OBBDetection> orient(const ImageKey& key, const RasterImage& img) = 0;
};

struct DetectorThresholds {
    double locate = 0.3;
    double orient = 0.3;
};

inline constexpr int kLocateInputSize = 512;
inline constexpr int kOrientInputSize = 100;

/// Backend-agnostic front end: checks input sizes and applies confidence thresholds
/// identically for every backend. Locate results never carry access_aisle.
class Detector {
public:
    Detector(std::shared_ptr<Backend> backend, DetectorThresholds thresholds = {});

    std::vector<Detection> locate(const ImageKey& key, const RasterImage& img) const;
    std::vector<OBBDetection> orient(const ImageKey& key, const RasterImage& img) const;

    const DetectorThresholds& thresholds() const { return thresholds_; }

private:
    std::shared_ptr<Backend> backend_;
    DetectorThresholds thresholds_;
};

} // namespace dpark
