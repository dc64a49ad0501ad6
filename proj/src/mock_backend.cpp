#include "dpark/mock_backend.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "dpark/detector_json.hpp"

namespace dpark {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Box-Muller over a 53-bit uniform; std::normal_distribution is implementation-defined.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : engine_(seed) {}
    double operator()(double sigma) {
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scenario must be a JSON object");
    for (const auto& [name, _] : j.items())
        if (name != "locate" && name != "orient") throw ParseError("unexpected scenario section '" + name + "'");
    Scenario s;
    const auto section = [&](const char* name, auto&& each) {
        if (!j.contains(name)) return;
        const auto& m = j.at(name);
        if (!m.is_object()) throw ParseError(std::string("scenario section ") + name + " must be an object");
        for (const auto& [key, dets] : m.items()) {
            ImageKey::parse(key);
            try {
                each(key, dets);
            } catch (const ParseError& e) {
                throw ParseError(std::string(name) + " entry " + key + ": " + e.what());
            }
        }
    };
    section("locate", [&](const std::string& key, const nlohmann::json& d) { s.locate[key] = detections_from_json(d); });
    section("orient",
            [&](const std::string& key, const nlohmann::json& d) { s.orient[key] = obb_detections_from_json(d); });
    return s;
}

nlohmann::json to_json(const Scenario& s) {
    nlohmann::json j = {{"locate", nlohmann::json::object()}, {"orient", nlohmann::json::object()}};
    for (const auto& [key, dets] : s.locate) {
        auto& arr = j["locate"][key] = nlohmann::json::array();
        for (const auto& d : dets) arr.push_back(to_json(d));
    }
    for (const auto& [key, dets] : s.orient) {
        auto& arr = j["orient"][key] = nlohmann::json::array();
        for (const auto& d : dets) arr.push_back(to_json(d));
    }
    return j;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

void save_scenario(const std::string& path, const Scenario& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario " + path);
    out << to_json(s).dump(1) << '\n';
}

MockBackend::MockBackend(Scenario scenario, Jitter jitter) : scenario_(std::move(scenario)), jitter_(jitter) {
    if (!(jitter_.sigma_px >= 0.0)) throw InvalidArgument("jitter sigma must be non-negative");
}

std::uint64_t MockBackend::next_call(const std::string& task_key) {
    std::lock_guard lock(mutex_);
    return calls_[task_key]++;
}

std::vector<Detection> MockBackend::locate(const ImageKey& key, const RasterImage&) {
    const auto k = key.str();
    const auto it = scenario_.locate.find(k);
    if (it == scenario_.locate.end()) return {};
    auto dets = it->second;
    if (jitter_.sigma_px > 0.0) {
        const auto call = next_call("locate:" + k);
        Gaussian noise(splitmix64(jitter_.seed ^ fnv1a("locate:" + k) ^ splitmix64(call)));
        for (auto& d : dets) {
            const Vec2 c = d.bbox.centroid();
            const double cx = c.x + noise(jitter_.sigma_px), cy = c.y + noise(jitter_.sigma_px);
            const double w = std::max(1.0, d.bbox.w + noise(jitter_.sigma_px));
            const double h = std::max(1.0, d.bbox.h + noise(jitter_.sigma_px));
            d.bbox = {cx - w / 2.0, cy - h / 2.0, w, h};
        }
    }
    return dets;
}

std::vector<OBBDetection> MockBackend::orient(const ImageKey& key, const RasterImage&) {
    const auto k = key.str();
    const auto it = scenario_.orient.find(k);
    if (it == scenario_.orient.end()) return {};
    auto dets = it->second;
    if (jitter_.sigma_px > 0.0) {
        const auto call = next_call("orient:" + k);
        Gaussian noise(splitmix64(jitter_.seed ^ fnv1a("orient:" + k) ^ splitmix64(call)));
        for (auto& d : dets) {
            auto& b = d.obb;
            const Vec2 c{b.center.x + noise(jitter_.sigma_px), b.center.y + noise(jitter_.sigma_px)};
            const double len = std::max(1.0, b.length + noise(jitter_.sigma_px));
            const double wid = std::max(1.0, b.width + noise(jitter_.sigma_px));
            b = OrientedBox::normalized(c, len, wid, b.theta);
        }
    }
    return dets;
}

} // namespace dpark
