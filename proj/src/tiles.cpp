#include "dpark/tiles.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include <curl/curl.h>

#include "dpark/parallel.hpp"

namespace dpark::tiles {

namespace fs = std::filesystem;

void TileSource::validate() const {
    if (tile_size != 256 && tile_size != 512) throw InvalidArgument("tile_size must be 256 or 512");
    if (native_zoom < 0 || native_zoom > 30) throw InvalidArgument("native_zoom out of range");
    if (location.empty()) throw InvalidArgument("tile source location is empty");
    if (kind == Kind::url_template) {
        for (const char* ph : {"{x}", "{y}", "{z}"}) {
            if (location.find(ph) == std::string::npos)
                throw InvalidArgument(std::string("url template lacks placeholder ") + ph);
        }
    }
}

std::string expand_template(const std::string& tmpl, const geo::TileCoord& t) {
    std::string out;
    out.reserve(tmpl.size() + 16);
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl.compare(i, 3, "{x}") == 0) {
            out += std::to_string(t.x);
            i += 3;
        } else if (tmpl.compare(i, 3, "{y}") == 0) {
            out += std::to_string(t.y);
            i += 3;
        } else if (tmpl.compare(i, 3, "{z}") == 0) {
            out += std::to_string(t.z);
            i += 3;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

std::string cache_path(const std::string& root, const geo::TileCoord& t) {
    return (fs::path(root) / std::to_string(t.z) / std::to_string(t.x) / (std::to_string(t.y) + ".png")).string();
}

namespace {

struct HttpResponse {
    long status = 0;
    std::vector<std::uint8_t> body;
};

size_t collect_body(char* ptr, size_t size, size_t nmemb, void* userdata) {
    auto* body = static_cast<std::vector<std::uint8_t>*>(userdata);
    body->insert(body->end(), ptr, ptr + size * nmemb);
    return size * nmemb;
}

void ensure_curl() {
    static std::once_flag once;
    std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

// Throws TransportError on connection-level failures.
HttpResponse http_get(const std::string& url, const TileSource& src, std::chrono::milliseconds timeout) {
    ensure_curl();
    std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
    if (!curl) throw TransportError("curl_easy_init failed");
    HttpResponse resp;
    curl_slist* headers = nullptr;
    if (!src.api_key_header.empty() && !src.api_key.empty())
        headers = curl_slist_append(headers, (src.api_key_header + ": " + src.api_key).c_str());
    std::unique_ptr<curl_slist, decltype(&curl_slist_free_all)> header_guard(headers, curl_slist_free_all);
    curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl.get(), CURLOPT_NOSIGNAL, 1L);
    curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT_MS, static_cast<long>(timeout.count()));
    curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, collect_body);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &resp.body);
    if (headers) curl_easy_setopt(curl.get(), CURLOPT_HTTPHEADER, headers);
    const auto rc = curl_easy_perform(curl.get());
    if (rc != CURLE_OK) throw TransportError(url + ": " + curl_easy_strerror(rc));
    curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &resp.status);
    return resp;
}

std::optional<std::vector<std::uint8_t>> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::optional<RasterImage> read_local(const TileSource& src, const geo::TileCoord& t) {
    const auto dir = fs::path(src.location) / std::to_string(t.z) / std::to_string(t.x);
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        const auto p = dir / (std::to_string(t.y) + ext);
        if (auto bytes = read_file(p)) {
            try {
                return decode_image(*bytes);
            } catch (const ParseError& e) {
                throw ParseError(p.string() + ": " + e.what());
            }
        }
    }
    return std::nullopt;
}

std::optional<RasterImage> fetch_remote(const TileSource& src, const geo::TileCoord& t, const FetchOptions& opts) {
    const auto url = expand_template(src.location, t);
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, opts.attempts); ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(opts.backoff * (1 << (attempt - 1)));
        try {
            const auto resp = http_get(url, src, opts.timeout);
            if (resp.status == 404 || resp.status == 204) return std::nullopt;
            if (resp.status >= 200 && resp.status < 300) return decode_image(resp.body);
            last_error = url + ": HTTP " + std::to_string(resp.status);
            if (resp.status >= 400 && resp.status < 500) break;
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw TransportError(last_error);
}

} // namespace

std::optional<RasterImage> fetch_tile(const TileSource& src, const geo::TileCoord& t, const std::string& cache_dir,
                                      const FetchOptions& opts) {
    if (!geo::is_valid(t)) throw InvalidArgument("tile outside the zoom level's grid");
    if (!cache_dir.empty()) {
        if (auto bytes = read_file(cache_path(cache_dir, t))) {
            try {
                return decode_image(*bytes);
            } catch (const ParseError&) {
                // Corrupt cache entry; fall through and refetch.
            }
        }
    }
    auto img = src.kind == TileSource::Kind::local_directory ? read_local(src, t) : fetch_remote(src, t, opts);
    if (img && !cache_dir.empty()) write_png(cache_path(cache_dir, t), *img);
    return img;
}

std::vector<std::optional<RasterImage>> fetch_tiles(const TileSource& src, const std::vector<geo::TileCoord>& coords,
                                                    const std::string& cache_dir, const FetchOptions& opts) {
    std::vector<std::optional<RasterImage>> out(coords.size());
    parallel_for(coords.size(), static_cast<std::size_t>(std::max(1, opts.max_in_flight)),
                 [&](std::size_t i) { out[i] = fetch_tile(src, coords[i], cache_dir, opts); });
    return out;
}

MosaicLoad load_mosaic(const TileSource& src, const std::vector<geo::TileCoord>& coords, const std::string& cache_dir,
                       const FetchOptions& opts) {
    if (coords.empty()) throw InvalidArgument("no tiles to load");
    const auto [xmin, xmax] = std::minmax_element(coords.begin(), coords.end(),
                                                  [](const auto& a, const auto& b) { return a.x < b.x; });
    const auto [ymin, ymax] = std::minmax_element(coords.begin(), coords.end(),
                                                  [](const auto& a, const auto& b) { return a.y < b.y; });
    const geo::TileCoord origin{xmin->x, ymin->y, coords.front().z};
    MosaicLoad load{imagery::Mosaic(origin, static_cast<int>(xmax->x - xmin->x + 1),
                                    static_cast<int>(ymax->y - ymin->y + 1)),
                    {}};
    auto images = fetch_tiles(src, coords, cache_dir, opts);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& t = coords[i];
        if (!images[i]) {
            load.missing.push_back(t);
            continue;
        }
        auto img = std::move(*images[i]);
        if (img.width() != imagery::kTileSize || img.height() != imagery::kTileSize)
            img = imagery::resample_lanczos(img, imagery::kTileSize, imagery::kTileSize);
        load.mosaic.set_tile(static_cast<int>(t.x - origin.x), static_cast<int>(t.y - origin.y), std::move(img));
    }
    return load;
}

} // namespace dpark::tiles
