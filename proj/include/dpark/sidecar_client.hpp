#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/detector.hpp"

namespace dpark {

/// Moves one request/reply pair over some connection to an inference sidecar.
class SidecarTransport {
public:
    virtual ~SidecarTransport() = default;
    /// Sends {"hello": 1} and returns the sidecar's reply.
    virtual nlohmann::json handshake(std::chrono::milliseconds timeout) = 0;
    /// Sends `request` (which carries `id`) and returns the reply with the same id.
    /// Throws TimeoutError, BackendUnavailable or ProtocolError naming `id`.
    virtual nlohmann::json call(const nlohmann::json& request, const std::string& id,
                                std::chrono::milliseconds timeout) = 0;
};

/// Newline-delimited JSON over the stdin/stdout of a child process. Requests are pipelined
/// over the single pipe; a reader thread routes replies by id.
std::unique_ptr<SidecarTransport> make_stdio_transport(const std::vector<std::string>& argv);

/// One HTTP POST per request to `url` (e.g. http://127.0.0.1:8080/infer).
std::unique_ptr<SidecarTransport> make_http_transport(const std::string& url);

struct SidecarOptions {
    std::chrono::milliseconds request_timeout{30000};
    std::chrono::milliseconds handshake_timeout{30000};
};

/// Backend that forwards locate/orient to an external model server. Thread-safe; request ids
/// are unique for the client's lifetime.
class SidecarClient final : public Backend {
public:
    /// Performs the handshake; throws HandshakeError when it fails or the sidecar lacks a task.
    SidecarClient(std::unique_ptr<SidecarTransport> transport, SidecarOptions options = {});

    /// `endpoint` is either an http(s):// URL or a shell-free command line run as a subprocess.
    static std::shared_ptr<SidecarClient> connect(const std::string& endpoint, SidecarOptions options = {});

    std::vector<Detection> locate(const ImageKey& key, const RasterImage& img) override;
    std::vector<OBBDetection> orient(const ImageKey& key, const RasterImage& img) override;

    /// Raw request for one task; returns the validated reply document.
    nlohmann::json request(const std::string& task, const RasterImage& img);

private:
    std::unique_ptr<SidecarTransport> transport_;
    SidecarOptions options_;
    std::atomic<std::uint64_t> next_id_{0};
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Splits a command line on whitespace, honouring double quotes.
std::vector<std::string> split_command(const std::string& cmd);

} // namespace dpark
