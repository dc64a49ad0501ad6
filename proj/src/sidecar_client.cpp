#include "dpark/sidecar_client.hpp"

#include <csignal>
#include <condition_variable>
#include <future>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "dpark/detector_json.hpp"

namespace dpark {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (const auto rest = bytes.size() - i; rest > 0) {
        const std::uint32_t v = (bytes[i] << 16) | (rest == 2 ? bytes[i + 1] << 8 : 0);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::string> split_command(const std::string& cmd) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, have = false;
    for (char c : cmd) {
        if (c == '"') {
            quoted = !quoted;
            have = true;
        } else if (!quoted && std::isspace(static_cast<unsigned char>(c))) {
            if (have) out.push_back(std::move(cur));
            cur.clear();
            have = false;
        } else {
            cur += c;
            have = true;
        }
    }
    if (quoted) throw InvalidArgument("unterminated quote in command '" + cmd + "'");
    if (have) out.push_back(std::move(cur));
    return out;
}

namespace {

class StdioTransport final : public SidecarTransport {
public:
    explicit StdioTransport(const std::vector<std::string>& argv) {
        if (argv.empty()) throw InvalidArgument("empty sidecar command");
        static std::once_flag sigpipe_once;
        std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

        int to_child[2], from_child[2];
        if (pipe2(to_child, O_CLOEXEC) != 0) throw BackendUnavailable("pipe failed");
        if (pipe2(from_child, O_CLOEXEC) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw BackendUnavailable("pipe failed");
        }
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        pid_ = fork();
        if (pid_ < 0) throw BackendUnavailable("fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            execvp(args[0], args.data());
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ~StdioTransport() override {
        if (write_fd_ >= 0) close(write_fd_);
        int status = 0;
        bool exited = false;
        for (int i = 0; i < 20 && !exited; ++i) {
            exited = waitpid(pid_, &status, WNOHANG) == pid_;
            if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        if (!exited) {
            kill(pid_, SIGKILL);
            waitpid(pid_, &status, 0);
        }
        if (reader_.joinable()) reader_.join();
        close(read_fd_);
    }

    nlohmann::json handshake(std::chrono::milliseconds timeout) override {
        write_line(nlohmann::json{{"hello", 1}}.dump());
        std::string line;
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        if (!read_line(line, deadline)) throw HandshakeError("sidecar closed or timed out during handshake");
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw HandshakeError("handshake reply is not JSON: " + line);
        }
        reader_ = std::thread([this] { reader_loop(); });
        return reply;
    }

    nlohmann::json call(const nlohmann::json& request, const std::string& id,
                        std::chrono::milliseconds timeout) override {
        std::future<nlohmann::json> reply;
        {
            std::lock_guard lock(mutex_);
            if (closed_) throw BackendUnavailable("sidecar connection closed", id);
            auto& p = pending_[id];
            p.seq = next_seq_++;
            order_[p.seq] = id;
            reply = p.promise.get_future();
        }
        try {
            write_line(request.dump());
        } catch (...) {
            forget(id);
            throw;
        }
        if (reply.wait_for(timeout) != std::future_status::ready) {
            forget(id);
            throw TimeoutError("request " + id + " timed out after " + std::to_string(timeout.count()) + " ms", id);
        }
        return reply.get();
    }

private:
    struct Pending {
        std::uint64_t seq = 0;
        std::promise<nlohmann::json> promise;
    };

    void forget(const std::string& id) {
        std::lock_guard lock(mutex_);
        if (const auto it = pending_.find(id); it != pending_.end()) {
            order_.erase(it->second.seq);
            pending_.erase(it);
        }
    }

    void write_line(const std::string& text) {
        std::lock_guard lock(write_mutex_);
        std::string data = text + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            const auto n = ::write(write_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BackendUnavailable("write to sidecar failed");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    // Returns false on EOF or when the deadline passes.
    bool read_line(std::string& line, std::optional<std::chrono::steady_clock::time_point> deadline = {}) {
        for (;;) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return true;
            }
            if (deadline) {
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    *deadline - std::chrono::steady_clock::now());
                if (left.count() <= 0) return false;
                pollfd pfd{read_fd_, POLLIN, 0};
                const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
                if (rc == 0) return false;
                if (rc < 0 && errno != EINTR) return false;
                if (rc < 0) continue;
            }
            char chunk[65536];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void reader_loop() {
        std::string line;
        while (read_line(line)) {
            if (line.empty()) continue;
            nlohmann::json reply;
            bool parsed = true;
            try {
                reply = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                parsed = false;
            }
            std::lock_guard lock(mutex_);
            if (parsed && reply.is_object() && reply.contains("id") && reply.at("id").is_string()) {
                const auto id = reply.at("id").get<std::string>();
                if (const auto it = pending_.find(id); it != pending_.end()) {
                    it->second.promise.set_value(std::move(reply));
                    order_.erase(it->second.seq);
                    pending_.erase(it);
                }
                continue;
            }
            // No usable id: the sidecar answers in order, so blame the oldest outstanding request.
            if (order_.empty()) continue;
            const auto id = order_.begin()->second;
            auto it = pending_.find(id);
            it->second.promise.set_exception(std::make_exception_ptr(
                ProtocolError("malformed reply for request " + id + ": " + line.substr(0, 200), id)));
            order_.erase(order_.begin());
            pending_.erase(it);
        }
        std::lock_guard lock(mutex_);
        closed_ = true;
        for (auto& [id, p] : pending_)
            p.promise.set_exception(std::make_exception_ptr(BackendUnavailable("sidecar exited before replying to " + id, id)));
        pending_.clear();
        order_.clear();
    }

    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    std::thread reader_;
    std::mutex write_mutex_;
    std::mutex mutex_;
    bool closed_ = false;
    std::uint64_t next_seq_ = 0;
    std::unordered_map<std::string, Pending> pending_;
    std::map<std::uint64_t, std::string> order_;
};

class HttpTransport final : public SidecarTransport {
public:
    explicit HttpTransport(const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw InvalidArgument("sidecar URL lacks a scheme: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        base_ = url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    }

    nlohmann::json handshake(std::chrono::milliseconds timeout) override {
        try {
            return post(nlohmann::json{{"hello", 1}}, "", timeout);
        } catch (const BackendError& e) {
            throw HandshakeError(std::string("handshake failed: ") + e.what());
        }
    }

    nlohmann::json call(const nlohmann::json& request, const std::string& id,
                        std::chrono::milliseconds timeout) override {
        return post(request, id, timeout);
    }

private:
    nlohmann::json post(const nlohmann::json& body, const std::string& id, std::chrono::milliseconds timeout) {
        httplib::Client client(base_);
        const auto secs = static_cast<time_t>(timeout.count() / 1000);
        const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(path_, body.dump(), "application/json");
        if (!res) {
            if (res.error() == httplib::Error::Read)
                throw TimeoutError("request " + id + " timed out or lost its connection", id);
            throw BackendUnavailable("request " + id + ": " + httplib::to_string(res.error()), id);
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw ProtocolError("malformed reply for request " + id + " (HTTP " + std::to_string(res->status) + ")", id);
        }
        return reply;
    }

    std::string base_;
    std::string path_;
};

} // namespace

std::unique_ptr<SidecarTransport> make_stdio_transport(const std::vector<std::string>& argv) {
    return std::make_unique<StdioTransport>(argv);
}

std::unique_ptr<SidecarTransport> make_http_transport(const std::string& url) {
    return std::make_unique<HttpTransport>(url);
}

SidecarClient::SidecarClient(std::unique_ptr<SidecarTransport> transport, SidecarOptions options)
    : transport_(std::move(transport)), options_(options) {
    const auto reply = transport_->handshake(options_.handshake_timeout);
    if (!reply.is_object() || reply.value("hello", 0) != 1 || !reply.contains("tasks") || !reply.at("tasks").is_array())
        throw HandshakeError("unexpected handshake reply: " + reply.dump());
    bool has_locate = false, has_orient = false;
    for (const auto& t : reply.at("tasks")) {
        has_locate = has_locate || t == "locate";
        has_orient = has_orient || t == "orient";
    }
    if (!has_locate || !has_orient) throw HandshakeError("sidecar does not offer both locate and orient");
}

std::shared_ptr<SidecarClient> SidecarClient::connect(const std::string& endpoint, SidecarOptions options) {
    if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0)
        return std::make_shared<SidecarClient>(make_http_transport(endpoint), options);
    return std::make_shared<SidecarClient>(make_stdio_transport(split_command(endpoint)), options);
}

nlohmann::json SidecarClient::request(const std::string& task, const RasterImage& img) {
    const auto id = "req-" + std::to_string(next_id_++);
    const nlohmann::json req = {{"id", id}, {"task", task}, {"image_png_base64", base64_encode(encode_png(img))}};
    auto reply = transport_->call(req, id, options_.request_timeout);
    if (!reply.is_object() || !reply.contains("id") || reply.at("id") != id)
        throw ProtocolError("reply id mismatch for request " + id, id);
    if (reply.contains("error")) {
        const auto msg = reply.at("error").is_string() ? reply.at("error").get<std::string>() : reply.at("error").dump();
        throw BackendError("sidecar failed request " + id + ": " + msg, id);
    }
    if (!reply.contains("detections") || !reply.at("detections").is_array())
        throw ProtocolError("reply to request " + id + " lacks a detections array", id);
    return reply;
}

std::vector<Detection> SidecarClient::locate(const ImageKey&, const RasterImage& img) {
    const auto reply = request("locate", img);
    try {
        return detections_from_json(reply.at("detections"));
    } catch (const ParseError& e) {
        const auto id = reply.at("id").get<std::string>();
        throw ProtocolError("request " + id + ": " + e.what(), id);
    }
}

std::vector<OBBDetection> SidecarClient::orient(const ImageKey&, const RasterImage& img) {
    const auto reply = request("orient", img);
    try {
        return obb_detections_from_json(reply.at("detections"));
    } catch (const ParseError& e) {
        const auto id = reply.at("id").get<std::string>();
        throw ProtocolError("request " + id + ": " + e.what(), id);
    }
}

} // namespace dpark
