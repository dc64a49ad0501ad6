#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "dpark/sidecar_client.hpp"

using namespace dpark;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

const RasterImage kWindow(kLocateInputSize, kLocateInputSize, {10, 20, 30});
const RasterImage kCrop(kOrientInputSize, kOrientInputSize, {1, 2, 3});

std::string stub(const std::string& mode) { return std::string("\"") + DPARK_STUB_SIDECAR + "\" " + mode; }

SidecarOptions fast(std::chrono::milliseconds request = 5000ms, std::chrono::milliseconds handshake = 5000ms) {
    SidecarOptions o;
    o.request_timeout = request;
    o.handshake_timeout = handshake;
    return o;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("base64 test vectors") {
    auto enc = [](std::string s) {
        return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foob") == "Zm9vYg==");
    CHECK(enc("foobar") == "Zm9vYmFy");
}

TEST_CASE("command splitting honours quotes") {
    CHECK(split_command("python -m sidecar --port 3") == std::vector<std::string>{"python", "-m", "sidecar", "--port", "3"});
    CHECK(split_command("  \"/opt/my model/run\"   a\"b c\"  ") == std::vector<std::string>{"/opt/my model/run", "ab c"});
    CHECK(split_command("").empty());
}

TEST_CASE("stdio: wire bytes of handshake and request") {
    const auto record = (std::filesystem::temp_directory_path() / "dpark_stub_record.ndjson").string();
    std::filesystem::remove(record);
    ::setenv("DPARK_STUB_RECORD", record.c_str(), 1);
    {
        auto client = SidecarClient::connect(stub("normal"), fast());
        const auto dets = client->locate({{1, 2, 20}, 0, 0}, kWindow);
        // The stub sizes its box from the PNG header it received: 512 / 8.
        REQUIRE(dets.size() == 3);
        CHECK(dets[0].bbox == Box{1, 2, 64, 64});
    }
    ::unsetenv("DPARK_STUB_RECORD");
    const auto lines = read_lines(record);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == R"({"hello":1})");
    const auto b64 = base64_encode(encode_png(kWindow));
    CHECK(lines[1] == R"({"id":"req-0","image_png_base64":")" + b64 + R"(","task":"locate"})");
    std::filesystem::remove(record);
}

TEST_CASE("stdio: orient replies and detector filtering over the sidecar") {
    auto client = SidecarClient::connect(stub("normal"), fast());
    const auto obbs = client->orient({{1, 2, 20}, 3, 4}, kCrop);
    REQUIRE(obbs.size() == 2);
    CHECK(obbs[0].kind == ObbKind::space);
    CHECK(obbs[0].obb.center == Vec2{50, 50});
    Detector det(client);
    const auto loc = det.locate({{1, 2, 20}, 0, 0}, kWindow);
    REQUIRE(loc.size() == 1);
    CHECK(loc[0].cls == ParkingClass::dp_one_aisle);
}

TEST_CASE("stdio: 100 pipelined requests answered in reverse keep their ids") {
    auto client = SidecarClient::connect(stub("reverse 100"), fast(20000ms));
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    std::vector<std::string> ids(100);
    for (int i = 0; i < 100; ++i) {
        threads.emplace_back([&, i] {
            const auto reply = client->request(i % 2 ? "orient" : "locate", i % 2 ? kCrop : kWindow);
            ids[i] = reply.at("id").get<std::string>();
            const auto& d = reply.at("detections");
            const bool shape_ok = i % 2 ? d.at(0).contains("kind") : d.at(0).contains("class");
            if (shape_ok) ++ok;
        });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 100);
    std::sort(ids.begin(), ids.end());
    CHECK(std::unique(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("stdio: an error reply fails one request and the sidecar stays usable") {
    auto client = SidecarClient::connect(stub("error-first"), fast());
    try {
        client->locate({{1, 2, 20}, 0, 0}, kWindow);
        FAIL("expected an error");
    } catch (const ProtocolError&) {
        FAIL("error reply is not a protocol error");
    } catch (const BackendError& e) {
        CHECK(e.request_id() == "req-0");
        CHECK(std::string(e.what()).find("model exploded") != std::string::npos);
    }
    CHECK(client->locate({{1, 2, 20}, 0, 0}, kWindow).size() == 3);
}

TEST_CASE("stdio: malformed reply is a protocol error naming the request") {
    auto client = SidecarClient::connect(stub("malformed"), fast());
    try {
        client->orient({{1, 2, 20}, 0, 0}, kCrop);
        FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
        CHECK(e.request_id() == "req-0");
    }
    CHECK_THROWS_AS(client->orient({{1, 2, 20}, 0, 0}, kCrop), ProtocolError);
}

TEST_CASE("stdio: slow and misaddressed replies time out") {
    auto slow = SidecarClient::connect(stub("slow 2000"), fast(200ms));
    const auto t0 = std::chrono::steady_clock::now();
    try {
        slow->locate({{1, 2, 20}, 0, 0}, kWindow);
        FAIL("expected a timeout");
    } catch (const TimeoutError& e) {
        CHECK(e.request_id() == "req-0");
    }
    CHECK(std::chrono::steady_clock::now() - t0 < 1500ms);
    auto wrong = SidecarClient::connect(stub("wrong-id"), fast(300ms));
    CHECK_THROWS_AS(wrong->locate({{1, 2, 20}, 0, 0}, kWindow), TimeoutError);
}

TEST_CASE("stdio: handshake failures") {
    CHECK_THROWS_AS(SidecarClient::connect(stub("bad-hello"), fast()), HandshakeError);
    CHECK_THROWS_AS(SidecarClient::connect(stub("locate-only"), fast()), HandshakeError);
    CHECK_THROWS_AS(SidecarClient::connect(stub("silent"), fast(5000ms, 300ms)), HandshakeError);
    CHECK_THROWS_AS(SidecarClient::connect("/nonexistent/sidecar-binary", fast()), BackendError);
}

TEST_CASE("stdio: sidecar exit fails outstanding and later requests") {
    auto client = SidecarClient::connect(stub("exit-after-hello"), fast());
    CHECK_THROWS_AS(client->locate({{1, 2, 20}, 0, 0}, kWindow), BackendUnavailable);
    CHECK_THROWS_AS(client->locate({{1, 2, 20}, 0, 0}, kWindow), BackendUnavailable);
}

namespace {

// Minimal HTTP sidecar: same protocol, one JSON document per POST.
class HttpSidecar {
public:
    explicit HttpSidecar(std::string mode) : mode_(std::move(mode)) {
        server_.Post("/infer", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            if (body.contains("hello")) {
                res.set_content(json{{"hello", 1}, {"tasks", {"locate", "orient"}}}.dump(), "application/json");
                return;
            }
            ++requests;
            if (mode_ == "slow") std::this_thread::sleep_for(1500ms);
            json reply = {{"id", body.at("id")}};
            if (mode_ == "error") reply["error"] = "out of memory";
            else if (mode_ == "garbage") {
                res.set_content("<html>oops</html>", "text/html");
                return;
            } else
                reply["detections"] = json::array(
                    {{{"class", "curbside"}, {"bbox", {4, 5, 6, 7}}, {"confidence", 0.5}}});
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~HttpSidecar() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/infer"; }
    std::atomic<int> requests{0};

private:
    std::string mode_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST_CASE("http transport") {
    HttpSidecar ok("normal");
    auto client = SidecarClient::connect(ok.url(), fast());
    const auto dets = client->locate({{1, 2, 20}, 0, 0}, kWindow);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].cls == ParkingClass::curbside);

    HttpSidecar err("error");
    auto c2 = SidecarClient::connect(err.url(), fast());
    CHECK_THROWS_AS(c2->locate({{1, 2, 20}, 0, 0}, kWindow), BackendError);
    CHECK_THROWS_AS(c2->locate({{1, 2, 20}, 0, 0}, kWindow), BackendError);
    CHECK(err.requests == 2);

    HttpSidecar garbage("garbage");
    auto c3 = SidecarClient::connect(garbage.url(), fast());
    CHECK_THROWS_AS(c3->locate({{1, 2, 20}, 0, 0}, kWindow), ProtocolError);

    HttpSidecar slow("slow");
    auto c4 = SidecarClient::connect(slow.url(), fast(300ms));
    CHECK_THROWS_AS(c4->locate({{1, 2, 20}, 0, 0}, kWindow), TimeoutError);

    CHECK_THROWS_AS(SidecarClient::connect("http://127.0.0.1:1/infer", fast()), HandshakeError);
}
