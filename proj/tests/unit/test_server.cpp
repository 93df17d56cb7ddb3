#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "stream_fixtures.hpp"
#include "teleop/stream/server.hpp"

using namespace teleop;
using namespace teleop::stream;
using nlohmann::json;

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Client {
public:
    explicit Client(unsigned short port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
        ws_.text(true);
    }

    void send(const json& j) { ws_.write(asio::buffer(j.dump())); }

    json receive() {
        beast::flat_buffer buf;
        ws_.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }

    json hello(int version = kProtocolVersion) {
        send({{"type", "hello"}, {"version", version}});
        return receive();
    }

    /// Reads until the connection closes; returns the close reason code.
    bool closed_by_peer() {
        beast::flat_buffer buf;
        beast::error_code ec;
        ws_.read(buf, ec);
        return ec == websocket::error::closed;
    }

private:
    asio::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

struct HttpReply {
    unsigned status;
    std::string body;
    std::string type;
};

HttpReply http_get(unsigned short port, const std::string& target) {
    asio::io_context ioc;
    tcp::socket sock(ioc);
    tcp::resolver resolver(ioc);
    asio::connect(sock, resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::empty_body> req(http::verb::get, target, 11);
    req.set(http::field::host, "127.0.0.1");
    http::write(sock, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(sock, buf, res);
    return {res.result_int(), res.body(), std::string(res[http::field::content_type])};
}

ServerConfig test_config(std::size_t window = 4) {
    ServerConfig c;
    c.port = 0;
    c.static_dir = TELEOP_STATIC_DIR;
    c.session.window_size = window;
    c.session.fsm.k = 2;
    return c;
}

RecognizerFactory scripted() {
    return [] { return std::make_shared<ScriptedRecognizer>(std::vector<ActionClass>{ActionClass::Stab}); };
}

std::vector<json> frames(const std::string& session, std::size_t n) {
    std::vector<json> out;
    std::istringstream in(testing::stream_text(n));
    for (std::string line; std::getline(in, line);) {
        json f = json::parse(line);
        f["session"] = session;
        f["v"] = kProtocolVersion;
        out.push_back(f);
    }
    return out;
}

} // namespace

TEST_CASE("handshake and protocol errors") {
    Server server(test_config(), scripted(), testing::shipped_trajectories(), {{"name", "scripted"}});
    const auto port = server.start();
    CHECK(port != 0);

    Client c(port);
    c.send({{"type", "subscribe"}});
    auto early = c.receive();
    CHECK(early["type"] == "error");
    CHECK(early["code"] == "hello_required");

    auto ack = c.hello();
    CHECK(ack["type"] == "hello_ack");
    CHECK(ack["version"] == kProtocolVersion);
    CHECK(ack["model"]["name"] == "scripted");
    CHECK(ack["config"]["window_size"] == 4);

    c.send({{"type", "dance"}});
    CHECK(c.receive()["code"] == "unknown_type");
    c.send(json::array({1, 2}));
    CHECK(c.receive()["code"] == "bad_message");
    c.send({{"type", "ingest"}, {"frame", {{"session", "x"}, {"v", 1}, {"i", 0}}}});
    CHECK(c.receive()["code"] == "schema");

    Client old(port);
    auto refused = old.hello(kProtocolVersion + 1);
    CHECK(refused["code"] == "version_mismatch");
    CHECK(old.closed_by_peer());
    server.stop();
}

TEST_CASE("subscribers receive the session's events and writers are exclusive") {
    Server server(test_config(), scripted(), testing::shipped_trajectories(), json::object());
    const auto port = server.start();

    Client viewer(port);
    viewer.hello();
    viewer.send({{"type", "subscribe"}, {"session", "a"}});
    viewer.hello();  // answered after the subscription is registered

    Client writer(port);
    writer.hello();
    const auto fs = frames("a", 6);
    for (const auto& f : fs) writer.send({{"type", "ingest"}, {"frame", f}});

    Client intruder(port);
    intruder.hello();
    intruder.send({{"type", "ingest"}, {"frame", fs.back()}});
    CHECK(intruder.receive()["code"] == "writer_taken");

    // Window 4 over 6 frames: recognitions at frames 3, 4, 5; K=2 starts stab at frame 4.
    std::vector<json> events;
    int recognitions = 0, robot_states = 0;
    bool started = false;
    while (robot_states < 6) {
        auto m = viewer.receive();
        REQUIRE(m["type"] == "event");
        const auto& e = m["event"];
        CHECK(e["session"] == "a");
        if (e["kind"] == "recognition") ++recognitions;
        if (e["kind"] == "robot_state") ++robot_states;
        if (e["kind"] == "robot_command") {
            started = true;
            CHECK(e["frame"] == 4);
            CHECK(e["payload"]["action"] == "stab");
        }
    }
    CHECK(recognitions == 3);
    CHECK(started);

    Client other(port);
    other.hello();
    other.send({{"type", "ingest"}, {"frame", frames("b", 1)[0]}});
    other.send({{"type", "hello"}, {"version", kProtocolVersion}});
    CHECK(other.receive()["type"] == "hello_ack");  // no error for a second session's writer
    server.stop();
}

TEST_CASE("static assets") {
    Server server(test_config(), scripted(), testing::shipped_trajectories(), json::object());
    const auto port = server.start();

    auto index = http_get(port, "/");
    CHECK(index.status == 200);
    CHECK(index.type.rfind("text/html", 0) == 0);
    CHECK(index.body.find("stream console") != std::string::npos);
    CHECK(http_get(port, "/index.html?x=1").status == 200);
    CHECK(http_get(port, "/missing.js").status == 404);
    CHECK(http_get(port, "/../CMakeLists.txt").status == 404);
    server.stop();
}

TEST_CASE("configuration errors") {
    auto cfg = test_config();
    cfg.static_dir = "/nonexistent/dir";
    CHECK_THROWS_AS(Server(cfg, scripted(), testing::shipped_trajectories(), json::object()), ConfigError);
    CHECK_THROWS_AS(Server(test_config(), nullptr, testing::shipped_trajectories(), json::object()), ConfigError);

    Server a(test_config(), scripted(), testing::shipped_trajectories(), json::object());
    auto cfg2 = test_config();
    cfg2.port = a.start();
    Server b(cfg2, scripted(), testing::shipped_trajectories(), json::object());
    CHECK_THROWS_AS(b.start(), ConfigError);
}
