#include "teleop/stream/server.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "teleop/common/error.hpp"

namespace teleop::stream {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

std::string error_frame(std::string_view code, std::string_view text) {
    return json{{"type", "error"}, {"code", std::string(code)}, {"text", std::string(text)}}.dump();
}

std::string_view mime_type(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    return "application/octet-stream";
}

/// Maps a request target onto a file under root; nullopt for anything escaping it.
std::optional<std::filesystem::path> resolve_static(const std::filesystem::path& root, std::string_view target) {
    std::string path(target.substr(0, target.find_first_of("?#")));
    if (path.empty() || path.front() != '/') return std::nullopt;
    if (path.find("..") != std::string::npos || path.find('\\') != std::string::npos) return std::nullopt;
    if (path.back() == '/') path += "index.html";
    return root / std::filesystem::path(path.substr(1));
}

class Connection;

} // namespace

struct Server::Impl {
    struct SessionEntry {
        std::shared_ptr<Session> session;
        std::weak_ptr<Connection> writer;
        std::vector<std::weak_ptr<Connection>> subscribers;
        std::thread worker;
        std::mutex mutex;
        std::condition_variable wake;
        bool work = false;
        bool stopping = false;
    };

    ServerConfig config;
    RecognizerFactory recognizers;
    std::shared_ptr<const fsm::TrajectoryLibrary> library;
    json model_info;

    asio::io_context ioc;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> guard;
    std::optional<tcp::acceptor> acceptor;
    std::thread io_thread;
    std::map<std::string, std::unique_ptr<SessionEntry>> sessions;  // io thread only
    std::mutex stop_mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;
    bool started = false;

    void accept();
    SessionEntry& session(const std::string& id);
    void publish(const std::string& id, const std::vector<EventMessage>& events);
    void release(Connection* c);
    void shutdown_sessions();
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    /// Queues a text frame; io thread only.
    void send(std::string text) {
        if (!ws_ || closed_) return;
        outbox_.push_back(std::move(text));
        if (outbox_.size() == 1) write_next();
    }

    void close_after_flush() {
        close_pending_ = true;
        if (outbox_.empty() && ws_ && !closed_) do_close();
    }

private:
    void on_request(beast::error_code ec) {
        if (ec) return;
        if (websocket::is_upgrade(request_)) {
            stream_.expires_never();
            ws_.emplace(std::move(stream_));
            ws_->set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            ws_->text(true);
            ws_->async_accept(request_, [self = shared_from_this()](beast::error_code e) {
                if (!e) self->read_next();
            });
            return;
        }
        serve_file();
    }

    void serve_file() {
        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(request_.version());
        res->keep_alive(false);
        res->set(http::field::server, "teleop");
        std::optional<std::filesystem::path> file;
        if (request_.method() != http::verb::get && request_.method() != http::verb::head) {
            res->result(http::status::method_not_allowed);
        } else if (server_.config.static_dir.empty() ||
                   !(file = resolve_static(server_.config.static_dir, std::string_view(request_.target().data(), request_.target().size()))) ||
                   !std::filesystem::is_regular_file(*file)) {
            res->result(http::status::not_found);
            res->set(http::field::content_type, "text/plain");
            res->body() = "not found\n";
        } else {
            std::ifstream in(*file, std::ios::binary);
            std::ostringstream data;
            data << in.rdbuf();
            res->result(http::status::ok);
            res->set(http::field::content_type, std::string(mime_type(*file)));
            if (request_.method() == http::verb::get) res->body() = data.str();
        }
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    void read_next() {
        ws_->async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->server_.release(self.get());
                return;
            }
            std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->on_message(text);
            if (!self->closed_) self->read_next();
        });
    }

    void write_next() {
        ws_->async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->outbox_.clear();
                return;
            }
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) {
                self->write_next();
            } else if (self->close_pending_) {
                self->do_close();
            }
        });
    }

    void do_close() {
        closed_ = true;
        ws_->async_close(websocket::close_code::policy_error, [self = shared_from_this()](beast::error_code) {
            self->server_.release(self.get());
        });
    }

    void on_message(const std::string& text) {
        json msg = json::parse(text, nullptr, false);
        if (msg.is_discarded() || !msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            send(error_frame("bad_message", "expected a JSON object with a string \"type\""));
            return;
        }
        const std::string type = msg["type"].get<std::string>();
        if (type == "hello") {
            const int version = msg.contains("version") && msg["version"].is_number_integer() ? msg["version"].get<int>() : -1;
            if (version != kProtocolVersion) {
                send(error_frame("version_mismatch", "server speaks protocol version " +
                                                         std::to_string(kProtocolVersion)));
                close_after_flush();
                return;
            }
            greeted_ = true;
            send(json{{"type", "hello_ack"},
                      {"version", kProtocolVersion},
                      {"model", server_.model_info},
                      {"config", server_.config.session.to_json()}}
                     .dump());
            return;
        }
        if (!greeted_) {
            send(error_frame("hello_required", "send hello before " + type));
            return;
        }
        if (type == "subscribe") {
            std::string id = msg.value("session", std::string("default"));
            auto& entry = server_.session(id);
            entry.subscribers.push_back(weak_from_this());
            return;
        }
        if (type == "ingest") {
            on_ingest(msg);
            return;
        }
        send(error_frame("unknown_type", "unknown message type '" + type + "'"));
    }

    void on_ingest(const json& msg) {
        if (!msg.contains("frame")) {
            send(error_frame("schema", "ingest needs a frame"));
            return;
        }
        FrameMessage fm;
        try {
            fm = FrameMessage::from_json(msg["frame"]);
        } catch (const std::exception& e) {
            send(error_frame("schema", e.what()));
            return;
        }
        if (fm.version != kProtocolVersion) {
            send(error_frame("version_mismatch", "frame version " + std::to_string(fm.version)));
            return;
        }
        auto& entry = server_.session(fm.session);
        auto writer = entry.writer.lock();
        if (writer && writer.get() != this) {
            send(error_frame("writer_taken", "session '" + fm.session + "' already has an ingesting client"));
            return;
        }
        if (!writer) entry.writer = weak_from_this();
        IngestResult r = entry.session->ingest_frame(std::move(fm.frame));
        if (!r.accepted) send(error_frame(r.code, r.reason));
        server_.publish(fm.session, r.events);
        if (r.accepted) {
            std::lock_guard lock(entry.mutex);
            entry.work = true;
            entry.wake.notify_one();
        }
    }

    beast::tcp_stream stream_;
    std::optional<websocket::stream<beast::tcp_stream>> ws_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    Server::Impl& server_;
    std::deque<std::string> outbox_;
    bool greeted_ = false;
    bool closed_ = false;
    bool close_pending_ = false;
};

} // namespace

void Server::Impl::accept() {
    acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<Connection>(std::move(socket), *this)->run();
        accept();
    });
}

Server::Impl::SessionEntry& Server::Impl::session(const std::string& id) {
    auto it = sessions.find(id);
    if (it != sessions.end()) return *it->second;
    auto entry = std::make_unique<SessionEntry>();
    entry->session = std::make_shared<Session>(id, config.session, recognizers(), library);
    SessionEntry* raw = entry.get();
    raw->worker = std::thread([this, raw, id] {
        while (true) {
            {
                std::unique_lock lock(raw->mutex);
                raw->wake.wait(lock, [raw] { return raw->work || raw->stopping; });
                if (raw->stopping) return;
                raw->work = false;
            }
            while (true) {
                auto events = raw->session->pipeline_tick();
                if (events.empty()) break;
                asio::post(ioc, [this, id, events = std::move(events)] { publish(id, events); });
            }
        }
    });
    return *sessions.emplace(id, std::move(entry)).first->second;
}

void Server::Impl::publish(const std::string& id, const std::vector<EventMessage>& events) {
    if (events.empty()) return;
    auto it = sessions.find(id);
    if (it == sessions.end()) return;
    auto& subs = it->second->subscribers;
    std::erase_if(subs, [](const std::weak_ptr<Connection>& w) { return w.expired(); });
    for (const EventMessage& e : events) {
        const std::string text = json{{"type", "event"}, {"event", e.to_json()}}.dump();
        for (auto& w : subs) {
            if (auto c = w.lock()) c->send(text);
        }
    }
}

void Server::Impl::release(Connection* c) {
    for (auto& [id, entry] : sessions) {
        if (auto w = entry->writer.lock(); w.get() == c) entry->writer.reset();
        std::erase_if(entry->subscribers, [c](const std::weak_ptr<Connection>& w) {
            auto p = w.lock();
            return !p || p.get() == c;
        });
    }
}

void Server::Impl::shutdown_sessions() {
    for (auto& [id, entry] : sessions) {
        {
            std::lock_guard lock(entry->mutex);
            entry->stopping = true;
        }
        entry->wake.notify_one();
        if (entry->worker.joinable()) entry->worker.join();
    }
    sessions.clear();
}

Server::Server(ServerConfig config, RecognizerFactory recognizers, std::shared_ptr<const fsm::TrajectoryLibrary> library,
               json model_info)
    : impl_(std::make_unique<Impl>()) {
    config.session.validate();
    if (!recognizers) throw ConfigError("server needs a recognizer factory");
    if (!library) throw ConfigError("server needs a trajectory library");
    if (!config.static_dir.empty() && !std::filesystem::is_directory(config.static_dir)) {
        throw ConfigError("static directory not found: " + config.static_dir.string());
    }
    impl_->config = std::move(config);
    impl_->recognizers = std::move(recognizers);
    impl_->library = std::move(library);
    impl_->model_info = std::move(model_info);
}

Server::~Server() { stop(); }

unsigned short Server::start() {
    Impl& s = *impl_;
    if (s.started) throw Error("server already started");
    beast::error_code ec;
    const auto address = asio::ip::make_address(s.config.address, ec);
    if (ec) throw ConfigError("bad listen address '" + s.config.address + "'");
    s.acceptor.emplace(s.ioc);
    const tcp::endpoint endpoint(address, s.config.port);
    s.acceptor->open(endpoint.protocol(), ec);
    if (!ec) s.acceptor->set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) s.acceptor->bind(endpoint, ec);
    if (!ec) s.acceptor->listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw ConfigError("cannot listen on " + s.config.address + ":" + std::to_string(s.config.port) + ": " +
                              ec.message());
    const unsigned short port = s.acceptor->local_endpoint().port();
    s.guard.emplace(s.ioc.get_executor());
    s.accept();
    s.started = true;
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    return port;
}

void Server::wait() {
    std::unique_lock lock(impl_->stop_mutex);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void Server::stop() {
    Impl& s = *impl_;
    {
        std::lock_guard lock(s.stop_mutex);
        if (s.stopped || !s.started) {
            s.stopped = true;
            s.stopped_cv.notify_all();
            return;
        }
        s.stopped = true;
    }
    asio::post(s.ioc, [&s] {
        beast::error_code ignored;
        s.acceptor->close(ignored);
        s.shutdown_sessions();
        s.guard.reset();
        s.ioc.stop();
    });
    if (s.io_thread.joinable() && s.io_thread.get_id() != std::this_thread::get_id()) s.io_thread.join();
    s.stopped_cv.notify_all();
}

} // namespace teleop::stream
