#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "teleop/fsm/robot.hpp"
#include "teleop/stream/recognizer.hpp"
#include "teleop/stream/session.hpp"

namespace teleop::stream {

struct ServerConfig {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;  ///< 0 picks a free port
    std::filesystem::path static_dir;  ///< served over plain HTTP GET; empty disables
    SessionConfig session;
};

using RecognizerFactory = std::function<std::shared_ptr<Recognizer>()>;

/// WebSocket endpoint for the stream wire protocol plus static file serving on
/// the same port. Text frames carry JSON objects with a "type" field.
///
///   client: {"type":"hello","version":1}
///           {"type":"ingest","frame":{"session":s,"v":1,"i":..,"t":..,"lm":{..},"obj":..}}
///           {"type":"subscribe","session":s}
///   server: {"type":"hello_ack","version":1,"model":{..},"config":{..}}
///           {"type":"event","event":{..}}
///           {"type":"error","code":c,"text":msg}
///
/// Every session has one pipeline thread and at most one ingesting connection.
class Server {
public:
    Server(ServerConfig config, RecognizerFactory recognizers, std::shared_ptr<const fsm::TrajectoryLibrary> library,
           nlohmann::json model_info);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds, starts the network thread and returns the bound port.
    unsigned short start();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();
    void stop();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

} // namespace teleop::stream
