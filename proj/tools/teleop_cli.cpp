#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "teleop/common/runtime.hpp"
#include "teleop/gnn/checkpoint.hpp"
#include "teleop/stream/replay.hpp"
#include "teleop/train/dataset.hpp"
#include "teleop/train/synthetic.hpp"
#include "teleop/train/trainer.hpp"
#ifdef TELEOP_HAVE_SERVER
#include "teleop/stream/server.hpp"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace teleop;

namespace {

struct Overrides {
    fs::path config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> window_size;
    std::optional<double> fps;
    std::optional<int> k;
    std::optional<unsigned short> port;
};

/// Config file plus command-line overrides. Relative paths resolve against the
/// config file's directory.
struct Settings {
    json raw = json::object();
    fs::path base = fs::current_path();
    std::size_t window_size = 40;
    double fps = 20.0;
    int k = 5;
    unsigned short port = 8765;

    std::optional<fs::path> path(const std::string& key) const {
        if (!raw.contains(key) || raw[key].is_null()) return std::nullopt;
        fs::path p = raw[key].get<std::string>();
        return p.is_absolute() ? p : base / p;
    }

    json section(const std::string& key) const { return raw.contains(key) ? raw[key] : json::object(); }

    stream::SessionConfig session() const {
        stream::SessionConfig c;
        c.window_size = window_size;
        c.fps = fps;
        c.fsm.k = k;
        c.validate();
        return c;
    }
};

Settings load_settings(const Overrides& o) {
    Settings s;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("cannot open config " + o.config_path.string());
        s.raw = json::parse(in);
        s.base = fs::absolute(o.config_path).parent_path();
    }
    s.window_size = s.raw.value("window_size", s.window_size);
    s.fps = s.raw.value("fps", s.fps);
    s.k = s.raw.value("k_consecutive", s.k);
    s.port = s.raw.value("port", s.port);
    if (o.window_size) s.window_size = *o.window_size;
    if (o.fps) s.fps = *o.fps;
    if (o.k) s.k = *o.k;
    if (o.port) s.port = *o.port;
    return s;
}

std::shared_ptr<const fsm::TrajectoryLibrary> load_library(const Settings& s) {
    auto p = s.path("trajectories");
    if (!p) throw ConfigError("config needs a \"trajectories\" path");
    return std::make_shared<const fsm::TrajectoryLibrary>(fsm::TrajectoryLibrary::load(*p));
}

fs::path model_path(const Settings& s, const std::string& flag) {
    if (!flag.empty()) return flag;
    auto p = s.path("model");
    if (!p) throw ConfigError("no model path: pass --model or set \"model\" in the config");
    return *p;
}

train::TrainConfig train_config(const Settings& s, const Overrides& o) {
    auto c = train::TrainConfig::from_json(s.section("train"));
    if (o.seed) c.seed = *o.seed;
    return c;
}

void print_epoch(const train::EpochRecord& r) {
    std::printf("epoch %3d  lr %.2e  loss %.4f  train %.4f  valid %.4f  (%.1fs)\n", r.epoch, r.lr, r.train_loss,
                r.train_accuracy, r.valid.accuracy, r.seconds);
    std::fflush(stdout);
}

int cmd_gen(const Settings& s, const Overrides& o, const fs::path& out, std::optional<int> per_class,
            std::optional<double> noise) {
    const json syn = s.section("synthetic");
    auto motion = train::SyntheticConfig::from_json(syn.value("motion", json::object()));
    motion.fps = s.fps;
    const int n = per_class.value_or(syn.value("videos_per_class", 40));
    const double sigma = noise.value_or(syn.value("noise", 0.02));
    const std::uint64_t seed = o.seed.value_or(syn.value("seed", std::uint64_t{2024}));
    auto ratios = syn.value("split", std::vector<double>{0.70, 0.15, 0.15});
    if (ratios.size() != 3) throw ConfigError("synthetic.split must hold three ratios");

    auto videos = train::generate_corpus(n, seed, sigma, motion);
    auto split = train::split_by_video(videos, {ratios[0], ratios[1], ratios[2]},
                                       syn.value("split_seed", std::uint64_t{7}));
    train::write_dataset(out, videos, split,
                         {{"generator", "synthetic"}, {"seed", seed}, {"noise", sigma}, {"motion", motion.to_json()}});
    std::printf("wrote %zu videos to %s (train %zu, valid %zu, test %zu)\n", videos.size(), out.c_str(),
                split.train.size(), split.valid.size(), split.test.size());
    return 0;
}

int cmd_train(const Settings& s, const Overrides& o, const fs::path& data, const std::string& out_flag,
              std::optional<int> epochs) {
    auto ds = train::read_dataset(data);
    auto cfg = train_config(s, o);
    if (epochs) cfg.max_epochs = *epochs;
    auto train_set = train::window_dataset(ds.videos, ds.split.train, s.window_size);
    auto valid_set = train::window_dataset(ds.videos, ds.split.valid, s.window_size);
    std::printf("window %zu: %zu train / %zu valid samples\n", s.window_size, train_set.size(), valid_set.size());

    auto result = train::train(train_set, valid_set, cfg, print_epoch);
    json history = json::array();
    for (const auto& r : result.history) history.push_back(r.to_json());
    gnn::Checkpoint ckpt{result.params,
                         {{"window_size", s.window_size},
                          {"fps", s.fps},
                          {"config", cfg.to_json()},
                          {"status", train::to_string(result.status)},
                          {"best_epoch", result.best_epoch},
                          {"best_valid_accuracy", result.best_valid_accuracy},
                          {"history", history},
                          {"dataset", ds.metadata}}};
    const fs::path out = model_path(s, out_flag);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    gnn::save_checkpoint(out, ckpt);
    std::printf("%s after %zu epochs; best valid %.4f at epoch %d; saved %s\n",
                train::to_string(result.status).c_str(), result.history.size(), result.best_valid_accuracy,
                result.best_epoch, out.c_str());
    if (!result.message.empty()) std::fprintf(stderr, "%s\n", result.message.c_str());
    return result.status == train::TrainStatus::Diverged ? 2 : 0;
}

int cmd_eval(const Settings& s, const Overrides& o, const fs::path& data, const std::string& model_flag,
             const std::string& split_name) {
    auto ckpt = gnn::load_checkpoint(model_path(s, model_flag));
    const std::size_t window =
        o.window_size ? *o.window_size : ckpt.training.value("window_size", s.window_size);
    auto ds = train::read_dataset(data);
    const std::vector<std::size_t>* subset = split_name == "train"   ? &ds.split.train
                                             : split_name == "valid" ? &ds.split.valid
                                             : split_name == "test"  ? &ds.split.test
                                                                     : nullptr;
    if (!subset) throw ConfigError("split must be train, valid or test");
    auto set = train::window_dataset(ds.videos, *subset, window);
    auto m = train::evaluate(ckpt.params, set);
    json report = m.to_json();
    report["split"] = split_name;
    report["window_size"] = window;
    report["samples"] = set.size();
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_ablate(const Settings& s, const Overrides& o, const fs::path& data, const fs::path& out,
               std::vector<std::size_t> sizes, std::optional<int> epochs) {
    auto ds = train::read_dataset(data);
    json aj = s.section("ablation");
    if (!aj.contains("train")) aj["train"] = s.section("train");
    auto cfg = train::AblationConfig::from_json(aj);
    if (!sizes.empty()) cfg.window_sizes = sizes;
    if (epochs) cfg.train.max_epochs = *epochs;
    if (o.seed) cfg.train.seed = *o.seed;

    std::vector<train::AblationRow> rows = train::ablate(ds.videos, cfg, [](const train::AblationRow& r) {
        std::printf("N_w %3zu  N_s %6zu  test %.4f  epochs %d%s%s\n", r.window_size, r.sample_count, r.test.accuracy,
                    r.epochs_run, r.error.empty() ? "" : "  error: ", r.error.c_str());
        std::fflush(stdout);
    });
    std::ofstream csv(out);
    if (!csv) throw ConfigError("cannot write " + out.string());
    train::write_ablation_csv(csv, rows);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

std::shared_ptr<stream::Recognizer> load_recognizer(const Settings& s, const std::string& model_flag) {
    const fs::path p = model_path(s, model_flag);
    auto ckpt = gnn::load_checkpoint(p);
    json meta = {{"model_path", p.string()}};
    if (ckpt.training.contains("window_size")) meta["trained_window_size"] = ckpt.training["window_size"];
    return std::make_shared<stream::GcnRecognizer>(std::move(ckpt.params), meta);
}

int cmd_replay(const Settings& s, const std::string& model_flag, const fs::path& input, const std::string& out,
               double speed) {
    stream::ReplayConfig rc;
    rc.session = s.session();
    rc.speed = speed;
    std::ofstream file;
    if (!out.empty()) {
        file.open(out);
        if (!file) throw ConfigError("cannot write " + out);
    }
    std::ostream& log = out.empty() ? std::cout : file;
    auto result = stream::replay_file(input, rc, load_recognizer(s, model_flag), load_library(s),
                                      [&log](const stream::EventMessage& e) { log << e.to_line() << '\n'; });
    std::cerr << result.metrics.to_json().dump() << '\n';
    return 0;
}

#ifdef TELEOP_HAVE_SERVER
stream::Server* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const Settings& s, const std::string& model_flag, const std::string& static_flag) {
    stream::ServerConfig sc;
    sc.address = s.raw.value("address", sc.address);
    sc.port = s.port;
    sc.session = s.session();
    if (!static_flag.empty()) {
        sc.static_dir = static_flag;
    } else if (auto p = s.path("static_dir")) {
        sc.static_dir = *p;
    }
    const fs::path mp = model_path(s, model_flag);
    auto ckpt = std::make_shared<const gnn::Checkpoint>(gnn::load_checkpoint(mp));
    json info = {{"model_path", mp.string()}, {"hidden", ckpt->params.config.hidden}};
    if (ckpt->training.contains("window_size")) info["trained_window_size"] = ckpt->training["window_size"];
    stream::Server server(
        sc, [ckpt, info] { return std::make_shared<stream::GcnRecognizer>(ckpt->params, info); }, load_library(s),
        info);
    const auto port = server.start();
    std::printf("listening on ws://%s:%u\n", sc.address.c_str(), port);
    std::fflush(stdout);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.wait();
    g_server = nullptr;
    return 0;
}
#endif

} // namespace

int main(int argc, char** argv) {
    retain_freed_memory();
    CLI::App app{"Skeleton-graph action recognition and robot teleoperation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    std::uint64_t seed = 0;
    std::size_t window = 0;
    double fps = 0;
    int k = 0;
    unsigned short port = 0;
    app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed (corpus for gen, training otherwise)");
    auto* window_opt = app.add_option("--window-size", window, "frames per window (N_w)")->check(CLI::PositiveNumber);
    auto* fps_opt = app.add_option("--fps", fps, "stream frame rate")->check(CLI::PositiveNumber);
    auto* k_opt = app.add_option("--k-consecutive", k, "identical recognitions before a command")
                      ->check(CLI::PositiveNumber);
    auto* port_opt = app.add_option("--port", port, "listen port for serve (0 = any)");

    fs::path data, out_path, input;
    std::string model, out, split = "test", static_dir;
    std::optional<int> per_class, epochs;
    std::optional<double> noise;
    std::vector<std::size_t> sizes;
    double speed = 0.0;

    auto* gen = app.add_subcommand("gen", "generate a synthetic landmark corpus with a video-level split");
    gen->add_option("--out", out_path, "output directory")->required();
    gen->add_option("--videos-per-class", per_class);
    gen->add_option("--noise", noise, "landmark jitter standard deviation");

    auto* tr = app.add_subcommand("train", "train the classifier on a corpus directory");
    tr->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", model, "checkpoint path (defaults to the config's model)");
    tr->add_option("--epochs", epochs);

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    ev->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
    ev->add_option("--model", model);
    ev->add_option("--split", split)->check(CLI::IsMember({"train", "valid", "test"}));

    auto* ab = app.add_subcommand("ablate", "train once per window size and write a CSV report");
    ab->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
    ab->add_option("--out", out_path, "CSV report")->required();
    ab->add_option("--sizes", sizes, "window sizes")->delimiter(',');
    ab->add_option("--epochs", epochs);

    auto* rp = app.add_subcommand("replay", "run a recorded JSONL stream through the pipeline");
    rp->add_option("input", input)->required()->check(CLI::ExistingFile);
    rp->add_option("--model", model);
    rp->add_option("--out", out, "event log (default stdout)");
    rp->add_option("--speed", speed, "wall-clock pacing factor, 0 = unpaced")->check(CLI::NonNegativeNumber);

    auto* sv = app.add_subcommand("serve", "WebSocket stream service");
    sv->add_option("--model", model);
    sv->add_option("--static-dir", static_dir, "UI assets served over HTTP");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) o.seed = seed;
    if (*window_opt) o.window_size = window;
    if (*fps_opt) o.fps = fps;
    if (*k_opt) o.k = k;
    if (*port_opt) o.port = port;

    try {
        const Settings s = load_settings(o);
        if (*gen) return cmd_gen(s, o, out_path, per_class, noise);
        if (*tr) return cmd_train(s, o, data, model, epochs);
        if (*ev) return cmd_eval(s, o, data, model, split);
        if (*ab) return cmd_ablate(s, o, data, out_path, sizes, epochs);
        if (*rp) return cmd_replay(s, model, input, out, speed);
        if (*sv) {
#ifdef TELEOP_HAVE_SERVER
            return cmd_serve(s, model, static_dir);
#else
            std::fprintf(stderr, "built without the stream server\n");
            return 1;
#endif
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
