#include "teleop/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace teleop::train {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t batch_seed(std::uint64_t seed, int epoch, std::size_t batch) {
    return splitmix(splitmix(seed ^ 0xD1B54A32D192ED03ull) + static_cast<std::uint64_t>(epoch) * 1000003ull + batch);
}

template <typename Matrix>
int argmax_row(const Matrix& m, Eigen::Index row) {
    Eigen::Index best = 0;
    m.row(row).maxCoeff(&best);
    return static_cast<int>(best);
}

} // namespace

json Metrics::to_json() const {
    json per = json::object();
    for (ActionClass a : kAllActions) per[std::string(to_string(a))] = per_class[to_index(a)];
    return {{"accuracy", accuracy}, {"per_class", per}, {"loss", loss}, {"epoch", epoch}, {"lr", lr}};
}

Metrics metrics_from_predictions(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) throw ShapeError("prediction count != label count");
    Metrics m;
    std::array<std::size_t, 4> correct{};
    std::size_t total_correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= 4) throw ValidationError("label out of range");
        ++m.class_counts[static_cast<std::size_t>(y)];
        if (predicted[i] == y) {
            ++correct[static_cast<std::size_t>(y)];
            ++total_correct;
        }
    }
    for (std::size_t c = 0; c < 4; ++c) {
        m.per_class[c] = m.class_counts[c] ? static_cast<double>(correct[c]) / static_cast<double>(m.class_counts[c]) : 0.0;
    }
    m.accuracy = labels.empty() ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(labels.size());
    return m;
}

Metrics evaluate(const gnn::ModelParams<float>& params, const WindowedDataset& dataset) {
    if (dataset.empty()) throw ValidationError("evaluate on an empty dataset");
    const auto views = dataset.views();
    std::vector<int> predicted(dataset.size());
    double loss = 0.0;
    constexpr std::size_t kChunk = 64;
    std::array<double, 4> logits{};
    for (std::size_t start = 0; start < views.size(); start += kChunk) {
        const std::size_t count = std::min(kChunk, views.size() - start);
        auto trace = gnn::forward_batch<float>(std::span(views).subspan(start, count), params, gnn::Mode::Inference, 0, false);
        for (std::size_t i = 0; i < count; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            predicted[start + i] = argmax_row(trace.logits, row);
            for (int c = 0; c < 4; ++c) logits[c] = static_cast<double>(trace.logits(row, c));
            loss += gnn::cross_entropy_loss(logits, dataset.labels[start + i]);
        }
    }
    Metrics m = metrics_from_predictions(predicted, dataset.labels);
    m.loss = loss / static_cast<double>(dataset.size());
    return m;
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.model.hidden = j.value("hidden", c.model.hidden);
    c.model.dropout = j.value("dropout", c.model.dropout);
    c.model.leaky_slope = j.value("leaky_slope", c.model.leaky_slope);
    c.optimizer.lr = j.value("lr", c.optimizer.lr);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.scheduler.initial_lr = c.optimizer.lr;
    c.scheduler.factor = j.value("lr_factor", c.scheduler.factor);
    c.scheduler.patience = j.value("lr_patience", c.scheduler.patience);
    c.scheduler.min_lr = j.value("min_lr", c.scheduler.min_lr);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("target_valid_accuracy") && !j["target_valid_accuracy"].is_null()) {
        c.target_valid_accuracy = j["target_valid_accuracy"].get<double>();
    }
    if (j.contains("max_seconds") && !j["max_seconds"].is_null()) c.max_seconds = j["max_seconds"].get<double>();
    return c;
}

json TrainConfig::to_json() const {
    json j = {{"hidden", model.hidden},
              {"dropout", model.dropout},
              {"leaky_slope", model.leaky_slope},
              {"lr", optimizer.lr},
              {"weight_decay", optimizer.weight_decay},
              {"lr_factor", scheduler.factor},
              {"lr_patience", scheduler.patience},
              {"min_lr", scheduler.min_lr},
              {"max_epochs", max_epochs},
              {"early_stop_patience", early_stop_patience},
              {"batch_size", batch_size},
              {"seed", seed}};
    j["target_valid_accuracy"] = target_valid_accuracy ? json(*target_valid_accuracy) : json(nullptr);
    j["max_seconds"] = max_seconds ? json(*max_seconds) : json(nullptr);
    return j;
}

json EpochRecord::to_json() const {
    return {{"epoch", epoch},
            {"lr", lr},
            {"train_loss", train_loss},
            {"train_accuracy", train_accuracy},
            {"valid", valid.to_json()},
            {"skipped_steps", skipped_steps},
            {"seconds", seconds}};
}

std::string to_string(TrainStatus s) {
    switch (s) {
    case TrainStatus::Completed: return "completed";
    case TrainStatus::EarlyStopped: return "early_stopped";
    case TrainStatus::TargetReached: return "target_reached";
    case TrainStatus::OutOfTime: return "out_of_time";
    case TrainStatus::Diverged: return "diverged";
    }
    return "?";
}

TrainResult train(const WindowedDataset& train_set, const WindowedDataset& valid_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    if (config.max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");

    TrainResult result;
    result.params = gnn::init_params<float>(config.model, config.seed);
    if (config.max_epochs == 0) return result;
    if (train_set.empty() || valid_set.empty()) throw ValidationError("training needs non-empty train and valid sets");

    gnn::ModelParams<float> params = result.params;
    gnn::PlateauConfig sched_cfg = config.scheduler;
    sched_cfg.initial_lr = config.optimizer.lr;
    gnn::PlateauScheduler scheduler(sched_cfg);
    auto optimizer = gnn::AdamWState<float>::create(config.model, config.optimizer);

    const auto views = train_set.views();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(splitmix(config.seed));

    result.best_valid_accuracy = -1.0;
    int since_improvement = 0;
    std::vector<gnn::GraphView> batch_views;
    std::vector<int> batch_labels;

    const auto run_started = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = scheduler.lr();
        optimizer.config.lr = scheduler.lr();

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0, batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            batch_views.clear();
            batch_labels.clear();
            for (std::size_t k = start; k < start + count; ++k) {
                batch_views.push_back(views[order[k]]);
                batch_labels.push_back(train_set.labels[order[k]]);
            }
            gnn::ForwardTrace<float> trace;
            double loss = 0.0;
            try {
                trace = gnn::forward_batch<float>(batch_views, params, gnn::Mode::Training,
                                                  batch_seed(config.seed, epoch, batch_index), true);
                loss = gnn::batch_loss(trace, batch_labels);
            } catch (const NumericError& e) {
                loss = std::nan("");
                result.message = e.what();
            }
            if (!std::isfinite(loss)) {
                result.status = TrainStatus::Diverged;
                if (result.message.empty()) result.message = "non-finite loss";
                result.message = "epoch " + std::to_string(epoch) + ": " + result.message;
                return result;
            }
            auto grads = gnn::model_backward<float>(trace, params, batch_labels);
            if (!gnn::adamw_step(params, grads, optimizer).applied) ++rec.skipped_steps;
            gnn::update_running_stats(params, trace);

            loss_sum += loss * static_cast<double>(count);
            for (std::size_t i = 0; i < count; ++i) {
                if (argmax_row(trace.probabilities, static_cast<Eigen::Index>(i)) == batch_labels[i]) ++correct;
            }
            seen += count;
        }
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        rec.valid = evaluate(params, valid_set);
        rec.valid.epoch = epoch;
        rec.valid.lr = rec.lr;
        scheduler.step(rec.valid.accuracy);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        if (rec.valid.accuracy > result.best_valid_accuracy) {
            result.best_valid_accuracy = rec.valid.accuracy;
            result.best_epoch = epoch;
            result.params = params;
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (config.target_valid_accuracy && rec.valid.accuracy >= *config.target_valid_accuracy) {
            result.status = TrainStatus::TargetReached;
            return result;
        }
        if (config.early_stop_patience > 0 && since_improvement >= config.early_stop_patience) {
            result.status = TrainStatus::EarlyStopped;
            return result;
        }
        if (config.max_seconds && epoch < config.max_epochs) {
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - run_started).count();
            if (elapsed + rec.seconds > *config.max_seconds) {
                result.status = TrainStatus::OutOfTime;
                return result;
            }
        }
    }
    result.status = TrainStatus::Completed;
    return result;
}

AblationConfig AblationConfig::from_json(const json& j) {
    AblationConfig c;
    if (j.contains("window_sizes")) c.window_sizes = j["window_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("ratios")) {
        auto r = j["ratios"].get<std::vector<double>>();
        if (r.size() != 3) throw ConfigError("ratios must hold three values");
        c.ratios = {r[0], r[1], r[2]};
    }
    c.split_seed = j.value("split_seed", c.split_seed);
    if (j.contains("reference_test_accuracy")) {
        for (auto& [k, v] : j["reference_test_accuracy"].items()) {
            c.reference_test_accuracy.emplace_back(std::stoul(k), v.get<double>());
        }
    }
    return c;
}

std::vector<AblationRow> ablate(std::span<const VideoRecord> videos, const AblationConfig& config,
                                const std::function<void(const AblationRow&)>& on_row) {
    const VideoSplit split = split_by_video(videos, config.ratios, config.split_seed);
    std::vector<AblationRow> rows;
    for (std::size_t window : config.window_sizes) {
        AblationRow row;
        row.window_size = window;
        for (const auto& v : videos) row.expected_sample_count += expected_sample_count(1, v.frames.size(), window);
        for (auto& [w, acc] : config.reference_test_accuracy) {
            if (w == window) row.reference_test_accuracy = acc;
        }
        try {
            const auto train_set = window_dataset(videos, split.train, window);
            const auto valid_set = window_dataset(videos, split.valid, window);
            const auto test_set = window_dataset(videos, split.test, window);
            row.sample_count = train_set.size() + valid_set.size() + test_set.size();
            auto result = train(train_set, valid_set, config.train);
            row.epochs_run = static_cast<int>(result.history.size());
            if (result.status == TrainStatus::Diverged) row.error = result.message;
            row.train = evaluate(result.params, train_set);
            row.valid = evaluate(result.params, valid_set);
            row.test = evaluate(result.params, test_set);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
        if (on_row) on_row(row);
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
    out << "N_w,N_s,train,valid,test,test_cut,test_flip,test_stab,test_push,epochs,reference_test,error\n";
    auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
        return std::string(buf);
    };
    for (const AblationRow& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << r.window_size << ',' << r.sample_count << ',' << pct(r.train.accuracy) << ',' << pct(r.valid.accuracy)
            << ',' << pct(r.test.accuracy) << ',' << pct(r.test.per_class[to_index(ActionClass::Cut)]) << ','
            << pct(r.test.per_class[to_index(ActionClass::Flip)]) << ','
            << pct(r.test.per_class[to_index(ActionClass::Stab)]) << ','
            << pct(r.test.per_class[to_index(ActionClass::Push)]) << ',' << r.epochs_run << ','
            << (r.reference_test_accuracy ? pct(*r.reference_test_accuracy) : std::string()) << ',' << err << '\n';
    }
}

} // namespace teleop::train
