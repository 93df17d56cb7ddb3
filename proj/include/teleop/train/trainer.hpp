#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "teleop/gnn/model.hpp"
#include "teleop/gnn/optim.hpp"
#include "teleop/train/dataset.hpp"

namespace teleop::train {

struct Metrics {
    double accuracy = 0.0;
    std::array<double, 4> per_class{};  ///< indexed by ActionClass
    std::array<std::size_t, 4> class_counts{};
    double loss = 0.0;
    int epoch = 0;
    double lr = 0.0;

    nlohmann::json to_json() const;
};

/// Accuracy from predicted vs true labels. Classes absent from labels report 0.
Metrics metrics_from_predictions(std::span<const int> predicted, std::span<const int> labels);

/// Inference-mode accuracy (overall and per class) and mean cross-entropy.
Metrics evaluate(const gnn::ModelParams<float>& params, const WindowedDataset& dataset);

struct TrainConfig {
    gnn::ModelConfig model;
    gnn::AdamWConfig optimizer;
    gnn::PlateauConfig scheduler;
    int max_epochs = 100;
    int early_stop_patience = 30;  ///< epochs without validation improvement
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    /// Stop once validation accuracy reaches this value (disabled when unset).
    std::optional<double> target_valid_accuracy;
    /// Wall-clock limit; no epoch starts that would be expected to end past it.
    std::optional<double> max_seconds;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;  ///< running, training mode
    Metrics valid;
    std::size_t skipped_steps = 0;
    double seconds = 0.0;

    nlohmann::json to_json() const;
};

enum class TrainStatus { Completed, EarlyStopped, TargetReached, OutOfTime, Diverged };

std::string to_string(TrainStatus s);

struct TrainResult {
    gnn::ModelParams<float> params;  ///< best-validation checkpoint
    std::vector<EpochRecord> history;
    TrainStatus status = TrainStatus::Completed;
    int best_epoch = 0;  ///< 0 = initialization
    double best_valid_accuracy = 0.0;
    std::string message;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch AdamW with reduce-on-plateau driven by validation accuracy.
/// Batch order and dropout masks depend only on config.seed. A non-finite loss
/// aborts with the best checkpoint so far and TrainStatus::Diverged.
TrainResult train(const WindowedDataset& train_set, const WindowedDataset& valid_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct AblationRow {
    std::size_t window_size = 0;
    std::size_t sample_count = 0;  ///< all videos
    std::size_t expected_sample_count = 0;
    Metrics train;
    Metrics valid;
    Metrics test;
    int epochs_run = 0;
    std::optional<double> reference_test_accuracy;
    std::string error;
};

struct AblationConfig {
    std::vector<std::size_t> window_sizes{1, 2, 5, 10, 20, 40, 60, 80, 150};
    TrainConfig train;
    SplitRatios ratios;
    std::uint64_t split_seed = 7;
    /// Optional externally-measured test accuracy per window size, copied into the report.
    std::vector<std::pair<std::size_t, double>> reference_test_accuracy;

    static AblationConfig from_json(const nlohmann::json& j);
};

/// One full training per window size on the same video split. Failures are
/// recorded per row and the remaining sizes still run.
std::vector<AblationRow> ablate(std::span<const VideoRecord> videos, const AblationConfig& config,
                                const std::function<void(const AblationRow&)>& on_row = {});

/// CSV: N_w, N_s, train, valid, test overall, per-class test (cut, flip, stab, push), epochs, reference, error.
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

} // namespace teleop::train
