#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecf/data.hpp"
#include "ecf/metrics.hpp"
#include "ecf/model.hpp"
#include "ecf/scoring.hpp"

namespace ecf {

struct SyntheticSpec {
    std::size_t sensors = 8;
    std::size_t train_length = 4000;
    std::size_t test_length = 2000;
    /// kind@start:length list; empty means six segments spread over the test span.
    std::string anomalies;
    std::size_t segment_length = 40;
};

/// One run's settings. Defaults follow the SMD row of the published
/// hyperparameter table with l_w = 100.
struct RunConfig {
    std::string train_path;
    std::string test_path;
    std::string labels_path;
    bool synthetic = false;
    SyntheticSpec synth;

    std::size_t window_length = 100;
    std::size_t stride = 10;
    double train_ratio = 0.8;
    Normalization normalization = Normalization::min_max;
    std::size_t epochs = 3;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t knn_k = 8;

    double sigma_k = 1.0;
    ScoringMethod scoring = ScoringMethod::gauss_d;
    std::string threshold = "best_fc1";
    double tail_epsilon = 1e-2;
    bool allow_custom_epsilon = false;

    Ablation ablation = Ablation::none;
    std::uint64_t seed = 0;

    std::size_t periodic = 64;
    std::vector<std::size_t> layer_dims{256, 512, 1024, 1024};
    std::size_t aggregate_dim = 512;
    std::vector<std::size_t> fc_dims{512, 256};
    std::size_t heads = 8;
    double dropout = 0.2;

    ModelConfig model_config(std::size_t sensors) const;
    void validate() const;
};

/// Named presets: smd, msl, smap, swat, psm (published per-dataset epochs,
/// lr, batch size and k, with stride 1 for the short MSL/SMAP sets) and
/// desk (compact widths for single-core synthetic runs).
RunConfig profile(const std::string& name);
std::vector<std::string> profile_names();

const char* to_string(ScoringMethod method);
ScoringMethod parse_scoring(const std::string& text);

/// Synthetic dataset described by `config.synth`, seeded by `config.seed`.
SyntheticData make_synthetic(const RunConfig& config);

/// Loads the CSV triple or generates the synthetic set.
TimeSeriesDataset load_run_dataset(const RunConfig& config);

/// Training only needs the train CSV; test and labels stay empty.
TimeSeriesDataset load_training_dataset(const RunConfig& config);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean of the per-window training-mode losses
    double val_loss = 0.0;
};

struct TrainingLog {
    double initial_train_loss = 0.0;  // inference-mode mean over train windows before training
    double final_train_loss = 0.0;    // same, for the kept checkpoint
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;  // 0 = the initial model
    double best_val_loss = 0.0;
    std::size_t steps = 0;
    std::size_t train_windows = 0;
    std::size_t val_windows = 0;
    double seconds = 0.0;
};

nlohmann::json to_json(const TrainingLog& log);

struct TrainResult {
    Checkpoint checkpoint;
    TrainingLog log;
};

/// Fits normalization on the train split, trains on anomaly-free windows
/// minimizing the reconstruction loss and keeps the parameters with the
/// lowest validation loss. Test data and labels are not touched.
TrainResult train(const RunConfig& config, const TimeSeriesDataset& raw);

/// Rebuilds the model stored in a checkpoint.
EdgeConvFormer restore_model(const Checkpoint& checkpoint);

/// Reconstruction errors of `series` (already normalized): consecutive
/// non-overlapping windows, plus one window ending at the last timestamp for
/// a leftover tail, whose uncovered rows are used. Every row is
/// reconstructed exactly once.
Matrix reconstruction_errors(const EdgeConvFormer& model, const Matrix& series, std::size_t window_length);

/// Label-free scoring of raw test data. `predictions` use tail-p at the
/// configured epsilon.
ScoreSeries score(const Checkpoint& checkpoint, const Matrix& raw_test, const RunConfig& config);

void write_scores(const std::filesystem::path& path, const ScoreSeries& scores,
                  const std::vector<std::string>& sensor_names, bool include_sensor_scores);
/// Reads the A column of a score file.
std::vector<double> read_score_aggregate(const std::filesystem::path& path);

struct ReportEntry {
    std::string metric;
    std::string threshold_method;
    double threshold = 0.0;
    double value = 0.0;
    Confusion counts;
    bool has_threshold = true;
};

struct MetricsReport {
    std::vector<ReportEntry> entries;
    std::size_t sensors = 0;
    std::size_t true_anomalies = 0;
    /// Threshold of the configured method (used for the plot data).
    double primary_threshold = 0.0;
    std::vector<int> primary_predictions;

    /// First entry with this metric and method; throws if absent.
    const ReportEntry& find(const std::string& metric, const std::string& method) const;
};

/// Applies every thresholding rule (best-F for F1/Fpa1/Fc1, top-k with k =
/// number of true anomalous points, tail-p at each epsilon and the best of
/// them) and evaluates F1, Fpa1, Fc1 and the AD1..AD4 range F1 at each, plus
/// AU-ROC and AU-PRC.
MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, std::size_t sensors,
                       const RunConfig& config);

nlohmann::json to_json(const MetricsReport& report);

/// timestamp, A, label, threshold, prediction for the configured method.
void write_plot_data(const std::filesystem::path& path, std::span<const double> scores, std::span<const int> labels,
                     const MetricsReport& report);

struct VariantResult {
    Ablation ablation = Ablation::none;
    TrainingLog log;
    MetricsReport report;
    std::vector<double> scores;
};

struct AblationReport {
    std::vector<VariantResult> variants;
    /// (metric, method) rows of the comparison table.
    std::vector<std::pair<std::string, std::string>> rows;

    double value(std::size_t variant, std::size_t row) const;
    /// Index of the best variant for a row (ties -> first).
    std::size_t best(std::size_t row) const;
    std::string table() const;
};

nlohmann::json to_json(const AblationReport& report);

/// Trains, scores and evaluates {full, no_time2vec, no_edgeconv,
/// no_transformer} on the same data and seed.
AblationReport ablate(const RunConfig& config, const TimeSeriesDataset& raw);

struct PipelineResult {
    TrainResult trained;
    ScoreSeries scores;
    MetricsReport report;
};

/// train -> score -> evaluate on one dataset; labels are only read by the
/// evaluate step.
PipelineResult run_pipeline(const RunConfig& config, const TimeSeriesDataset& raw);

}  // namespace ecf
