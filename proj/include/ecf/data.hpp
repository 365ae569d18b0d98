#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecf {

/// Row-major [rows x cols] matrix; rows are timestamps, columns sensors.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    /// Rows [begin, end).
    Matrix slice_rows(std::size_t begin, std::size_t end) const;

    bool operator==(const Matrix&) const = default;
};

enum class Normalization { min_max, z_score };

const char* to_string(Normalization kind);
Normalization parse_normalization(const std::string& text);

/// Per-sensor statistics fit on the training series. Only the pair that
/// belongs to `kind` is filled.
struct NormalizationStats {
    Normalization kind = Normalization::min_max;
    std::vector<double> min;
    std::vector<double> max;
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct TimeSeriesDataset {
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;
    std::vector<std::string> sensor_names;
    NormalizationStats stats;
    std::string entity_id;

    std::size_t sensor_count() const { return train.cols; }
};

struct WindowBatch {
    std::vector<Matrix> windows;
    std::vector<std::size_t> start_indices;
    std::size_t window_length = 0;
    std::size_t stride = 0;
};

/// Numeric CSV. A first row that does not parse as numbers is taken as the
/// header; otherwise sensors are named s0..s{S-1}.
struct CsvTable {
    std::vector<std::string> header;
    Matrix data;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& data);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);

TimeSeriesDataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& test_path,
                               const std::filesystem::path& labels_path);

/// Min-max statistics fit on `train`; a constant sensor gets min == max.
NormalizationStats fit_min_max(const Matrix& train);

/// Maps into [0, 1] with the given stats (constant sensors -> 0.5), then
/// clips to [clip_low, clip_high].
Matrix apply_min_max(const Matrix& m, const NormalizationStats& stats, double clip_low = -1.0,
                     double clip_high = 2.0);

/// Mean and population standard deviation per sensor.
NormalizationStats fit_z_score(const Matrix& train);
/// (x - mean) / stddev; constant sensors map to 0. No clipping.
Matrix apply_z_score(const Matrix& m, const NormalizationStats& stats);

/// Applies `stats` the way test data is mapped (min-max clipped to [-1, 2]).
Matrix apply_normalization(const Matrix& m, const NormalizationStats& stats);

/// Fits on train only and rescales train and test. Min-max clips train to
/// [0, 1] and test to [-1, 2].
TimeSeriesDataset normalize(TimeSeriesDataset dataset, Normalization kind = Normalization::min_max);

WindowBatch make_windows(const Matrix& series, std::size_t window_length, std::size_t stride);

/// Contiguous temporal split: the first floor(T * ratio) rows train, the rest
/// validate.
std::pair<Matrix, Matrix> split_train_val(const Matrix& train, double ratio);

enum class AnomalyKind { point, contextual, collective };

const char* to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(const std::string& text);

struct InjectedAnomaly {
    AnomalyKind kind = AnomalyKind::point;
    std::size_t start = 0;
    std::size_t length = 1;
    /// Affected sensors; empty selects ceil(S/2) sensors from the seed.
    std::vector<std::size_t> sensors;
};

/// Parses "kind@start:length[,kind@start:length...]"; empty text -> none.
std::vector<InjectedAnomaly> parse_anomaly_plan(const std::string& text);
std::string format_anomaly_plan(const std::vector<InjectedAnomaly>& plan);

/// `count` segments spread over the test span, kinds cycling point ->
/// contextual -> collective; point anomalies last one step, the others
/// `segment_length` steps.
std::vector<InjectedAnomaly> spread_anomalies(std::size_t test_length, std::size_t count, std::size_t segment_length);

struct SyntheticData {
    TimeSeriesDataset dataset;
    /// Per-timestamp anomaly kind (only meaningful where the label is 1).
    std::vector<AnomalyKind> label_kinds;
};

/// Sensors are mixtures of shared latent sinusoids plus a private one and
/// N(0, 0.05^2) noise. Test continues the same process with anomalies
/// injected: point = +5 train std on one timestamp, contextual = phase
/// inversion of the deterministic part, collective = the affected sensors
/// run on time-shifted drivers, breaking their correlation with the rest.
SyntheticData generate_synthetic(std::size_t sensors, std::size_t train_length, std::size_t test_length,
                                 const std::vector<InjectedAnomaly>& anomalies, std::uint64_t seed);

}  // namespace ecf
