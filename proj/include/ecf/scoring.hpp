#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecf/data.hpp"

namespace ecf {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kSurvivalFloor = 1e-15;

/// Trailing-window Gaussian over reconstruction errors, one per sensor. The
/// window holds the last l_w errors, seeded with the errors of the final
/// training window; pushing an error drops the oldest.
class RollingGaussian {
public:
    /// `init` holds at least l_w rows; its last l_w rows seed the window.
    RollingGaussian(std::size_t window, const Matrix& init);

    void push(std::span<const double> errors);

    /// Sample mean and 1/(l_w-1) standard deviation (floored) of sensor s
    /// over the current window.
    double mean(std::size_t sensor) const;
    double stddev(std::size_t sensor) const;

    std::size_t window() const { return window_; }
    std::size_t sensors() const { return buffer_.cols; }

private:
    std::size_t window_;
    Matrix buffer_;  // ring buffer [window x S]
    std::size_t head_ = 0;
};

struct RollingStats {
    Matrix mean;
    Matrix stddev;
};

/// For each test timestamp t the window ends at t (Er_t included).
RollingStats rolling_stats(const Matrix& errors, std::size_t window, const Matrix& init);

/// -ln(1 - Phi((er - mean) / stddev)) with the survival floored at 1e-15.
double gauss_d_value(double error, double mean, double stddev);
Matrix gauss_d_score(const Matrix& errors, const Matrix& mean, const Matrix& stddev);

/// Row sums of the sensor-wise scores.
std::vector<double> aggregate_scores(const Matrix& sensor_scores);

/// 2-D Gaussian smoothing (time x sensor) with sigma_k on both axes, radius
/// ceil(3 sigma_k), kernel normalized to 1, reflective ("d c b a | a b c d")
/// boundaries.
Matrix gauss_d_k(const Matrix& sensor_scores, double sigma_k);

enum class ScoringMethod { gauss_d, gauss_d_k };

struct ScoreSeries {
    Matrix errors;
    Matrix sensor_scores;
    std::vector<double> aggregate;
    bool smoothed = false;
    std::optional<double> threshold;
    std::vector<int> predictions;
};

ScoreSeries score_errors(const Matrix& errors, std::size_t window, const Matrix& init, ScoringMethod method,
                         double sigma_k);

enum class FScore { f1, fpa1, fc1 };

const char* to_string(FScore metric);
double evaluate_fscore(FScore metric, std::span<const int> pred, std::span<const int> labels);

struct ThresholdResult {
    double threshold = 0.0;
    std::vector<int> predictions;
    double value = 0.0;  // metric at the threshold (best-F only)
};

/// Predictions are A_t > threshold.
std::vector<int> apply_threshold(std::span<const double> scores, double threshold);

/// Sweeps up to 10,000 quantiles of the unique scores (plus one value below
/// the minimum) and keeps the lowest threshold reaching the best metric.
/// Labels without positives give threshold max(A) and value 0; constant
/// scores give that constant with all-negative predictions.
ThresholdResult threshold_best_f(std::span<const double> scores, std::span<const int> labels, FScore metric);

/// Exactly k positives; ties at the cut go to earlier timestamps.
std::vector<int> threshold_top_k(std::span<const double> scores, std::size_t k);

inline constexpr double kTailEpsilons[] = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};

/// N * (-log10 eps). Epsilons outside {1e-1..1e-5} are rejected unless
/// `allow_custom` is set.
double tail_p_threshold(std::size_t sensors, double epsilon, bool allow_custom = false);
ThresholdResult threshold_tail_p(std::span<const double> scores, std::size_t sensors, double epsilon,
                                 bool allow_custom = false);

}  // namespace ecf
