#include "ecf/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ecf/error.hpp"
#include "ecf/metrics.hpp"

namespace ecf {

RollingGaussian::RollingGaussian(std::size_t window, const Matrix& init) : window_(window) {
    if (window < 2) throw config_error("rolling window must be at least 2, got " + std::to_string(window));
    if (init.rows < window)
        throw dimension_error("rolling init has " + std::to_string(init.rows) + " rows, window needs " +
                              std::to_string(window));
    buffer_ = init.slice_rows(init.rows - window, init.rows);
}

void RollingGaussian::push(std::span<const double> errors) {
    if (errors.size() != buffer_.cols)
        throw dimension_error("rolling push of " + std::to_string(errors.size()) + " sensors into " +
                              std::to_string(buffer_.cols));
    std::copy(errors.begin(), errors.end(), buffer_.values.begin() + static_cast<std::ptrdiff_t>(head_ * buffer_.cols));
    head_ = (head_ + 1) % window_;
}

double RollingGaussian::mean(std::size_t sensor) const {
    double total = 0.0;
    for (std::size_t r = 0; r < window_; ++r) total += buffer_(r, sensor);
    return total / static_cast<double>(window_);
}

double RollingGaussian::stddev(std::size_t sensor) const {
    const double mu = mean(sensor);
    double sq = 0.0;
    for (std::size_t r = 0; r < window_; ++r) sq += (buffer_(r, sensor) - mu) * (buffer_(r, sensor) - mu);
    return std::max(std::sqrt(sq / static_cast<double>(window_ - 1)), kSigmaFloor);
}

RollingStats rolling_stats(const Matrix& errors, std::size_t window, const Matrix& init) {
    if (init.cols != errors.cols)
        throw dimension_error("rolling init has " + std::to_string(init.cols) + " sensors, errors " +
                              std::to_string(errors.cols));
    RollingGaussian rolling(window, init);
    RollingStats stats{Matrix(errors.rows, errors.cols), Matrix(errors.rows, errors.cols)};
    for (std::size_t t = 0; t < errors.rows; ++t) {
        rolling.push(errors.row(t));
        for (std::size_t s = 0; s < errors.cols; ++s) {
            stats.mean(t, s) = rolling.mean(s);
            stats.stddev(t, s) = rolling.stddev(s);
        }
    }
    return stats;
}

double gauss_d_value(double error, double mean, double stddev) {
    const double z = (error - mean) / std::max(stddev, kSigmaFloor);
    if (z < 0.0) {
        // Survival is 1 - cdf with cdf = erfc(-z/sqrt2)/2 small: log1p keeps
        // the score strictly positive and increasing.
        return -std::log1p(-0.5 * std::erfc(-z / std::numbers::sqrt2));
    }
    const double survival = 0.5 * std::erfc(z / std::numbers::sqrt2);
    return -std::log(std::max(survival, kSurvivalFloor));
}

Matrix gauss_d_score(const Matrix& errors, const Matrix& mean, const Matrix& stddev) {
    if (mean.rows != errors.rows || mean.cols != errors.cols || stddev.rows != errors.rows ||
        stddev.cols != errors.cols)
        throw dimension_error("gauss_d_score: error/statistics shapes differ");
    Matrix a(errors.rows, errors.cols);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        a.values[i] = gauss_d_value(errors.values[i], mean.values[i], stddev.values[i]);
    return a;
}

std::vector<double> aggregate_scores(const Matrix& sensor_scores) {
    std::vector<double> total(sensor_scores.rows, 0.0);
    for (std::size_t t = 0; t < sensor_scores.rows; ++t)
        for (std::size_t s = 0; s < sensor_scores.cols; ++s) total[t] += sensor_scores(t, s);
    return total;
}

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return m < static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(m) : static_cast<std::size_t>(period - 1 - m);
}

}  // namespace

Matrix gauss_d_k(const Matrix& sensor_scores, double sigma_k) {
    if (!(sigma_k > 0.0)) throw config_error("gaussian kernel sigma must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma_k));
    std::vector<double> w1(static_cast<std::size_t>(2 * radius + 1));
    for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const double u = static_cast<double>(d) / sigma_k;
        w1[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * u * u);
    }
    double total = 0.0;
    for (double a : w1)
        for (double b : w1) total += a * b;

    const std::size_t rows = sensor_scores.rows, cols = sensor_scores.cols;
    Matrix out(rows, cols);
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t s = 0; s < cols; ++s) {
            double acc = 0.0;
            for (std::ptrdiff_t dt = -radius; dt <= radius; ++dt) {
                const std::size_t tt = reflect(static_cast<std::ptrdiff_t>(t) + dt, rows);
                const double wt = w1[static_cast<std::size_t>(dt + radius)];
                for (std::ptrdiff_t ds = -radius; ds <= radius; ++ds) {
                    const std::size_t ss = reflect(static_cast<std::ptrdiff_t>(s) + ds, cols);
                    acc += wt * w1[static_cast<std::size_t>(ds + radius)] * sensor_scores(tt, ss);
                }
            }
            out(t, s) = acc / total;
        }
    }
    return out;
}

ScoreSeries score_errors(const Matrix& errors, std::size_t window, const Matrix& init, ScoringMethod method,
                         double sigma_k) {
    ScoreSeries series;
    series.errors = errors;
    const auto stats = rolling_stats(errors, window, init);
    series.sensor_scores = gauss_d_score(errors, stats.mean, stats.stddev);
    if (method == ScoringMethod::gauss_d_k) {
        series.sensor_scores = gauss_d_k(series.sensor_scores, sigma_k);
        series.smoothed = true;
    }
    series.aggregate = aggregate_scores(series.sensor_scores);
    return series;
}

const char* to_string(FScore metric) {
    switch (metric) {
        case FScore::f1: return "F1";
        case FScore::fpa1: return "Fpa1";
        case FScore::fc1: return "Fc1";
    }
    return "?";
}

double evaluate_fscore(FScore metric, std::span<const int> pred, std::span<const int> labels) {
    switch (metric) {
        case FScore::f1: return f1_point(pred, labels).f1;
        case FScore::fpa1: return fpa1(pred, labels).f1;
        case FScore::fc1: return fc1(pred, labels).fc1;
    }
    return 0.0;
}

std::vector<int> apply_threshold(std::span<const double> scores, double threshold) {
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > threshold ? 1 : 0;
    return pred;
}

ThresholdResult threshold_best_f(std::span<const double> scores, std::span<const int> labels, FScore metric) {
    if (scores.size() != labels.size())
        throw dimension_error("threshold_best_f: " + std::to_string(scores.size()) + " scores, " +
                              std::to_string(labels.size()) + " labels");
    ThresholdResult result;
    if (scores.empty()) return result;
    std::vector<double> unique(scores.begin(), scores.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    const bool any_positive = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
    if (!any_positive || unique.size() == 1) {
        result.threshold = unique.back();
        result.predictions = apply_threshold(scores, result.threshold);
        result.value = any_positive ? evaluate_fscore(metric, result.predictions, labels) : 0.0;
        return result;
    }

    constexpr std::size_t kMaxCandidates = 10000;
    std::vector<double> candidates;
    candidates.push_back(std::nextafter(unique.front(), -INFINITY));
    if (unique.size() <= kMaxCandidates) {
        candidates.insert(candidates.end(), unique.begin(), unique.end());
    } else {
        for (std::size_t i = 0; i < kMaxCandidates; ++i) {
            const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(i) *
                                                                   static_cast<double>(unique.size() - 1) /
                                                                   static_cast<double>(kMaxCandidates - 1)));
            candidates.push_back(unique[idx]);
        }
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    }

    result.value = -1.0;
    for (double c : candidates) {
        auto pred = apply_threshold(scores, c);
        const double v = evaluate_fscore(metric, pred, labels);
        if (v > result.value) {
            result.value = v;
            result.threshold = c;
            result.predictions = std::move(pred);
        }
    }
    return result;
}

std::vector<int> threshold_top_k(std::span<const double> scores, std::size_t k) {
    if (k > scores.size())
        throw config_error("top-k: k = " + std::to_string(k) + " exceeds series length " +
                           std::to_string(scores.size()));
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<int> pred(scores.size(), 0);
    for (std::size_t i = 0; i < k; ++i) pred[order[i]] = 1;
    return pred;
}

double tail_p_threshold(std::size_t sensors, double epsilon, bool allow_custom) {
    const bool listed = std::any_of(std::begin(kTailEpsilons), std::end(kTailEpsilons),
                                    [&](double e) { return std::abs(e - epsilon) <= 1e-12 * e; });
    if (!listed && !allow_custom)
        throw config_error("tail-p epsilon " + std::to_string(epsilon) +
                           " is not one of 1e-1..1e-5 (pass the custom-epsilon override to allow it)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw config_error("tail-p epsilon must be in (0, 1)");
    return static_cast<double>(sensors) * -std::log10(epsilon);
}

ThresholdResult threshold_tail_p(std::span<const double> scores, std::size_t sensors, double epsilon,
                                 bool allow_custom) {
    ThresholdResult r;
    r.threshold = tail_p_threshold(sensors, epsilon, allow_custom);
    r.predictions = apply_threshold(scores, r.threshold);
    return r;
}

}  // namespace ecf
