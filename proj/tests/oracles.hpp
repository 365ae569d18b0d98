#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour directness over speed and share no code with the
// library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "ecf/metrics.hpp"
#include "ecf/tensor.hpp"

namespace oracle {

// ---------------------------------------------------------------- gradients

struct GradCheck {
    double worst = 0.0;          // largest relative error over all coordinates
    std::size_t coordinates = 0;
    std::size_t retried = 0;     // coordinates that needed another step size
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Central differences of `loss` (evaluated without recording) against the
// gradients left in `params` by one backward pass of the same function.
// Coordinates whose first estimate misses the tolerance are retried with
// coarser steps (round-off dominates tiny gradients) and finer ones (a
// ReLU/max kink or a kNN switch sits within the first step).
inline GradCheck check_gradients(const std::function<ecf::Tensor()>& loss, std::vector<ecf::Tensor> params,
                                 double tolerance = 1e-4) {
    for (auto& p : params) p.zero_grad();
    ecf::backward(loss());
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(p.size(), 0.0);
    }

    ecf::NoGradGuard no_grad;
    auto value = [&] { return loss().item(); };
    GradCheck result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto data = params[pi].mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double original = data[i];
            double best = std::numeric_limits<double>::infinity();
            int attempt = 0;
            for (double h : {1e-6, 1e-5, 1e-4, 1e-7, 1e-8}) {
                const double step = h * std::max(1.0, std::abs(original));
                data[i] = original + step;
                const double up = value();
                data[i] = original - step;
                const double down = value();
                data[i] = original;
                best = std::min(best, relative_error(analytic[pi][i], (up - down) / (2.0 * step)));
                if (best <= tolerance) break;
                ++attempt;
            }
            if (attempt > 0) ++result.retried;
            result.worst = std::max(result.worst, best);
            ++result.coordinates;
        }
    }
    return result;
}

// ---------------------------------------------------------------- kNN

// All-pairs search: self first, then every other point ordered by
// (squared distance, index).
inline std::vector<std::size_t> brute_knn(const std::vector<double>& points, std::size_t n, std::size_t dim,
                                          std::size_t k) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = points[i * dim + c] - points[j * dim + c];
                d += diff * diff;
            }
            all.emplace_back(d, j);
        }
        std::sort(all.begin(), all.end());
        out.push_back(i);
        for (std::size_t q = 0; q + 1 < k; ++q) out.push_back(all[q].second);
    }
    return out;
}

// ---------------------------------------------------------------- metrics

inline double hmean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

struct Prf {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline Prf point_prf(const std::vector<int>& pred, const std::vector<int>& label) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        tp += pred[i] && label[i];
        fp += pred[i] && !label[i];
        fn += !pred[i] && label[i];
    }
    Prf r;
    r.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    r.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    r.f1 = hmean(r.precision, r.recall);
    return r;
}

// Index set of the maximal run of ones around position i (i must be a one).
inline std::pair<std::size_t, std::size_t> run_around(const std::vector<int>& label, std::size_t i) {
    std::size_t lo = i, hi = i + 1;
    while (lo > 0 && label[lo - 1]) --lo;
    while (hi < label.size() && label[hi]) ++hi;
    return {lo, hi};
}

inline Prf point_adjusted_prf(const std::vector<int>& pred, const std::vector<int>& label) {
    std::vector<int> adjusted = pred;
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (!label[i]) continue;
        auto [lo, hi] = run_around(label, i);
        bool hit = false;
        for (std::size_t t = lo; t < hi; ++t) hit = hit || pred[t];
        if (hit) adjusted[i] = 1;
    }
    return point_prf(adjusted, label);
}

inline std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<int>& v) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] && (i == 0 || !v[i - 1])) out.push_back(run_around(v, i));
    return out;
}

inline double composite_f1(const std::vector<int>& pred, const std::vector<int>& label) {
    const double precision = point_prf(pred, label).precision;
    const auto segments = runs(label);
    std::size_t detected = 0;
    for (auto [lo, hi] : segments) {
        bool hit = false;
        for (std::size_t t = lo; t < hi; ++t) hit = hit || pred[t];
        detected += hit;
    }
    const double recall = segments.empty() ? 0.0 : double(detected) / double(segments.size());
    return hmean(precision, recall);
}

// Range precision/recall from positional sets: for each range, collect the
// covered positions of every overlapping opposite range and weight them.
inline Prf range_prf(const std::vector<int>& pred, const std::vector<int>& label, ecf::AdLevel level) {
    const auto p = ecf::RangeMetricParams::preset(level);
    auto reward = [&](std::pair<std::size_t, std::size_t> range, const std::vector<std::pair<std::size_t, std::size_t>>& others,
                      bool front, double& hit) {
        const double len = double(range.second - range.first);
        double total = 0.0;
        std::size_t count = 0;
        for (auto o : others) {
            std::set<std::size_t> covered;
            for (std::size_t t = range.first; t < range.second; ++t)
                if (t >= o.first && t < o.second) covered.insert(t);
            if (covered.empty()) continue;
            ++count;
            double flat = double(covered.size()) / len;
            double value = flat;
            if (front) {
                double w = 0.0;
                for (auto t : covered) w += len - double(t - range.first);
                value = std::min(flat, w / (len * (len + 1.0) / 2.0));
            }
            total += value;
        }
        hit = count > 0 ? 1.0 : 0.0;
        if (p.gamma == ecf::CardinalityKind::inverse && count > 1) total /= double(count);
        return total;
    };
    const auto truth = runs(label), predicted = runs(pred);
    Prf r;
    if (!truth.empty()) {
        double total = 0.0;
        for (auto range : truth) {
            double hit = 0.0;
            const double w = reward(range, predicted, p.delta == ecf::PositionBias::front, hit);
            total += p.alpha * hit + (1.0 - p.alpha) * w;
        }
        r.recall = total / double(truth.size());
    }
    if (!predicted.empty()) {
        double total = 0.0;
        for (auto range : predicted) {
            double hit = 0.0;
            total += reward(range, truth, false, hit);
        }
        r.precision = total / double(predicted.size());
    }
    r.f1 = hmean(r.precision, r.recall);
    return r;
}

// ---------------------------------------------------------------- thresholds

// Best metric over every distinct prediction set a threshold can induce,
// and the smallest threshold reaching it.
template <class Metric>
std::pair<double, double> exhaustive_best(const std::vector<double>& scores, const std::vector<int>& label,
                                          Metric metric) {
    std::vector<double> cuts(scores.begin(), scores.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.insert(cuts.begin(), std::nextafter(cuts.front(), -std::numeric_limits<double>::infinity()));
    double best = -1.0, at = 0.0;
    for (double c : cuts) {
        std::vector<int> pred(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > c;
        const double v = metric(pred, label);
        if (v > best) {
            best = v;
            at = c;
        }
    }
    return {best, at};
}

// ---------------------------------------------------------------- scoring

// Direct 2-D convolution with an explicitly mirrored input.
inline std::vector<double> smooth_direct(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                         double sigma) {
    const long r = long(std::ceil(3.0 * sigma));
    auto mirror = [](long i, long n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    double norm = 0.0;
    for (long dt = -r; dt <= r; ++dt)
        for (long ds = -r; ds <= r; ++ds) norm += std::exp(-(double(dt * dt + ds * ds)) / (2.0 * sigma * sigma));
    std::vector<double> out(rows * cols, 0.0);
    for (long t = 0; t < long(rows); ++t)
        for (long s = 0; s < long(cols); ++s) {
            double acc = 0.0;
            for (long dt = -r; dt <= r; ++dt)
                for (long ds = -r; ds <= r; ++ds) {
                    const double w = std::exp(-(double(dt * dt + ds * ds)) / (2.0 * sigma * sigma)) / norm;
                    acc += w * a[std::size_t(mirror(t + dt, long(rows))) * cols + std::size_t(mirror(s + ds, long(cols)))];
                }
            out[std::size_t(t) * cols + std::size_t(s)] = acc;
        }
    return out;
}

// -ln(1 - Phi(z)) from the complementary error function, no branches.
inline double gauss_score(double e, double mu, double sigma) {
    const double z = (e - mu) / sigma;
    return -std::log(std::max(0.5 * std::erfc(z / std::sqrt(2.0)), 1e-15));
}

// Per-timestamp z-score of each sensor against its own trailing window of
// raw values, summed over sensors. A detector with no learned model.
inline std::vector<double> rolling_zscore(const std::vector<double>& series, std::size_t rows, std::size_t cols,
                                          std::size_t window) {
    std::vector<double> out(rows, 0.0);
    for (std::size_t t = 0; t < rows; ++t) {
        const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
        for (std::size_t s = 0; s < cols; ++s) {
            double mu = 0.0, n = double(t + 1 - lo);
            for (std::size_t q = lo; q <= t; ++q) mu += series[q * cols + s];
            mu /= n;
            double var = 0.0;
            for (std::size_t q = lo; q <= t; ++q) var += (series[q * cols + s] - mu) * (series[q * cols + s] - mu);
            const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
            out[t] += sd > 0 ? std::abs(series[t * cols + s] - mu) / sd : 0.0;
        }
    }
    return out;
}

// AU-ROC as the fraction of (positive, negative) pairs ranked correctly,
// ties counting one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& label) {
    double good = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (label[i] && !label[j]) {
                pairs += 1.0;
                good += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
            }
    return good / pairs;
}

}  // namespace oracle
