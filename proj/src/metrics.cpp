#include "ecf/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ecf/error.hpp"

namespace ecf {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw dimension_error(std::string(what) + ": prediction length " + std::to_string(a) +
                              " does not match label length " + std::to_string(b));
}

std::size_t overlap(const Segment& a, const Segment& b) {
    const auto lo = std::max(a.start, b.start);
    const auto hi = std::min(a.end, b.end);
    return hi > lo ? hi - lo : 0;
}

// Covered fraction of `range` by `part` (part lies inside range).
double size_reward(const Segment& range, const Segment& part, PositionBias bias) {
    const double len = static_cast<double>(range.length());
    const double flat = static_cast<double>(part.length()) / len;
    if (bias == PositionBias::flat) return flat;
    // Weight of position p (0-based) is L - p; the weights sum to L(L+1)/2.
    double covered = 0.0;
    for (std::size_t t = part.start; t < part.end; ++t) covered += len - static_cast<double>(t - range.start);
    return std::min(flat, covered / (len * (len + 1.0) / 2.0));
}

// Sum over the `others` that overlap `range`, scaled by the cardinality factor.
double overlap_reward(const Segment& range, const SegmentSet& others, PositionBias bias, CardinalityKind gamma,
                      bool& hit) {
    double reward = 0.0;
    std::size_t count = 0;
    for (const auto& o : others) {
        if (overlap(range, o) == 0) continue;
        ++count;
        const Segment part{std::max(range.start, o.start), std::min(range.end, o.end)};
        reward += size_reward(range, part, bias);
    }
    hit = count > 0;
    if (gamma == CardinalityKind::inverse && count > 1) reward /= static_cast<double>(count);
    return reward;
}

}  // namespace

SegmentSet to_segments(std::span<const int> binary) {
    SegmentSet out;
    std::size_t t = 0;
    while (t < binary.size()) {
        if (binary[t] == 0) {
            ++t;
            continue;
        }
        const std::size_t start = t;
        while (t < binary.size() && binary[t] != 0) ++t;
        out.push_back({start, t});
    }
    return out;
}

double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

PointScores f1_point(std::span<const int> pred, std::span<const int> labels) {
    require_same_length(pred.size(), labels.size(), "f1_point");
    PointScores s;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, l = labels[i] != 0;
        if (p && l) ++s.counts.tp;
        else if (p) ++s.counts.fp;
        else if (l) ++s.counts.fn;
        else ++s.counts.tn;
    }
    const auto& c = s.counts;
    s.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = harmonic_mean(s.precision, s.recall);
    return s;
}

std::vector<int> point_adjust(std::span<const int> pred, std::span<const int> labels) {
    require_same_length(pred.size(), labels.size(), "point_adjust");
    std::vector<int> adjusted(pred.begin(), pred.end());
    for (auto& v : adjusted) v = v != 0;
    for (const auto& seg : to_segments(labels)) {
        bool detected = false;
        for (std::size_t t = seg.start; t < seg.end && !detected; ++t) detected = pred[t] != 0;
        if (detected) std::fill(adjusted.begin() + static_cast<std::ptrdiff_t>(seg.start),
                                adjusted.begin() + static_cast<std::ptrdiff_t>(seg.end), 1);
    }
    return adjusted;
}

PointScores fpa1(std::span<const int> pred, std::span<const int> labels) {
    return f1_point(point_adjust(pred, labels), labels);
}

CompositeScores fc1(std::span<const int> pred, std::span<const int> labels) {
    require_same_length(pred.size(), labels.size(), "fc1");
    CompositeScores s;
    s.point_precision = f1_point(pred, labels).precision;
    const auto segments = to_segments(labels);
    s.true_segments = segments.size();
    for (const auto& seg : segments) {
        for (std::size_t t = seg.start; t < seg.end; ++t) {
            if (pred[t] != 0) {
                ++s.detected_segments;
                break;
            }
        }
    }
    s.segment_recall =
        segments.empty() ? 0.0 : static_cast<double>(s.detected_segments) / static_cast<double>(segments.size());
    s.fc1 = harmonic_mean(s.point_precision, s.segment_recall);
    return s;
}

const char* to_string(AdLevel level) {
    switch (level) {
        case AdLevel::ad1: return "AD1";
        case AdLevel::ad2: return "AD2";
        case AdLevel::ad3: return "AD3";
        case AdLevel::ad4: return "AD4";
    }
    return "?";
}

RangeMetricParams RangeMetricParams::preset(AdLevel level) {
    switch (level) {
        case AdLevel::ad1: return {1.0, PositionBias::flat, CardinalityKind::one};
        case AdLevel::ad2: return {0.0, PositionBias::flat, CardinalityKind::one};
        case AdLevel::ad3: return {0.0, PositionBias::front, CardinalityKind::one};
        case AdLevel::ad4: return {0.0, PositionBias::front, CardinalityKind::inverse};
    }
    return {};
}

RangeScores range_pr(const SegmentSet& predicted, const SegmentSet& truth, const RangeMetricParams& params) {
    if (!(params.alpha >= 0.0 && params.alpha <= 1.0)) throw config_error("range metric alpha must be in [0, 1]");
    RangeScores s;
    if (truth.empty()) {
        warn("range_pr: no true anomaly ranges, recall reported as 0");
    } else {
        double total = 0.0;
        for (const auto& r : truth) {
            bool hit = false;
            const double reward = overlap_reward(r, predicted, params.delta, params.gamma, hit);
            total += params.alpha * (hit ? 1.0 : 0.0) + (1.0 - params.alpha) * reward;
        }
        s.recall = total / static_cast<double>(truth.size());
    }
    if (!predicted.empty()) {
        double total = 0.0;
        for (const auto& p : predicted) {
            bool hit = false;
            total += overlap_reward(p, truth, PositionBias::flat, params.gamma, hit);
        }
        s.precision = total / static_cast<double>(predicted.size());
    }
    s.f1 = harmonic_mean(s.precision, s.recall);
    return s;
}

RangeScores range_pr(std::span<const int> pred, std::span<const int> labels, AdLevel level) {
    require_same_length(pred.size(), labels.size(), "range_pr");
    return range_pr(to_segments(pred), to_segments(labels), RangeMetricParams::preset(level));
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    require_same_length(scores.size(), labels.size(), "auc_roc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // Ranks i+1..j share their average.
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t q = i; q < j; ++q) {
            if (labels[order[q]] != 0) {
                positive_rank_sum += avg_rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw numeric_error("auc_roc is undefined when labels contain one class");
    const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double auc_prc(std::span<const double> scores, std::span<const int> labels) {
    require_same_length(scores.size(), labels.size(), "auc_prc");
    const std::size_t n = scores.size();
    const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
    if (positives == 0) {
        warn("auc_prc: no positive labels, returning 0");
        return 0.0;
    }
    if (positives == n) warn("auc_prc: no negative labels");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, seen = 0, i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] != 0) ++tp;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

}  // namespace ecf
