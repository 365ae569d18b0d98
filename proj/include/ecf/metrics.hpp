#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ecf {

/// Half-open [start, end) run of positive timestamps.
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    bool operator==(const Segment&) const = default;
};

/// Sorted, disjoint, maximal segments.
using SegmentSet = std::vector<Segment>;

SegmentSet to_segments(std::span<const int> binary);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

struct PointScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Confusion counts;
};

/// Harmonic mean of precision p and recall r; 0 when p + r == 0.
double harmonic_mean(double p, double r);

PointScores f1_point(std::span<const int> pred, std::span<const int> labels);

/// Marks every point of a true segment as detected when any of its points
/// is predicted. Predictions outside true segments are kept.
std::vector<int> point_adjust(std::span<const int> pred, std::span<const int> labels);

/// f1_point on the point-adjusted predictions.
PointScores fpa1(std::span<const int> pred, std::span<const int> labels);

struct CompositeScores {
    double point_precision = 0.0;
    double segment_recall = 0.0;
    double fc1 = 0.0;
    std::size_t detected_segments = 0;
    std::size_t true_segments = 0;
};

/// Point-wise precision combined with segment-wise recall.
CompositeScores fc1(std::span<const int> pred, std::span<const int> labels);

enum class PositionBias { flat, front };
enum class CardinalityKind { one, inverse };
enum class AdLevel { ad1 = 1, ad2 = 2, ad3 = 3, ad4 = 4 };

const char* to_string(AdLevel level);

/// Range-based precision/recall knobs. Recall of a true range R is
///   alpha * [R is hit] + (1 - alpha) * card(R) * sum_P size(R, R & P)
/// where size() is the covered fraction of R. With `front`, covered
/// positions are weighted by linearly decaying weights (L - p) and the
/// fraction is capped at the flat one, so late detection is penalized and
/// early detection never scores above range coverage. card() is 1 (`one`)
/// or 1 / #overlapping ranges (`inverse`). Precision uses alpha = 0 and
/// flat weights with the same cardinality rule.
struct RangeMetricParams {
    double alpha = 0.0;
    PositionBias delta = PositionBias::flat;
    CardinalityKind gamma = CardinalityKind::one;

    /// AD1: alpha = 1. AD2: flat, one. AD3: front, one. AD4: front, inverse.
    static RangeMetricParams preset(AdLevel level);
};

struct RangeScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Averages over predicted ranges (precision) and true ranges (recall). No
/// predicted ranges gives precision 0; no true ranges gives recall 0 and a
/// warning.
RangeScores range_pr(const SegmentSet& predicted, const SegmentSet& truth, const RangeMetricParams& params);
RangeScores range_pr(std::span<const int> pred, std::span<const int> labels, AdLevel level);

/// Mann-Whitney rank statistic with average ranks for ties. Throws when the
/// labels contain a single class.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Average precision over distinct score thresholds (tied scores enter
/// together). Without positives returns 0 with a warning.
double auc_prc(std::span<const double> scores, std::span<const int> labels);

}  // namespace ecf
