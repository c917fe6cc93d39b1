#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lanemap/geometry.hpp"
#include "lanemap/lane_model.hpp"
#include "lanemap/matcher.hpp"

namespace lanemap {

struct EvalConfig {
    std::vector<double> thresholds{2.0, 5.0, 10.0};  // pixels
    double sample_interval = 1.0;

    void validate() const;
};

struct ThresholdScore {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::vector<ThresholdScore> scores;  // one per threshold, ascending
};

double f1_score(double precision, double recall);

// Points every `interval` of arc length from the start, plus the end point.
Polyline sample_polyline(const Polyline& poly, double interval);

// Precision: share of sampled prediction points within each threshold of the
// ground-truth segments. Recall: the same with roles swapped.
EvalReport evaluate(std::span<const Polyline> pred, std::span<const Polyline> gt, const EvalConfig& cfg = {});

// Converts metric thresholds to pixels using the mean ground sample distance
// at the image center.
std::vector<double> thresholds_from_meters(std::span<const double> meters, const GeoTransform& t, int width,
                                           int height);

// `threshold,precision,recall,f1` rows.
std::string format_eval_csv(const EvalReport& report);
// Aligned Precision / Recall / F1-score table with one column per threshold.
std::string format_eval_table(const EvalReport& report);

// Label of a vertex that ends its lane.
inline constexpr std::size_t kTerminalLabel = std::numeric_limits<std::size_t>::max();

// true_class is the rank of the true successor among all vertices by
// distance, or kTerminalLabel. Ranks at or beyond K cannot be predicted.
struct MatchTruth {
    std::size_t true_class = 0;
    PixelPoint location;
};

struct MatcherReport {
    double f1_class = 0.0;      // macro F1 over the classes seen, percent
    double mse_position = 0.0;  // px^2
    double runtime_class = 0.0; // seconds per image
};

// Predicted classes at or past `candidate_slots` (K) read as kTerminalLabel.
MatcherReport matcher_metrics(std::span<const MatchDecision> decisions, std::span<const MatchTruth> truths,
                              std::span<const double> wall_times, std::size_t candidate_slots = kTerminalLabel);

}  // namespace lanemap
