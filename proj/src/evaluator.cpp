#include "lanemap/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "lanemap/error.hpp"

namespace lanemap {

void EvalConfig::validate() const {
    if (thresholds.empty()) {
        throw ValidationError("at least one threshold is required");
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
            throw ValidationError("thresholds must be positive and strictly ascending");
        }
    }
    if (!(sample_interval > 0.0)) {
        throw ValidationError("sample_interval must be > 0");
    }
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Polyline sample_polyline(const Polyline& poly, double interval) {
    if (poly.size() < 2) {
        throw ValidationError("cannot sample a polyline with fewer than 2 vertices");
    }
    if (!(interval > 0.0)) {
        throw ValidationError("sample interval must be > 0");
    }
    const double total = polyline_length(poly);
    Polyline out;
    std::size_t seg = 0;
    double seg_start = 0.0;  // arc length at poly[seg]
    const double eps = 1e-9 * std::max(1.0, total);
    for (std::size_t k = 0;; ++k) {
        const double s = static_cast<double>(k) * interval;
        if (s >= total - eps) break;
        while (seg + 1 < poly.size() - 1 && seg_start + distance(poly[seg], poly[seg + 1]) < s) {
            seg_start += distance(poly[seg], poly[seg + 1]);
            ++seg;
        }
        const double len = distance(poly[seg], poly[seg + 1]);
        const double t = len > 0.0 ? std::clamp((s - seg_start) / len, 0.0, 1.0) : 0.0;
        out.push_back({poly[seg].x + t * (poly[seg + 1].x - poly[seg].x),
                       poly[seg].y + t * (poly[seg + 1].y - poly[seg].y)});
    }
    out.push_back(poly.back());
    return out;
}

namespace {

double distance_to_geometry(PixelPoint p, std::span<const Polyline> geometry) {
    double best = std::numeric_limits<double>::infinity();
    for (const Polyline& poly : geometry) {
        for (std::size_t i = 1; i < poly.size(); ++i) {
            best = std::min(best, point_segment_distance(p, poly[i - 1], poly[i]));
        }
    }
    return best;
}

// Share of `from`'s sample points within each threshold of `to`.
std::vector<double> coverage(std::span<const Polyline> from, std::span<const Polyline> to, const EvalConfig& cfg) {
    std::vector<double> hits(cfg.thresholds.size(), 0.0);
    std::size_t total = 0;
    for (const Polyline& poly : from) {
        for (const PixelPoint& p : sample_polyline(poly, cfg.sample_interval)) {
            const double d = distance_to_geometry(p, to);
            for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
                if (d <= cfg.thresholds[t]) hits[t] += 1.0;
            }
            ++total;
        }
    }
    for (double& h : hits) {
        h = total > 0 ? h / static_cast<double>(total) : 0.0;
    }
    return hits;
}

}  // namespace

EvalReport evaluate(std::span<const Polyline> pred, std::span<const Polyline> gt, const EvalConfig& cfg) {
    cfg.validate();
    const std::vector<double> precision = coverage(pred, gt, cfg);
    const std::vector<double> recall = coverage(gt, pred, cfg);
    EvalReport report;
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
        report.scores.push_back({cfg.thresholds[t], precision[t], recall[t], f1_score(precision[t], recall[t])});
    }
    return report;
}

std::vector<double> thresholds_from_meters(std::span<const double> meters, const GeoTransform& t, int width,
                                           int height) {
    const PixelPoint c{width / 2.0, height / 2.0};
    const GeoPoint g0 = pixel_to_geo(t, c);
    const double mx = haversine_m(g0, pixel_to_geo(t, {c.x + 1.0, c.y}));
    const double my = haversine_m(g0, pixel_to_geo(t, {c.x, c.y + 1.0}));
    const double gsd = 0.5 * (mx + my);
    if (!(gsd > 0.0)) {
        throw ValidationError("geo transform has zero ground sample distance");
    }
    std::vector<double> px;
    for (double m : meters) {
        px.push_back(m / gsd);
    }
    return px;
}

std::string format_eval_csv(const EvalReport& report) {
    std::ostringstream out;
    out << std::setprecision(9) << "threshold,precision,recall,f1\n";
    for (const ThresholdScore& s : report.scores) {
        out << s.threshold << ',' << s.precision << ',' << s.recall << ',' << s.f1 << '\n';
    }
    return out.str();
}

std::string format_eval_table(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed;
    auto row = [&](const std::string& label, auto get) {
        out << std::left << std::setw(10) << label << std::right;
        for (const ThresholdScore& s : report.scores) {
            out << std::setw(8) << std::setprecision(3) << get(s);
        }
        out << '\n';
    };
    out << std::left << std::setw(10) << "metric" << std::right;
    for (const ThresholdScore& s : report.scores) {
        out << std::setw(8) << std::setprecision(1) << s.threshold;
    }
    out << '\n';
    row("Precision", [](const ThresholdScore& s) { return s.precision; });
    row("Recall", [](const ThresholdScore& s) { return s.recall; });
    row("F1-score", [](const ThresholdScore& s) { return s.f1; });
    return out.str();
}

MatcherReport matcher_metrics(std::span<const MatchDecision> decisions, std::span<const MatchTruth> truths,
                              std::span<const double> wall_times, std::size_t candidate_slots) {
    if (decisions.size() != truths.size()) {
        throw ValidationError("matcher_metrics: decisions and truths differ in length");
    }
    struct Counts {
        double tp = 0, fp = 0, fn = 0;
    };
    std::map<std::size_t, Counts> per_class;
    double sq = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const std::size_t best = decisions[i].best_class();
        const std::size_t pred = best >= candidate_slots ? kTerminalLabel : best;
        const std::size_t truth = truths[i].true_class;
        if (pred == truth) {
            per_class[truth].tp += 1;
        } else {
            per_class[pred].fp += 1;
            per_class[truth].fn += 1;
        }
        const double dx = decisions[i].location.x - truths[i].location.x;
        const double dy = decisions[i].location.y - truths[i].location.y;
        sq += dx * dx + dy * dy;
    }
    MatcherReport r;
    if (!per_class.empty()) {
        double f1_sum = 0.0;
        for (const auto& [cls, c] : per_class) {
            const double denom = 2 * c.tp + c.fp + c.fn;
            f1_sum += denom > 0 ? 2 * c.tp / denom : 0.0;
        }
        r.f1_class = 100.0 * f1_sum / static_cast<double>(per_class.size());
        r.mse_position = sq / static_cast<double>(decisions.size());
    }
    if (!wall_times.empty()) {
        double t = 0.0;
        for (double w : wall_times) t += w;
        r.runtime_class = t / static_cast<double>(wall_times.size());
    }
    return r;
}

}  // namespace lanemap
