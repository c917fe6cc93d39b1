#include "lanemap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lanemap/error.hpp"

namespace lanemap {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
    }
}

double clamp_prob(double p) { return std::clamp(p, kClampEps, 1.0 - kClampEps); }

bool clamped(double p) { return p < kClampEps || p > 1.0 - kClampEps; }

double positive_count(std::span<const double> target) {
    const auto n = std::count(target.begin(), target.end(), 1.0);
    return n > 0 ? static_cast<double>(n) : 1.0;
}

}  // namespace

double focal_loss(std::span<const double> pred, std::span<const double> target, double alpha, double beta) {
    require_same_size(pred.size(), target.size(), "focal_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = clamp_prob(pred[i]);
        if (target[i] == 1.0) {
            sum += std::pow(1.0 - p, alpha) * std::log(p);
        } else {
            sum += std::pow(1.0 - target[i], beta) * std::pow(p, alpha) * std::log(1.0 - p);
        }
    }
    return -sum / positive_count(target);
}

std::vector<double> focal_loss_grad(std::span<const double> pred, std::span<const double> target, double alpha,
                                    double beta) {
    require_same_size(pred.size(), target.size(), "focal_loss");
    const double n = positive_count(target);
    std::vector<double> g(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (clamped(pred[i])) {
            continue;
        }
        const double p = pred[i];
        double d;
        if (target[i] == 1.0) {
            d = -alpha * std::pow(1.0 - p, alpha - 1.0) * std::log(p) + std::pow(1.0 - p, alpha) / p;
        } else {
            d = std::pow(1.0 - target[i], beta) *
                (alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p) - std::pow(p, alpha) / (1.0 - p));
        }
        g[i] = -d / n;
    }
    return g;
}

double cross_entropy_loss(std::span<const double> probs, std::size_t true_class) {
    if (true_class >= probs.size()) {
        throw ValidationError("cross_entropy_loss: class index " + std::to_string(true_class) + " out of range");
    }
    return -std::log(clamp_prob(probs[true_class]));
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        mx = std::max(mx, z);
    }
    if (!std::isfinite(mx)) {
        return out;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::isinf(logits[i]) ? 0.0 : std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t true_class) {
    if (true_class >= logits.size()) {
        throw ValidationError("softmax_cross_entropy: class index out of range");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (double z : logits) {
        if (!std::isinf(z)) {
            sum += std::exp(z - mx);
        }
    }
    return std::log(sum) + mx - logits[true_class];
}

std::vector<double> softmax_cross_entropy_grad(std::span<const double> logits, std::size_t true_class) {
    std::vector<double> g = softmax(logits);
    g.at(true_class) -= 1.0;
    return g;
}

double smooth_l1_loss(std::span<const double> pred, std::span<const double> target) {
    require_same_size(pred.size(), target.size(), "smooth_l1_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = std::abs(pred[i] - target[i]);
        sum += e < 1.0 ? 0.5 * e * e : e - 0.5;
    }
    return sum;
}

std::vector<double> smooth_l1_grad(std::span<const double> pred, std::span<const double> target) {
    require_same_size(pred.size(), target.size(), "smooth_l1_loss");
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        g[i] = std::abs(e) < 1.0 ? e : (e > 0 ? 1.0 : -1.0);
    }
    return g;
}

double seg_loss(std::span<const double> pred, std::span<const double> target) {
    require_same_size(pred.size(), target.size(), "seg_loss");
    if (pred.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = clamp_prob(pred[i]);
        sum -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred.size());
}

std::vector<double> seg_loss_grad(std::span<const double> pred, std::span<const double> target) {
    require_same_size(pred.size(), target.size(), "seg_loss");
    std::vector<double> g(pred.size(), 0.0);
    const auto n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (clamped(pred[i])) {
            continue;
        }
        const double p = pred[i];
        g[i] = (-target[i] / p + (1.0 - target[i]) / (1.0 - p)) / n;
    }
    return g;
}

double offset_loss(std::span<const double> pred, std::span<const double> target, std::span<const double> mask) {
    require_same_size(pred.size(), target.size(), "offset_loss");
    require_same_size(pred.size(), mask.size(), "offset_loss");
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (mask[i] != 0.0) {
            sum += std::abs(pred[i] - target[i]);
            count += 1.0;
        }
    }
    return count > 0.0 ? sum / count : 0.0;
}

LossReport total_loss(const LossParts& parts, const LossWeights& weights) {
    for (double v : {parts.l_seg, parts.l_det, parts.l_cls, parts.l_reg, parts.l_offset}) {
        if (!(v >= 0.0)) {
            throw ValidationError("loss components must be nonnegative");
        }
    }
    LossReport r{parts.l_seg, parts.l_det, parts.l_cls, parts.l_reg, weights.use_offset ? parts.l_offset : 0.0, 0.0};
    r.total = r.l_seg + r.l_det + weights.lambda1 * r.l_cls + weights.lambda2 * r.l_reg;
    if (weights.use_offset) {
        r.total += weights.offset_weight * r.l_offset;
    }
    return r;
}

double grad_check(const ScalarFn& loss, const GradientFn& gradient, std::span<const double> point, double h) {
    const std::vector<double> analytic = gradient(point);
    if (analytic.size() != point.size()) {
        throw ValidationError("grad_check: gradient size mismatch");
    }
    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = loss(x);
        x[i] = orig - h;
        const double down = loss(x);
        x[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace lanemap
