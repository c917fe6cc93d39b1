#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace lanemap {

// Probabilities entering a log are clamped to [kClampEps, 1 - kClampEps].
inline constexpr double kClampEps = 1e-7;

// Penalty-reduced focal loss on a keypoint heatmap:
//   -1/N * sum( (1-p)^alpha log p              where y == 1
//               (1-y)^beta p^alpha log(1-p)    otherwise )
// with N the number of y == 1 cells (at least 1).
double focal_loss(std::span<const double> pred, std::span<const double> target, double alpha = 2.0,
                  double beta = 4.0);
std::vector<double> focal_loss_grad(std::span<const double> pred, std::span<const double> target,
                                    double alpha = 2.0, double beta = 4.0);

double cross_entropy_loss(std::span<const double> probs, std::size_t true_class);

// Softmax that gives -inf logits exactly zero probability.
std::vector<double> softmax(std::span<const double> logits);
double softmax_cross_entropy(std::span<const double> logits, std::size_t true_class);
std::vector<double> softmax_cross_entropy_grad(std::span<const double> logits, std::size_t true_class);

double smooth_l1_loss(std::span<const double> pred, std::span<const double> target);
std::vector<double> smooth_l1_grad(std::span<const double> pred, std::span<const double> target);

// Mean binary cross-entropy over pixels.
double seg_loss(std::span<const double> pred, std::span<const double> target);
std::vector<double> seg_loss_grad(std::span<const double> pred, std::span<const double> target);

// Mean absolute error between predicted and target offsets over the cells
// selected by mask (nonzero entries); 0 when the mask is empty.
double offset_loss(std::span<const double> pred, std::span<const double> target, std::span<const double> mask);

struct LossParts {
    double l_seg = 0.0;
    double l_det = 0.0;
    double l_cls = 0.0;
    double l_reg = 0.0;
    double l_offset = 0.0;
};

struct LossWeights {
    double lambda1 = 0.1;
    double lambda2 = 0.01;
    bool use_offset = false;
    double offset_weight = 1.0;
};

struct LossReport {
    double l_seg = 0.0;
    double l_det = 0.0;
    double l_cls = 0.0;
    double l_reg = 0.0;
    double l_offset = 0.0;
    double total = 0.0;
};

// total = l_seg + l_det + lambda1 * l_cls + lambda2 * l_reg (+ offset term).
LossReport total_loss(const LossParts& parts, const LossWeights& weights = {});

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

// Max over coordinates of |g_a - g_n| / max(1, |g_a|, |g_n|) between the
// analytic gradient and central finite differences with step h.
double grad_check(const ScalarFn& loss, const GradientFn& gradient, std::span<const double> point,
                  double h = 1e-5);

}  // namespace lanemap
