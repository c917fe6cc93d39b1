#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "lanemap/error.hpp"
#include "lanemap/losses.hpp"

using namespace lanemap;

namespace {

using Vec = std::vector<double>;

// Heatmap-like target: a few exact peaks, Gaussian falloff elsewhere.
Vec heatmap_target(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec t(n);
    for (double& v : t) v = u(rng) < 0.15 ? 1.0 : u(rng) * 0.95;
    return t;
}

Vec interior(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Vec p(n);
    for (double& v : p) v = u(rng);
    return p;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("focal loss closed forms") {
    CHECK(focal_loss(Vec{0.5}, Vec{1.0}) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(focal_loss(Vec{0.5}, Vec{0.0}) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(focal_loss(Vec{0.5}, Vec{1.0}) == doctest::Approx(0.17329).epsilon(1e-4));
    CHECK(focal_loss(Vec{0, 1, 0, 0}, Vec{0, 1, 0, 0}) < 1e-12);
    CHECK_THROWS_AS(focal_loss(Vec{0.5}, Vec{0.5, 0.5}), ValidationError);
}

TEST_CASE("focal loss normalizes by the positive count") {
    const double one = focal_loss(Vec{0.5}, Vec{1.0});
    CHECK(focal_loss(Vec{0.5, 0.5}, Vec{1.0, 1.0}) == doctest::Approx(one).epsilon(1e-12));
    const double neg = (1 - 0.5) * (1 - 0.5) * (1 - 0.5) * (1 - 0.5) * 0.3 * 0.3 * -std::log(1 - 0.3);
    CHECK(focal_loss(Vec{0.3}, Vec{0.5}) == doctest::Approx(neg).epsilon(1e-12));
}

TEST_CASE("cross entropy closed forms") {
    CHECK(cross_entropy_loss(Vec{0, 1, 0}, 1) < 1e-6);
    CHECK(cross_entropy_loss(Vec{0.25, 0.25, 0.25, 0.25}, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(cross_entropy_loss(Vec{0.1, 0.9}, 0) == doctest::Approx(2.30259).epsilon(1e-5));
    CHECK_THROWS_AS(cross_entropy_loss(Vec{0.5, 0.5}, 2), ValidationError);
    CHECK_THROWS_AS(softmax_cross_entropy(Vec{0.5, 0.5}, 3), ValidationError);
}

TEST_CASE("smooth l1 closed forms") {
    CHECK(smooth_l1_loss(Vec{1, 2}, Vec{1, 2}) == 0.0);
    CHECK(smooth_l1_loss(Vec{0.5, 0}, Vec{0, 0}) == 0.125);
    CHECK(smooth_l1_loss(Vec{2, 0}, Vec{0, 0}) == 1.5);
    CHECK(smooth_l1_loss(Vec{-2, 0.5}, Vec{0, 0}) == 1.625);
}

TEST_CASE("seg loss closed forms") {
    CHECK(seg_loss(Vec{0, 1, 1, 0}, Vec{0, 1, 1, 0}) < 1e-6);
    CHECK(seg_loss(Vec{0.5, 0.5, 0.5}, Vec{0, 1, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(seg_loss(Vec{1, 1}, Vec{0, 0}) == doctest::Approx(-std::log(kClampEps)).epsilon(1e-9));
}

TEST_CASE("offset loss uses masked cells only") {
    CHECK(offset_loss(Vec{0.5, 0.9}, Vec{0.25, 0.0}, Vec{1, 0}) == 0.25);
    CHECK(offset_loss(Vec{0.5}, Vec{0.25}, Vec{0}) == 0.0);
}

TEST_CASE("softmax masks -inf and is a simplex") {
    const double inf = std::numeric_limits<double>::infinity();
    const Vec p = softmax(Vec{1.0, -inf, 2.0});
    CHECK(p[1] == 0.0);
    CHECK(p[0] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[2] / p[0] == doctest::Approx(std::numbers::e).epsilon(1e-12));
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 30.0);
    for (int i = 0; i < 200; ++i) {
        Vec logits(1 + i % 41);
        for (double& v : logits) v = g(rng);
        double sum = 0.0;
        for (double v : softmax(logits)) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("losses are nonnegative") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
        const Vec t = heatmap_target(rng, 20);
        const Vec p = interior(rng, 20);
        CHECK(focal_loss(p, t) >= 0.0);
        Vec bin(20);
        for (std::size_t k = 0; k < 20; ++k) bin[k] = t[k] == 1.0 ? 1.0 : 0.0;
        CHECK(seg_loss(p, bin) >= 0.0);
        CHECK(smooth_l1_loss(Vec{p[0], p[1]}, Vec{t[0], t[1]}) >= 0.0);
        CHECK(softmax_cross_entropy(p, static_cast<std::size_t>(i % 20)) >= 0.0);
    }
}

TEST_CASE("total loss weighting") {
    const LossReport r = total_loss({1, 1, 1, 1});
    CHECK(r.total == 2.11);
    CHECK(total_loss({}).total == 0.0);
    CHECK(total_loss({0, 0, 1, 0}).total == 0.1);
    CHECK(total_loss({0, 0, 0, 1}).total == 0.01);
    CHECK(total_loss({2, 0, 0, 0, 5}).total == 2.0);
    LossWeights w;
    w.use_offset = true;
    CHECK(total_loss({2, 0, 0, 0, 5}, w).total == 7.0);
}

TEST_CASE("total loss is linear in each part") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 100; ++i) {
        const LossParts p{u(rng), u(rng), u(rng), u(rng)};
        const double base = total_loss(p).total;
        const double d = u(rng);
        CHECK(total_loss({p.l_seg + d, p.l_det, p.l_cls, p.l_reg}).total == doctest::Approx(base + d));
        CHECK(total_loss({p.l_seg, p.l_det + d, p.l_cls, p.l_reg}).total == doctest::Approx(base + d));
        CHECK(total_loss({p.l_seg, p.l_det, p.l_cls + d, p.l_reg}).total == doctest::Approx(base + 0.1 * d));
        CHECK(total_loss({p.l_seg, p.l_det, p.l_cls, p.l_reg + d}).total == doctest::Approx(base + 0.01 * d));
    }
}

TEST_CASE("grad check examples") {
    const Vec target{0, 0};
    const double sl1 = grad_check([&](std::span<const double> x) { return smooth_l1_loss(x, target); },
                                  [&](std::span<const double> x) { return smooth_l1_grad(x, target); }, Vec{0.3, 0.7});
    CHECK(sl1 < 1e-6);

    const double ce = grad_check([](std::span<const double> z) { return softmax_cross_entropy(z, 1); },
                                 [](std::span<const double> z) { return softmax_cross_entropy_grad(z, 1); },
                                 Vec{0, 0, 0, 0});
    CHECK(ce < 1e-6);
}

TEST_CASE("grad check catches a wrong gradient") {
    const double err = grad_check([](std::span<const double> x) { return x[0] * x[0]; },
                                  [](std::span<const double> x) { return Vec{x[0]}; }, Vec{2.0});
    CHECK(err > 0.1);
}

TEST_CASE("analytic gradients at random interior points") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 2.0);
    double focal = 0, ce = 0, sl1 = 0, seg = 0;
    for (int i = 0; i < 100; ++i) {
        const Vec t = heatmap_target(rng, 12);
        focal = std::max(focal, grad_check([&](std::span<const double> x) { return focal_loss(x, t); },
                                           [&](std::span<const double> x) { return focal_loss_grad(x, t); },
                                           interior(rng, 12)));

        Vec z(21);
        for (double& v : z) v = g(rng);
        const std::size_t cls = static_cast<std::size_t>(i) % z.size();
        ce = std::max(ce, grad_check([&](std::span<const double> x) { return softmax_cross_entropy(x, cls); },
                                     [&](std::span<const double> x) { return softmax_cross_entropy_grad(x, cls); }, z));

        Vec e{g(rng), g(rng)};
        for (double& v : e) {
            if (std::abs(std::abs(v) - 1.0) < 1e-3) v += 0.01;  // keep off the kink
        }
        const Vec zero{0, 0};
        sl1 = std::max(sl1, grad_check([&](std::span<const double> x) { return smooth_l1_loss(x, zero); },
                                       [&](std::span<const double> x) { return smooth_l1_grad(x, zero); }, e));

        Vec mask(16);
        for (double& v : mask) v = g(rng) > 0 ? 1.0 : 0.0;
        seg = std::max(seg, grad_check([&](std::span<const double> x) { return seg_loss(x, mask); },
                                       [&](std::span<const double> x) { return seg_loss_grad(x, mask); },
                                       interior(rng, 16)));
    }
    CHECK(focal < 1e-4);
    CHECK(ce < 1e-4);
    CHECK(sl1 < 1e-4);
    CHECK(seg < 1e-4);
}

}
