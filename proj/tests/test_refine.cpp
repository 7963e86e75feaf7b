#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthedge/refine.hpp"
#include "depthedge/rng.hpp"
#include "oracles.hpp"

namespace depthedge {
namespace {

RefinementProblem random_problem(Rng& rng, int w, int h) {
    RefinementProblem p;
    p.width = w;
    p.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    for (std::size_t i = 0; i < n; ++i) {
        p.x0.push_back(rng.uniform(-3.0, 3.0));
        const bool edge = rng.uniform() < 0.4;
        p.edge.push_back(edge ? rng.uniform(0.1, 1.0) : rng.uniform(0.0, 0.09));
        const double a = rng.uniform(0.0, 2 * M_PI);
        p.du.push_back(std::cos(a));
        p.dv.push_back(std::sin(a));
        p.c.push_back(rng.uniform(0.0, 4.0));
    }
    p.mu = rng.uniform(0.05, 1.0);
    return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

TEST(GradientOperators, TwoByOne) {
    auto [gu, gv] = build_gradient_operators(2, 1);
    const std::vector<double> x{3.0, 7.5};
    EXPECT_EQ(gu.apply(x), (std::vector<double>{4.5, 0.0}));
    EXPECT_EQ(gv.apply(x), (std::vector<double>{0.0, 0.0}));
}

TEST(GradientOperators, ConstantAndRamp) {
    auto [gu, gv] = build_gradient_operators(6, 4);
    std::vector<double> c(24, 2.5), ramp(24);
    for (double v : gu.apply(c)) EXPECT_EQ(v, 0.0);
    for (double v : gv.apply(c)) EXPECT_EQ(v, 0.0);
    for (int i = 0; i < 24; ++i) ramp[static_cast<std::size_t>(i)] = 2.0 * (i % 6);
    const auto g = gu.apply(ramp);
    for (int i = 0; i < 24; ++i) EXPECT_EQ(g[static_cast<std::size_t>(i)], i % 6 == 5 ? 0.0 : 2.0);
}

TEST(GradientOperators, MatchesFiniteDifferencesAndTranspose) {
    Rng rng(5);
    const int w = 5, h = 4;
    auto [gu, gv] = build_gradient_operators(w, h);
    std::vector<double> x(20), y(20);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : y) v = rng.uniform(-1, 1);
    const auto a = gu.apply(x), b = gv.apply(x);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * w + c;
            EXPECT_DOUBLE_EQ(a[p], c + 1 < w ? x[p + 1] - x[p] : 0.0);
            EXPECT_DOUBLE_EQ(b[p], r + 1 < h ? x[p + w] - x[p] : 0.0);
        }
    // <G x, y> == <x, G^T y>
    double lhs = 0.0, rhs = 0.0;
    const auto t = gu.apply_transpose(y);
    for (std::size_t i = 0; i < 20; ++i) {
        lhs += a[i] * y[i];
        rhs += x[i] * t[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(GradientOperators, RejectsDegenerateSize) {
    EXPECT_THROW(build_gradient_operators(1, 1), Error);
    EXPECT_THROW(build_gradient_operators(0, 5), Error);
}

TEST(Refine, MatchesDenseOracleOnSmallProblems) {
    Rng rng(11);
    const int shapes[][2] = {{4, 1}, {3, 2}, {2, 3}, {4, 3}, {3, 4}, {6, 2}, {12, 1}, {2, 5}};
    int count = 0;
    for (int trial = 0; trial < 64; ++trial) {
        const auto& s = shapes[trial % 8];
        const RefinementProblem p = random_problem(rng, s[0], s[1]);
        const RefineResult r = refine(p);
        const auto o = oracle::dense_refine(p.width, p.height, p.x0, p.edge, p.du, p.dv, p.c, p.mu, p.min_edge);
        const double f = objective(p, r.x);
        EXPECT_LE(std::abs(f - o.objective), 1e-6 * std::max(1.0, o.objective)) << "trial " << trial;
        EXPECT_TRUE(r.converged);
        ++count;
    }
    EXPECT_GE(count, 50);
}

TEST(Refine, OneDimensionalSingleEdge) {
    RefinementProblem p;
    p.width = 4;
    p.height = 1;
    p.x0 = {1.0, 1.2, 1.1, 1.3};
    p.edge = {0.0, 1.0, 0.0, 0.0};
    p.du = {0.0, 1.0, 0.0, 0.0};
    p.dv = {0.0, 0.0, 0.0, 0.0};
    p.c = {0.0, 3.0, 0.0, 0.0};
    p.mu = 0.05;
    const RefineResult r = refine(p);
    const auto o = oracle::dense_refine(4, 1, p.x0, p.edge, p.du, p.dv, p.c, p.mu, p.min_edge);
    EXPECT_LT(max_abs_diff(r.x, o.x), 1e-6);
    // The constraint pushes the step across pixels 1 -> 2 open.
    EXPECT_GT(r.x[2] - r.x[1], 1.0);
}

TEST(Refine, ConstantFixedPoint) {
    RefinementProblem p;
    p.width = 9;
    p.height = 7;
    p.x0.assign(63, 4.25);
    p.edge.assign(63, 0.0);
    p.du.assign(63, 0.0);
    p.dv.assign(63, 0.0);
    p.c.assign(63, 0.0);
    const RefineResult r = refine(p);
    EXPECT_LT(max_abs_diff(r.x, p.x0), 1e-8);
    EXPECT_TRUE(r.converged);
}

TEST(Refine, NoEdgesFlattensNoise) {
    Rng rng(3);
    RefinementProblem p = random_problem(rng, 16, 16);
    std::fill(p.edge.begin(), p.edge.end(), 0.0);
    p.mu = 0.01;
    const RefineResult r = refine(p);
    auto [gu, gv] = build_gradient_operators(16, 16);
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    EXPECT_LT(norm(gu.apply(r.x)), 0.5 * norm(gu.apply(p.x0)));
    EXPECT_LT(r.objective_history.back(), r.objective_history.front());
}

TEST(Refine, ObjectiveIsMonotone) {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        RefinementProblem p = random_problem(rng, 12, 10);
        for (auto& e : p.edge) e = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const RefineResult r = refine(p);
        ASSERT_GE(r.objective_history.size(), 2u);
        for (std::size_t i = 1; i < r.objective_history.size(); ++i)
            EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] * (1 + 1e-12));
    }
}

TEST(Refine, LargeMuStaysCloseToInitial) {
    Rng rng(21);
    RefinementProblem p = random_problem(rng, 10, 10);
    p.mu = 1.0;
    const double d1 = max_abs_diff(refine(p).x, p.x0);
    p.mu = 100.0;
    const double d2 = max_abs_diff(refine(p).x, p.x0);
    EXPECT_GE(d1 / d2, 10.0);
}

TEST(Refine, ValidatesInputs) {
    Rng rng(1);
    RefinementProblem p = random_problem(rng, 4, 4);
    p.c[3] = -1.0;
    EXPECT_THROW(refine(p), Error);
    p = random_problem(rng, 4, 4);
    p.edge.pop_back();
    EXPECT_THROW(refine(p), Error);
    p = random_problem(rng, 4, 4);
    p.mu = 0.0;
    EXPECT_THROW(refine(p), Error);
    p = random_problem(rng, 4, 4);
    p.x0[2] = std::nan("");
    EXPECT_THROW(refine(p), Error);
}

TEST(ChooseC, ConstantGivesZero) {
    Image x0(12, 10, 1, 3.0f), dir(12, 10, 2);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) dir.at(x, y, 0) = 1.0f;
    const Image c = choose_c(x0, dir);
    for (float v : c.data()) EXPECT_NEAR(v, 0.0f, 1e-6f);
}

TEST(ChooseC, StepOfEight) {
    Image x0(24, 8, 1), dir(24, 8, 2);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 24; ++x) x0.at(x, y) = x >= 12 ? 8.0f : 0.0f;
    dir.at(11, 4, 0) = 1.0f;  // forward difference 11 -> 12 crosses the step
    const Image c = choose_c(x0, dir, 5, 1.0);
    // Smoothed step sampled 2.5 px either side of the crossing.
    const Image xs = oracle::gaussian(x0, 1.0);
    const double expected = xs.at(14, 4) - xs.at(9, 4);
    EXPECT_NEAR(c.at(11, 4), expected, 1e-4);
    EXPECT_NEAR(c.at(11, 4), 8.0, 0.1);
    EXPECT_EQ(c.at(5, 4), 0.0f);
}

struct StepScene {
    Image truth, x0, contour, dir;
};

// Vertical step of 10 at x = 32 | 33, estimate blurred across the step and noisy.
StepScene step_scene(std::uint64_t seed) {
    const int w = 64, h = 48;
    StepScene s{Image(w, h, 1), Image(w, h, 1), Image(w, h, 1), Image(w, h, 2)};
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = x >= 33 ? 20.0 : 10.0;
            s.truth.at(x, y) = static_cast<float>(t);
            const double blur = 10.0 + 10.0 / (1.0 + std::exp(-(x - 32.5) / 1.5));
            s.x0.at(x, y) = static_cast<float>(blur + 0.2 * rng.normal());
        }
    for (int y = 0; y < h; ++y) {
        s.contour.at(32, y) = 1.0f;
        s.dir.at(32, y, 0) = 1.0f;
    }
    return s;
}

double band_rmse(const StepScene& s, const Image& x) {
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < x.height(); ++y)
        for (int c = 28; c <= 37; ++c) {
            const double e = x.at(c, y) - s.truth.at(c, y);
            sum += e * e;
            ++n;
        }
    return std::sqrt(sum / n);
}

TEST(MultiscaleRefine, SingleLevelEqualsRefine) {
    const StepScene s = step_scene(2);
    RefineConfig cfg;
    cfg.levels = 1;
    const MultiscaleResult m = multiscale_refine(s.x0, s.contour, s.dir, cfg);
    RefinementProblem p;
    p.width = 64;
    p.height = 48;
    const Image c = choose_c(s.x0, s.dir, cfg.window, cfg.c_sigma);
    for (std::size_t i = 0; i < s.x0.pixel_count(); ++i) {
        p.x0.push_back(s.x0.data()[i]);
        p.edge.push_back(s.contour.data()[i]);
        p.du.push_back(s.dir.data()[2 * i]);
        p.dv.push_back(s.dir.data()[2 * i + 1]);
        p.c.push_back(c.data()[i]);
    }
    p.mu = cfg.mu;
    const RefineResult r = refine(p, cfg.solver);
    ASSERT_EQ(m.levels.size(), 1u);
    for (std::size_t i = 0; i < r.x.size(); ++i) EXPECT_EQ(m.disparity.data()[i], static_cast<float>(r.x[i]));
}

TEST(MultiscaleRefine, ImprovesStepAndMatchesSingleLevelBudget) {
    const StepScene s = step_scene(4);
    RefineConfig cfg;
    const MultiscaleResult m = multiscale_refine(s.x0, s.contour, s.dir, cfg);
    ASSERT_EQ(m.levels.size(), 3u);
    EXPECT_EQ(m.levels.front().width, 16);
    EXPECT_EQ(m.levels.back().level, 0);
    int total = 0;
    for (const auto& l : m.levels) total += l.iterations;
    RefineConfig single = cfg;
    single.levels = 1;
    single.solver.max_iterations = total;
    const MultiscaleResult one = multiscale_refine(s.x0, s.contour, s.dir, single);
    const double before = band_rmse(s, s.x0), multi = band_rmse(s, m.disparity), flat = band_rmse(s, one.disparity);
    EXPECT_LT(multi, 0.75 * before);
    EXPECT_LE(multi, 1.05 * flat);
}

TEST(MultiscaleRefine, RejectsMismatchedInputs) {
    Image x0(8, 8, 1), contour(8, 7, 1), dir(8, 8, 2);
    EXPECT_THROW(multiscale_refine(x0, contour, dir), Error);
    RefineConfig bad;
    bad.levels = 0;
    EXPECT_THROW(multiscale_refine(x0, Image(8, 8, 1), dir, bad), Error);
}

TEST(MultiscaleRefine, ReportHasOneLinePerLevel) {
    const StepScene s = step_scene(1);
    const MultiscaleResult m = multiscale_refine(s.x0, s.contour, s.dir);
    const std::string text = format_refine_report(m);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_NE(text.find("level 0 64x48"), std::string::npos);
}

}  // namespace
}  // namespace depthedge
