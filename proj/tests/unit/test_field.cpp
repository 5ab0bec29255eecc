#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "common.hpp"
#include "peakinf/errors.hpp"
#include "peakinf/field.hpp"

using namespace peakinf;
using namespace peakinf::test;

TEST(Grid, LexicographicOrder) {
    Grid g(square(-1, 1), {3, 5});
    EXPECT_EQ(g.size(), 15u);
    EXPECT_EQ(g.stride(1), 1u);
    EXPECT_EQ(g.stride(0), 5u);
    EXPECT_NEAR(g.spacing()(0), 1.0, 1e-15);
    EXPECT_NEAR(g.spacing()(1), 0.5, 1e-15);
    EXPECT_TRUE(g.point(1).isApprox(vec({-1.0, -0.5})));
    EXPECT_TRUE(g.point(14).isApprox(vec({1.0, 1.0})));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flat_index(g.multi_index(i)), i);
}

TEST(Grid, Validation) {
    EXPECT_THROW(Grid(square(-1, 1), {3}), Error);
    EXPECT_THROW(Grid(square(-1, 1), {0, 4}), Error);
    EXPECT_THROW(Grid(Box{vec({1, 1}), vec({-1, -1})}, {4, 4}), Error);
    Grid coarse(square(-1, 1), {10, 10});
    EXPECT_THROW(coarse.check_spacing(se_kernel()), Error);
    Grid fine(square(-1, 1), {81, 81});
    EXPECT_NO_THROW(fine.check_spacing(se_kernel()));
}

TEST(Covariance, TwoPointCholesky) {
    auto g = std::make_shared<const Grid>(Box{vec({0.0}), vec({0.15})}, std::vector<int>{2});
    const auto f = covariance_factor(se_kernel(0.15, 1), g);
    const double rho = std::exp(-0.5);
    const Mat& L = f.lower();
    EXPECT_NEAR(f.jitter(), 1e-10, 1e-20);
    EXPECT_NEAR(L(0, 0), 1.0, 1e-9);
    EXPECT_NEAR(L(1, 0), rho, 1e-9);
    EXPECT_NEAR(L(1, 1), std::sqrt(1 - rho * rho), 1e-9);
    EXPECT_EQ(L(0, 1), 0.0);
}

TEST(Covariance, ReconstructionOnExperimentGrid) {
    auto g = std::make_shared<const Grid>(square(-1, 1), std::vector<int>{48, 48});
    const auto k = se_kernel();
    const auto f = covariance_factor(k, g);
    EXPECT_LE(f.jitter(), 1e-6);
    std::mt19937 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, g->size() - 1);
    double worst = 0;
    for (int r = 0; r < 3000; ++r) {
        const auto i = pick(rng), j = pick(rng);
        const double kij = kernel_eval(k, g->point(i), g->point(j)) + (i == j ? f.jitter() : 0.0);
        const double lij = f.lower().row(i).dot(f.lower().row(j));
        worst = std::max(worst, std::abs(kij - lij));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Covariance, CapEnforced) {
    auto g = std::make_shared<const Grid>(square(-1, 1), std::vector<int>{70, 70});
    EXPECT_THROW((void)covariance_factor(se_kernel(), g), Error);
}

TEST(Sample, DeterministicInKey) {
    auto g = std::make_shared<const Grid>(square(-1, 1), std::vector<int>{24, 24});
    const auto f = covariance_factor(se_kernel(0.3), g);
    const auto s = single_bump(3.0, 0.3);
    const auto a = sample_field(f, s, NoiseKey{9, 4, kNoiseStream, 0});
    const auto b = sample_field(f, s, NoiseKey{9, 4, kNoiseStream, 0});
    const auto c = sample_field(f, s, NoiseKey{9, 5, kNoiseStream, 0});
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    EXPECT_TRUE(a.mean.isApprox(signal_on_grid(*s, *g)));
}

TEST(Sample, FromNoiseAddsMean) {
    auto g = std::make_shared<const Grid>(square(-1, 1), std::vector<int>{24, 24});
    const auto f = covariance_factor(se_kernel(0.3), g);
    const auto s = single_bump(3.0, 0.3);
    const Vec noise = Vec::LinSpaced(static_cast<Eigen::Index>(g->size()), -1, 1);
    const auto y = field_from_noise(f, s, noise);
    EXPECT_LE((y.values - y.mean - noise).cwiseAbs().maxCoeff(), 1e-15);
    for (std::size_t i = 0; i < g->size(); i += 37)
        EXPECT_NEAR(y.mean(static_cast<Eigen::Index>(i)), signal_eval(*s, g->point(i)), 1e-14);
}

// Marginal variance and lag correlations of the simulated noise.
TEST(Sample, MonteCarloMoments) {
    auto g = std::make_shared<const Grid>(Box{vec({-1.0}), vec({1.0})}, std::vector<int>{21});
    const auto k = se_kernel(0.3, 1);
    const auto f = covariance_factor(k, g);
    const auto s = null_signal(1);
    const int n = 4000;
    const int lags[] = {0, 1, 2, 4};
    double sum = 0, prod[4] = {0, 0, 0, 0};
    for (int r = 0; r < n; ++r) {
        const auto y = sample_field(f, s, NoiseKey{11, static_cast<std::uint32_t>(r), kNoiseStream, 0});
        sum += y.values(10);
        for (int i = 0; i < 4; ++i) prod[i] += y.values(10) * y.values(10 + lags[i]);
    }
    EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
    for (int i = 0; i < 4; ++i) {
        const double h = 0.1 * lags[i];
        EXPECT_NEAR(prod[i] / n, std::exp(-h * h / (2 * 0.09)), 0.07) << "lag " << lags[i];
    }
}

TEST(Randomize, Identities) {
    auto g = std::make_shared<const Grid>(square(-1, 1), std::vector<int>{24, 24});
    const auto f = covariance_factor(se_kernel(0.3), g);
    const auto y = sample_field(f, single_bump(3.0, 0.3), NoiseKey{2, 0, kNoiseStream, 0});
    for (double gamma : {0.25, 1.0, 4.0}) {
        const auto r = randomize(y, f, gamma, NoiseKey{2, 0, kOmegaStream, 0});
        const Vec comb = (r.sel_values + gamma * r.inf_values) / (1.0 + gamma);
        EXPECT_LE((comb - y.values).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_NEAR(selection_scale(1.0), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(inference_scale(0.5), std::sqrt(3.0), 1e-15);
    EXPECT_THROW((void)randomize(y, f, 0.0, NoiseKey{2, 0, kOmegaStream, 0}), Error);
    EXPECT_THROW((void)randomize(y, f, 1.0, y.noise_key), Error);
}

// Y^sel and Y^inf are independent with variances 1 + gamma and 1 + 1/gamma.
TEST(Randomize, MonteCarloMoments) {
    auto g = std::make_shared<const Grid>(Box{vec({-1.0}), vec({1.0})}, std::vector<int>{11});
    const auto f = covariance_factor(se_kernel(0.3, 1), g);
    const auto s = null_signal(1);
    const double gamma = 0.5;
    const int n = 4000;
    double ss = 0, ii = 0, si = 0, si_lag = 0;
    for (int r = 0; r < n; ++r) {
        const auto key = static_cast<std::uint32_t>(r);
        const auto y = sample_field(f, s, NoiseKey{5, key, kNoiseStream, 0});
        const auto sp = randomize(y, f, gamma, NoiseKey{5, key, kOmegaStream, 0});
        ss += sp.sel_values(5) * sp.sel_values(5);
        ii += sp.inf_values(5) * sp.inf_values(5);
        si += sp.sel_values(5) * sp.inf_values(5);
        si_lag += sp.sel_values(5) * sp.inf_values(6);
    }
    EXPECT_NEAR(ss / n, 1.0 + gamma, 0.1);
    EXPECT_NEAR(ii / n, 1.0 + 1.0 / gamma, 0.2);
    EXPECT_NEAR(si / n, 0.0, 0.1);
    EXPECT_NEAR(si_lag / n, 0.0, 0.1);
}
