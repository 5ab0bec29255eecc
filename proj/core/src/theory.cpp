#include "peakinf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "peakinf/errors.hpp"
#include "peakinf/quadrature.hpp"
#include "peakinf/randomized.hpp"
#include "peakinf/special.hpp"

namespace peakinf {

Mat deterministic_hessian(const SignalSpec& signal, const DerivativeBundle& bundle, const Vec& t, double y) {
    const Mat neg_hess = -signal_hess(signal, t);
    const Vec grad = signal_grad(signal, t);
    const double mu = signal_eval(signal, t);
    const Vec w = bundle.lambda.llt().solve(grad);
    return neg_hess + bundle.k21.contract(w) + (y - mu) * bundle.lambda;
}

Mat goldilocks(const SignalSpec& signal, const DerivativeBundle& bundle, const Vec& t, double y) {
    const Mat N = -signal_hess(signal, t);
    const double mu = signal_eval(signal, t);
    return N * bundle.lambda.llt().solve(N) + (y - mu) * N;
}

double TheoryContext::trace() const { return H_bar.llt().solve(bundle.lambda).trace(); }

Mat TheoryContext::conditional_goldilocks(double y) const { return G_bar + (y - u_bar) * true_peak.neg_hessian; }

Mat TheoryContext::marginal_sandwich() const {
    const Mat& N = true_peak.neg_hessian;
    return N * bundle.lambda.llt().solve(N);
}

Mat TheoryContext::conditional_sandwich() const { return H_bar * bundle.lambda.llt().solve(H_bar); }

double TheoryContext::u_bar_randomized(double gamma) const {
    const double pi = gamma / (1.0 + gamma);
    return (1.0 - pi) * u_bar + pi * mu();
}

TheoryContext make_theory_context(const SignalSpec& signal, const DerivativeBundle& bundle, const TruePeak& peak,
                                  double u, const CurvatureScales& scales) {
    TheoryContext c;
    c.true_peak = peak;
    c.u = u;
    c.u_bar = std::max(u, peak.height);
    c.bundle = bundle;
    c.scales = scales;
    c.H_bar = deterministic_hessian(signal, bundle, peak.location, c.u_bar);
    c.H_bar = 0.5 * (c.H_bar + c.H_bar.transpose()).eval();
    c.G_bar = goldilocks(signal, bundle, peak.location, c.u_bar);
    c.G_bar = 0.5 * (c.G_bar + c.G_bar.transpose()).eval();
    c.third_deriv = signal_third(signal, peak.location);
    if (c.H_bar.llt().info() != Eigen::Success)
        throw Error(ErrorCode::model, "deterministic Hessian is not positive definite");
    return c;
}

namespace {

double min_eig(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void check_window(const TheoryContext& ctx, const Vec& h, double y) {
    if (h.size() != ctx.dim()) throw Error(ErrorCode::parameter, "offset h has wrong dimension");
    const double tol = 1e-12;
    if (h.norm() > ctx.scales.eps_n * (1.0 + tol) || std::abs(y - ctx.u_bar) > ctx.scales.Delta_n * (1.0 + tol))
        throw Error(ErrorCode::window, "outside the local expansion window");
}

}  // namespace

IdentityReport check_identities(const TheoryContext& ctx, const SignalSpec& signal, double probe_y) {
    IdentityReport r;
    const Mat& N = ctx.true_peak.neg_hessian;
    const Mat rhs = ctx.H_bar * ctx.bundle.lambda.llt().solve(N);
    r.goldilocks_identity = (ctx.G_bar - rhs).cwiseAbs().maxCoeff() / std::max(1.0, ctx.G_bar.cwiseAbs().maxCoeff());
    r.lower_sandwich_min_eig = min_eig(ctx.G_bar - ctx.marginal_sandwich());
    r.upper_sandwich_min_eig = min_eig(ctx.conditional_sandwich() - ctx.G_bar);
    const Mat G_y = goldilocks(signal, ctx.bundle, ctx.true_peak.location, probe_y);
    r.goldilocks_shift = (G_y - ctx.G_bar - (probe_y - ctx.u_bar) * N).cwiseAbs().maxCoeff() /
                         std::max(1.0, ctx.G_bar.cwiseAbs().maxCoeff());
    return r;
}

FirstOrderTerms first_order_terms(const TheoryContext& ctx, const Vec& h, double y) {
    FirstOrderTerms t;
    const Mat& lambda = ctx.bundle.lambda;
    const Mat hess = -ctx.true_peak.neg_hessian;  // Hess mu at t*
    Eigen::LLT<Mat> Hbar(ctx.H_bar);
    t.t01 = (y - ctx.u_bar) * Hbar.solve(lambda).trace();
    // Stationary kernel: Lambda-dot and Gamma vanish, so H-dot(h) = -D3 mu(h).
    t.t10 = Hbar.solve(-ctx.third_deriv.contract(h)).trace();
    t.t30 = (hess * h).dot(lambda.llt().solve(ctx.third_deriv.contract2(h)));
    t.t21 = 0.5 * (y - ctx.u_bar) * h.dot(hess * h);
    return t;
}

IntensityValue approx_intensity(const TheoryContext& ctx, const Vec& h, double y, bool first_order) {
    check_window(ctx, h, y);
    IntensityValue out;
    if (!(y > ctx.u)) return out;
    const int d = ctx.dim();
    double bracket = 1.0;
    if (first_order) {
        bracket = first_order_terms(ctx, h, y).bracket();
        if (bracket < 0.0) {
            bracket = 0.0;
            out.clamped = true;
        }
    }
    const double norm = std::sqrt(std::pow(2.0 * std::numbers::pi, d + 1) * ctx.bundle.lambda.determinant());
    const double dy = y - ctx.mu();
    out.value = ctx.H_bar.determinant() * bracket / norm * std::exp(-0.5 * dy * dy) *
                std::exp(-0.5 * h.dot(ctx.G_bar * h));
    return out;
}

double power_approx(const TheoryContext& ctx) { return normal_survival(ctx.u - ctx.mu() - 0.5 * ctx.trace()); }

double expected_true_discoveries(const TheoryContext& ctx) {
    const double c = ctx.trace();
    const double ratio = ctx.H_bar.determinant() / ctx.true_peak.neg_hessian.determinant();
    return std::sqrt(ratio) * std::exp(-0.5 * (ctx.u_bar - ctx.mu()) * c) * power_approx(ctx);
}

double approx_height_density(const TheoryContext& ctx, double y) {
    if (std::abs(y - ctx.u_bar) > ctx.scales.Delta_n * (1.0 + 1e-12))
        throw Error(ErrorCode::window, "outside the height window");
    if (!(y > ctx.u)) return 0.0;
    const double m = ctx.mu() + 0.5 * ctx.trace();
    return std::exp(std::log(normal_pdf(y - m)) - log_normal_survival(ctx.u - m));
}

double approx_height_cdf(const TheoryContext& ctx, double y) {
    if (!(y > ctx.u)) return 0.0;
    const double m = ctx.mu() + 0.5 * ctx.trace();
    return -std::expm1(log_normal_survival(y - m) - log_normal_survival(ctx.u - m));
}

double approx_location_density(const TheoryContext& ctx, const Vec& h, double y) {
    check_window(ctx, h, y);
    const int d = ctx.dim();
    const Mat G = ctx.conditional_goldilocks(y);
    if (G.llt().info() != Eigen::Success) throw Error(ErrorCode::numerical, "conditional Goldilocks is not PD");
    const FirstOrderTerms t = first_order_terms(ctx, h, y);
    const double bracket = 1.0 + t.t10 - 0.5 * t.t30;
    return bracket * std::sqrt(G.determinant() / std::pow(2.0 * std::numbers::pi, d)) *
           std::exp(-0.5 * h.dot(G * h));
}

double null_palm_density(double v, int d, double y) {
    if (!(v > 0.0)) throw Error(ErrorCode::parameter, "v must be positive");
    if (!(y > v)) throw Error(ErrorCode::parameter, "null_palm_density requires y > v");
    const double m = static_cast<double>(d) / v;
    return std::exp(std::log(normal_pdf(y - m)) - log_normal_survival(v - m));
}

double null_marginal_intensity(const DerivativeBundle& bundle, double v, int d) {
    if (!(v > 0.0)) throw Error(ErrorCode::parameter, "v must be positive");
    return std::pow(v, d) * std::sqrt(bundle.lambda.determinant()) * std::exp(-d) /
           std::pow(2.0 * std::numbers::pi, 0.5 * d) * normal_survival(v - d / v);
}

double null_exact_height_intensity(const KernelSpec& kernel, double y) {
    kernel.validate();
    const double l = kernel.length_scale;
    const double s2 = std::numbers::sqrt2;
    if (kernel.dimension == 1) {
        const double e = y * normal_cdf(y / s2) + s2 * normal_pdf(y / s2);
        return e * normal_pdf(y) / (l * std::sqrt(2.0 * std::numbers::pi));
    }
    if (kernel.dimension != 2) throw Error(ErrorCode::parameter, "exact null intensity implemented for d <= 2");
    // Given Y = y and grad Y = 0, -l^2 Hess Y = y I + M with M11, M22 ~ N(0,2)
    // and M12 ~ N(0,1) independent. The M12 integral is closed form.
    auto g = [](double P) {
        const double s = std::sqrt(P);
        return (P - 1.0) * (2.0 * normal_cdf(s) - 1.0) + 2.0 * s * normal_pdf(s);
    };
    auto dens = [s2](double a) { return normal_pdf(a / s2) / s2; };
    const double reach = 9.0 * s2;
    const double lo = std::max(0.0, y - reach), hi = std::max(0.0, y + reach);
    if (hi <= lo) return 0.0;
    // Smooth, Gaussian-weighted integrands: fixed Gauss-Legendre panels suffice.
    auto panels = [&](auto&& f) {
        constexpr int n = 16;
        const double w = (hi - lo) / n;
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            sum += boost::math::quadrature::gauss<double, 20>::integrate(f, lo + i * w, lo + (i + 1) * w);
        return sum;
    };
    auto outer = [&](double A) {
        return dens(A - y) * panels([&](double B) { return g(A * B) * dens(B - y); });
    };
    const double e = panels(outer);
    return e * normal_pdf(y) / (2.0 * std::numbers::pi * l * l);
}

double null_exact_intensity_above(const KernelSpec& kernel, double v) {
    const double lo = std::isfinite(v) ? std::max(v, -9.0) : -9.0;
    if (lo >= 9.0) return 0.0;
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    return gk::integrate([&](double y) { return null_exact_height_intensity(kernel, y); }, lo, 9.0, 10, 1e-11);
}

double carve_height_density(const TheoryContext& ctx, double gamma, double y) {
    const double c = ctx.trace();
    return soft_tg_unnormalized(y, ctx.mu(), ctx.u, gamma, c) / soft_tg_normalizer(ctx.mu(), ctx.u, gamma, c);
}

}  // namespace peakinf
