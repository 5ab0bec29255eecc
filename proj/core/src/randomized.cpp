#include "peakinf/randomized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "peakinf/errors.hpp"
#include "peakinf/field.hpp"
#include "peakinf/quadrature.hpp"

namespace peakinf {

std::size_t match_nearest_index(const std::vector<Peak>& candidates, const Vec& target) {
    if (candidates.empty()) throw Error(ErrorCode::matching, "no candidate peaks to match");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double d = (candidates[i].location - target).squaredNorm();
        if (d < best_d || (d == best_d && candidates[i].grid_index < candidates[best].grid_index)) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

const Peak& match_nearest_peak(const std::vector<Peak>& candidates, const Vec& target) {
    return candidates[match_nearest_index(candidates, target)];
}

namespace {

// Log of the unnormalized soft-TG integrand, plus the integration window.
struct SoftTg {
    double m, a, sg;
    double lo, hi;
    double mode = 0.0;
    double offset = 0.0;
    double log_psi_mode = 0.0;
    double scale = 0.0;  // lower bound on the integral of f

    SoftTg(double mu, double u, double gamma, double c) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::parameter, "gamma must be positive");
        m = mu + 0.5 * c;
        a = u - 0.5 * gamma * c;
        sg = std::sqrt(gamma);
        // Under strong selection the mass tilts from m towards a; widen the
        // window so it always covers both.
        const double tilt = m + std::max(0.0, a - m) / (1.0 + gamma);
        lo = std::min(m, tilt) - 10.0;
        hi = std::max(m, tilt) + 10.0;
        // log_f is concave: golden-section search for the mode, then the
        // half-maximum points give a scale for the quadrature tolerance.
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x0 = lo, x1 = hi;
        while (x1 - x0 > 1e-13 * (1.0 + std::abs(x0))) {
            const double p = x1 - g * (x1 - x0), q = x0 + g * (x1 - x0);
            if (log_f(p) < log_f(q)) x0 = p; else x1 = q;
        }
        mode = 0.5 * (x0 + x1);
        offset = log_f(mode);
        log_psi_mode = log_normal_survival((a - mode) / sg);
        const double half = offset - std::log(2.0);
        auto crossing = [&](double inside, double outside) {
            if (log_f(outside) >= half) return outside;
            for (int i = 0; i < 200 && std::abs(outside - inside) > 1e-14 * (1.0 + std::abs(inside)); ++i) {
                const double mid = 0.5 * (inside + outside);
                (log_f(mid) >= half ? inside : outside) = mid;
            }
            return inside;
        };
        scale = 0.5 * (crossing(mode, hi) - crossing(mode, lo));
    }

    [[nodiscard]] double log_f(double z) const {
        return log_normal_survival((a - z) / sg) - 0.5 * (z - m) * (z - m);
    }
    // Relative to the mode, with the Gaussian part factored: subtracting two
    // large squares loses digits when m is far from the edge.
    [[nodiscard]] double f(double z) const {
        return std::exp(log_normal_survival((a - z) / sg) - log_psi_mode - 0.5 * (z - mode) * (z + mode - 2.0 * m));
    }
};

constexpr double kSoftTol = 1e-10;

}  // namespace

double soft_tg_unnormalized(double z, double mu, double u, double gamma, double c) {
    const SoftTg s(mu, u, gamma, c);
    return std::exp(s.log_f(z)) / std::sqrt(2.0 * M_PI);
}

namespace {

// Integral of s.f over [lo, hi], split at the mode so a sharp edge next to it
// is never straddled by a starting panel.
double integrate(const SoftTg& s, double lo, double hi) {
    auto f = [&](double z) { return s.f(z); };
    const double tol = kSoftTol * s.scale;
    if (lo < s.mode && s.mode < hi) return adaptive_simpson(f, lo, s.mode, tol) + adaptive_simpson(f, s.mode, hi, tol);
    return adaptive_simpson(f, lo, hi, tol);
}

}  // namespace

double soft_tg_normalizer(double mu, double u, double gamma, double c) {
    const SoftTg s(mu, u, gamma, c);
    return integrate(s, s.lo, s.hi) * std::exp(s.offset) / std::sqrt(2.0 * M_PI);
}

double soft_tg_cdf(double y, double mu, double u, double gamma, double c) {
    const SoftTg s(mu, u, gamma, c);
    if (std::isnan(y)) throw Error(ErrorCode::parameter, "soft_tg_cdf: y is NaN");
    if (y <= s.lo) return 0.0;
    if (y >= s.hi) return 1.0;
    const double total = integrate(s, s.lo, s.hi);
    // Integrate the side away from the mode to keep both tails accurate.
    const double cdf = y <= s.mode ? integrate(s, s.lo, y) / total : 1.0 - integrate(s, y, s.hi) / total;
    return std::clamp(cdf, 0.0, 1.0);
}

void CarveContext::validate() const {
    if (!(gamma > 0.0)) throw Error(ErrorCode::parameter, "gamma must be positive");
    if (full_peak.degenerate) throw Error(ErrorCode::degenerate_hessian, "matched full-data peak is degenerate");
    const auto d = full_peak.location.size();
    if (H_inf.rows() != d || H_inf.cols() != d) throw Error(ErrorCode::parameter, "H_inf has wrong shape");
}

double carve_height_pivot(const CarveContext& ctx, double mu, const Mat& lambda) {
    ctx.validate();
    const double tr = trace_term(ctx.full_peak.neg_hessian, lambda);
    return 1.0 - soft_tg_cdf(ctx.full_peak.height, mu, ctx.u, ctx.gamma, tr);
}

ConfidenceInterval carve_height_interval(const CarveContext& ctx, double alpha, const Mat& lambda,
                                         const InversionOptions& options) {
    ctx.validate();
    const double tr = trace_term(ctx.full_peak.neg_hessian, lambda);
    const double y = ctx.full_peak.height;
    return invert_pivot([&](double mu) { return 1.0 - soft_tg_cdf(y, mu, ctx.u, ctx.gamma, tr); }, y, alpha,
                        options);
}

Mat carve_precision(const CarveContext& ctx, const Mat& lambda) {
    ctx.validate();
    if (ctx.full_peak.neg_hessian.llt().info() != Eigen::Success)
        throw Error(ErrorCode::degenerate_hessian, "full-data Hessian is not positive definite");
    const Mat A = sandwich(ctx.full_peak.neg_hessian, lambda, ctx.H_inf);
    const Mat M = 0.5 * (A + A.transpose());
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::degenerate_carve_precision, "carve precision is not positive definite");
    return M;
}

double carve_wald_pivot(const CarveContext& ctx, const Vec& t, const Mat& lambda) {
    return quadratic_form(carve_precision(ctx, lambda), ctx.full_peak.location - t);
}

Ellipsoid carve_location_ellipsoid(const CarveContext& ctx, double alpha, const Mat& lambda) {
    Ellipsoid e;
    e.center = ctx.full_peak.location;
    e.precision = carve_precision(ctx, lambda);
    e.radius_sq = chi2_quantile(static_cast<int>(e.center.size()), 1.0 - alpha);
    return e;
}

namespace {

void check_inf_peak(const Peak& p) {
    if (p.degenerate) throw Error(ErrorCode::degenerate_hessian, "inference-field peak is degenerate");
}

}  // namespace

double split_height_pivot(const Peak& inf_peak, double mu, double gamma, const Mat& lambda) {
    check_inf_peak(inf_peak);
    const double tau = inference_scale(gamma);
    const double tr = trace_term(inf_peak.neg_hessian, lambda);
    return normal_survival((inf_peak.height - mu - 0.5 * tau * tau * tr) / tau);
}

ConfidenceInterval split_height_interval(const Peak& inf_peak, double alpha, double gamma, const Mat& lambda) {
    check_inf_peak(inf_peak);
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::parameter, "alpha must lie in (0,1)");
    const double tau = inference_scale(gamma);
    const double centre = inf_peak.height - 0.5 * tau * tau * trace_term(inf_peak.neg_hessian, lambda);
    const double z = normal_upper_quantile(0.5 * alpha);
    return {centre - tau * z, centre + tau * z, alpha};
}

Mat split_precision(const Peak& inf_peak, double gamma, const Mat& lambda) {
    check_inf_peak(inf_peak);
    const double tau = inference_scale(gamma);
    return wald_precision(inf_peak.neg_hessian, lambda) / (tau * tau);
}

double split_wald_pivot(const Peak& inf_peak, const Vec& t, double gamma, const Mat& lambda) {
    return quadratic_form(split_precision(inf_peak, gamma, lambda), inf_peak.location - t);
}

Ellipsoid split_location_ellipsoid(const Peak& inf_peak, double alpha, double gamma, const Mat& lambda) {
    Ellipsoid e;
    e.center = inf_peak.location;
    e.precision = split_precision(inf_peak, gamma, lambda);
    e.radius_sq = chi2_quantile(static_cast<int>(e.center.size()), 1.0 - alpha);
    return e;
}

}  // namespace peakinf
