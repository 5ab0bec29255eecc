#include "peakinf/infer.hpp"

#include <cmath>
#include <string>

#include "peakinf/errors.hpp"

namespace peakinf {

double Ellipsoid::form(const Vec& t) const { return quadratic_form(precision, center - t); }

Vec Ellipsoid::semi_axes() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(precision, Eigen::EigenvaluesOnly);
    const Vec ev = es.eigenvalues();  // ascending
    Vec axes(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) axes(i) = std::sqrt(radius_sq / ev(i));
    return axes;
}

double trace_term(const Mat& H, const Mat& lambda) {
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::degenerate_hessian, "Hessian is not positive definite");
    return llt.solve(lambda).trace();
}

double survival_ratio(double a, double b) { return std::exp(log_normal_survival(a) - log_normal_survival(b)); }

double tg_pivot_trace(double y_hat, double mu, double u, double trace) {
    if (!(y_hat >= u)) throw Error(ErrorCode::selection_violated, "tg_pivot requires y_hat > u");
    if (y_hat == u) return 1.0;
    const double c = mu + 0.5 * trace;
    return survival_ratio(y_hat - c, u - c);
}

double tg_pivot(double y_hat, double mu, double u, const Mat& H_hat, const Mat& lambda) {
    if (!(y_hat >= u)) throw Error(ErrorCode::selection_violated, "tg_pivot requires y_hat > u");
    return tg_pivot_trace(y_hat, mu, u, trace_term(H_hat, lambda));
}

namespace {

double solve_increasing(const std::function<double(double)>& pivot, double target, double start,
                        const InversionOptions& opt) {
    const double f0 = pivot(start) - target;
    if (f0 == 0.0) return start;
    const double dir = f0 > 0.0 ? -1.0 : 1.0;
    double inner = start, outer = start, step = 1.0;
    bool found = false;
    for (int k = 0; k < opt.max_doublings; ++k) {
        outer = start + dir * step;
        const double f = pivot(outer) - target;
        if (!std::isfinite(f)) break;
        if ((dir < 0.0 && f <= 0.0) || (dir > 0.0 && f >= 0.0)) {
            found = true;
            break;
        }
        inner = outer;
        step *= 2.0;
    }
    if (!found) throw Error(ErrorCode::numerical, "pivot inversion: no bracket within the doubling budget");
    double lo = std::min(inner, outer), hi = std::max(inner, outer);
    while (hi - lo > opt.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pivot(mid) - target < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ConfidenceInterval invert_pivot(const std::function<double(double)>& pivot, double start, double alpha,
                                const InversionOptions& opt) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::parameter, "alpha must lie in (0,1)");
    if (opt.verify_monotone) {
        double prev = -1.0;
        for (int i = 0; i < 100; ++i) {
            const double mu = start - 10.0 + 20.0 * i / 99.0;
            const double p = pivot(mu);
            if (!(p >= prev - 1e-12))
                throw Error(ErrorCode::numerical, "pivot is not monotone in mu near " + std::to_string(mu));
            prev = p;
        }
    }
    ConfidenceInterval ci;
    ci.alpha = alpha;
    ci.lo = solve_increasing(pivot, 0.5 * alpha, start, opt);
    ci.hi = solve_increasing(pivot, 1.0 - 0.5 * alpha, start, opt);
    return ci;
}

ConfidenceInterval height_interval(const Peak& peak, double u, double alpha, const Mat& lambda,
                                   const InversionOptions& options) {
    if (peak.degenerate) throw Error(ErrorCode::degenerate_hessian, "degenerate peak");
    if (!(peak.height > u)) throw Error(ErrorCode::selection_violated, "peak height must exceed u");
    const double tr = trace_term(peak.neg_hessian, lambda);
    const double y = peak.height;
    return invert_pivot([&](double mu) { return tg_pivot_trace(y, mu, u, tr); }, y, alpha, options);
}

double quadratic_form(const Mat& precision, const Vec& delta) { return delta.dot(precision * delta); }

Mat sandwich(const Mat& A, const Mat& lambda, const Mat& B) { return A * lambda.llt().solve(B); }

Mat wald_precision(const Mat& H_hat, const Mat& lambda) {
    if (H_hat.llt().info() != Eigen::Success)
        throw Error(ErrorCode::degenerate_hessian, "Hessian is not positive definite");
    const Mat G = sandwich(H_hat, lambda, H_hat);
    return 0.5 * (G + G.transpose());
}

double wald_pivot(const Vec& t_hat, const Vec& t, const Mat& H_hat, const Mat& lambda) {
    return quadratic_form(wald_precision(H_hat, lambda), t_hat - t);
}

Ellipsoid location_ellipsoid(const Peak& peak, double alpha, const Mat& lambda) {
    if (peak.degenerate) throw Error(ErrorCode::degenerate_hessian, "degenerate peak");
    Ellipsoid e;
    e.center = peak.location;
    e.precision = wald_precision(peak.neg_hessian, lambda);
    e.radius_sq = chi2_quantile(static_cast<int>(peak.location.size()), 1.0 - alpha);
    return e;
}

}  // namespace peakinf
