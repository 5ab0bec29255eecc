#pragma once

#include <functional>

#include "peakinf/peaks.hpp"
#include "peakinf/special.hpp"

namespace peakinf {

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
    double alpha = 0.1;

    [[nodiscard]] bool contains(double mu) const noexcept { return lo <= mu && mu <= hi; }
    [[nodiscard]] double width() const noexcept { return hi - lo; }
};

struct Ellipsoid {
    Vec center;
    Mat precision;
    double radius_sq = 0.0;

    [[nodiscard]] double form(const Vec& t) const;
    [[nodiscard]] bool contains(const Vec& t) const { return form(t) <= radius_sq; }
    // Semi-axis lengths, largest first.
    [[nodiscard]] Vec semi_axes() const;
    [[nodiscard]] double width() const { return semi_axes()(0); }
};

// tr(H^{-1} Lambda); throws degenerate_hessian when H is not positive definite.
[[nodiscard]] double trace_term(const Mat& H, const Mat& lambda);

// Psi(a)/Psi(b) for a >= b computed from log-survival differences.
[[nodiscard]] double survival_ratio(double a, double b);

[[nodiscard]] double tg_pivot(double y_hat, double mu, double u, const Mat& H_hat, const Mat& lambda);
// Same pivot with the trace term supplied directly.
[[nodiscard]] double tg_pivot_trace(double y_hat, double mu, double u, double trace);

struct InversionOptions {
    double tolerance = 1e-9;
    int max_doublings = 60;
    bool verify_monotone = true;
};

// Solves pivot(mu) = alpha/2 and 1 - alpha/2 for a pivot increasing in mu.
// Brackets by doubling outward from `start`, then bisects.
[[nodiscard]] ConfidenceInterval invert_pivot(const std::function<double(double)>& pivot, double start,
                                              double alpha, const InversionOptions& options = {});

[[nodiscard]] ConfidenceInterval height_interval(const Peak& peak, double u, double alpha, const Mat& lambda,
                                                 const InversionOptions& options = {});

[[nodiscard]] double quadratic_form(const Mat& precision, const Vec& delta);
[[nodiscard]] Mat sandwich(const Mat& A, const Mat& lambda, const Mat& B);

// Symmetrized H Lambda^{-1} H.
[[nodiscard]] Mat wald_precision(const Mat& H_hat, const Mat& lambda);
[[nodiscard]] double wald_pivot(const Vec& t_hat, const Vec& t, const Mat& H_hat, const Mat& lambda);
[[nodiscard]] Ellipsoid location_ellipsoid(const Peak& peak, double alpha, const Mat& lambda);

}  // namespace peakinf
