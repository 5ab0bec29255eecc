#pragma once

#include <vector>

#include "peakinf/infer.hpp"

namespace peakinf {

// Nearest candidate by Euclidean distance; ties go to the smaller grid index.
// Throws ErrorCode::matching on an empty list.
[[nodiscard]] std::size_t match_nearest_index(const std::vector<Peak>& candidates, const Vec& target);
[[nodiscard]] const Peak& match_nearest_peak(const std::vector<Peak>& candidates, const Vec& target);

// CDF at y of the density proportional to
//   Psi((u - z - gamma*c/2)/sqrt(gamma)) * phi(z - mu - c/2),
// c = trace_term, by adaptive Simpson quadrature.
[[nodiscard]] double soft_tg_cdf(double y, double mu, double u, double gamma, double trace_term);

// Unnormalized soft-TG density and its normalizing integral (shared with the theory module).
[[nodiscard]] double soft_tg_unnormalized(double z, double mu, double u, double gamma, double trace_term);
[[nodiscard]] double soft_tg_normalizer(double mu, double u, double gamma, double trace_term);

struct CarveContext {
    double gamma = 1.0;
    double u = 0.0;  // raw threshold applied to Y^sel
    Peak sel_peak;
    Peak full_peak;
    Mat H_inf;

    void validate() const;
};

// Survival form 1 - soft_tg_cdf at the full-data height, increasing in mu.
[[nodiscard]] double carve_height_pivot(const CarveContext& ctx, double mu, const Mat& lambda);
[[nodiscard]] ConfidenceInterval carve_height_interval(const CarveContext& ctx, double alpha, const Mat& lambda,
                                                       const InversionOptions& options = {});

// Symmetric part of H_hat Lambda^{-1} H_inf; throws degenerate_carve_precision unless PD.
[[nodiscard]] Mat carve_precision(const CarveContext& ctx, const Mat& lambda);
[[nodiscard]] double carve_wald_pivot(const CarveContext& ctx, const Vec& t, const Mat& lambda);
[[nodiscard]] Ellipsoid carve_location_ellipsoid(const CarveContext& ctx, double alpha, const Mat& lambda);

[[nodiscard]] double split_height_pivot(const Peak& inf_peak, double mu, double gamma, const Mat& lambda);
[[nodiscard]] ConfidenceInterval split_height_interval(const Peak& inf_peak, double alpha, double gamma,
                                                       const Mat& lambda);
// Precision H Lambda^{-1} H / tau^2: Y^inf carries noise variance tau^2 = 1 + 1/gamma.
[[nodiscard]] Mat split_precision(const Peak& inf_peak, double gamma, const Mat& lambda);
[[nodiscard]] double split_wald_pivot(const Peak& inf_peak, const Vec& t, double gamma, const Mat& lambda);
[[nodiscard]] Ellipsoid split_location_ellipsoid(const Peak& inf_peak, double alpha, double gamma,
                                                 const Mat& lambda);

}  // namespace peakinf
