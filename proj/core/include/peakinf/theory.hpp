#pragma once

#include "peakinf/model.hpp"

namespace peakinf {

[[nodiscard]] Mat deterministic_hessian(const SignalSpec& signal, const DerivativeBundle& bundle, const Vec& t,
                                        double y);
[[nodiscard]] Mat goldilocks(const SignalSpec& signal, const DerivativeBundle& bundle, const Vec& t, double y);

struct TheoryContext {
    TruePeak true_peak;
    double u = 0.0;
    double u_bar = 0.0;
    Mat H_bar;
    Mat G_bar;
    DerivativeBundle bundle;
    CurvatureScales scales;
    Tensor3 third_deriv;

    [[nodiscard]] int dim() const { return static_cast<int>(true_peak.location.size()); }
    [[nodiscard]] double mu() const { return true_peak.height; }
    // tr(H_bar^{-1} Lambda)
    [[nodiscard]] double trace() const;
    // G_{t*|y} = G_bar + (y - u_bar)(-Hess mu)
    [[nodiscard]] Mat conditional_goldilocks(double y) const;
    // Marginal sandwich (-Hess mu) Lambda^{-1} (-Hess mu) and H_bar Lambda^{-1} H_bar.
    [[nodiscard]] Mat marginal_sandwich() const;
    [[nodiscard]] Mat conditional_sandwich() const;
    // Deterministic height limit after randomized selection, (1-pi) u_bar + pi mu.
    [[nodiscard]] double u_bar_randomized(double gamma) const;
};

[[nodiscard]] TheoryContext make_theory_context(const SignalSpec& signal, const DerivativeBundle& bundle,
                                                const TruePeak& peak, double u, const CurvatureScales& scales);

struct IdentityReport {
    double goldilocks_identity = 0.0;   // max |G_bar - H_bar Lambda^{-1} (-Hess mu)|, relative
    double lower_sandwich_min_eig = 0.0;  // lambda_min(G_bar - marginal sandwich)
    double upper_sandwich_min_eig = 0.0;  // lambda_min(conditional sandwich - G_bar)
    double goldilocks_shift = 0.0;      // max |G_{t*|y} - G_bar - (y - u_bar)(-Hess mu)| at a probe y
};

[[nodiscard]] IdentityReport check_identities(const TheoryContext& ctx, const SignalSpec& signal, double probe_y);

struct FirstOrderTerms {
    double t01 = 0.0, t10 = 0.0, t30 = 0.0, t21 = 0.0;
    [[nodiscard]] double bracket() const { return 1.0 + t01 + t10 - 0.5 * t30 + t21; }
};

[[nodiscard]] FirstOrderTerms first_order_terms(const TheoryContext& ctx, const Vec& h, double y);

struct IntensityValue {
    double value = 0.0;
    bool clamped = false;
};

// Throws ErrorCode::window outside |h| <= eps_n, |y - u_bar| <= Delta_n.
[[nodiscard]] IntensityValue approx_intensity(const TheoryContext& ctx, const Vec& h, double y,
                                              bool first_order = true);

[[nodiscard]] double expected_true_discoveries(const TheoryContext& ctx);
[[nodiscard]] double power_approx(const TheoryContext& ctx);

[[nodiscard]] double approx_height_density(const TheoryContext& ctx, double y);
[[nodiscard]] double approx_height_cdf(const TheoryContext& ctx, double y);
[[nodiscard]] double approx_location_density(const TheoryContext& ctx, const Vec& h, double y);

[[nodiscard]] double null_palm_density(double v, int d, double y);
[[nodiscard]] double null_marginal_intensity(const DerivativeBundle& bundle, double v, int d);

// Exact Kac-Rice intensity of local maxima of a centred unit-variance
// squared-exponential field at height y (per unit volume), d in {1, 2}.
[[nodiscard]] double null_exact_height_intensity(const KernelSpec& kernel, double y);
// Expected count of local maxima above v per unit volume (v = -inf allowed).
[[nodiscard]] double null_exact_intensity_above(const KernelSpec& kernel, double v);

[[nodiscard]] double carve_height_density(const TheoryContext& ctx, double gamma, double y);

}  // namespace peakinf
