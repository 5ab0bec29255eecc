#pragma once

namespace peakinf {

// Standard normal density, distribution and survival Psi(x) = 1 - Phi(x).
[[nodiscard]] double normal_pdf(double x) noexcept;
[[nodiscard]] double normal_cdf(double x) noexcept;
[[nodiscard]] double normal_survival(double x) noexcept;

// log Psi(x), finite for any finite x (asymptotic series far in the upper tail).
[[nodiscard]] double log_normal_survival(double x) noexcept;

// Upper-tail quantile Q with Psi(Q(p)) = p, and the lower-tail Phi^{-1}.
[[nodiscard]] double normal_upper_quantile(double p);
[[nodiscard]] double normal_quantile(double p);

[[nodiscard]] double chi2_cdf(int d, double x);
[[nodiscard]] double chi2_quantile(int d, double p);

}  // namespace peakinf
