#include "peakinf/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "peakinf/errors.hpp"

namespace peakinf {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCode::parameter, std::string(what) + ": probability must lie in (0,1)");
    }
}

}  // namespace

double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_survival(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double log_normal_survival(double x) noexcept {
    if (x < 0.0) return std::log1p(-normal_survival(-x));
    if (x < 30.0) return std::log(normal_survival(x));
    // Mills ratio series; at x >= 30 truncation error is below 1e-13 relative.
    const double r = 1.0 / (x * x);
    const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    return -0.5 * x * x - std::log(x) - kLogSqrt2Pi + std::log(series);
}

double normal_upper_quantile(double p) {
    check_probability(p, "normal_upper_quantile");
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_quantile(double p) {
    check_probability(p, "normal_quantile");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double chi2_cdf(int d, double x) {
    if (d < 1) throw Error(ErrorCode::parameter, "chi2_cdf: degrees of freedom must be >= 1");
    if (x <= 0.0) return 0.0;
    return boost::math::gamma_p(0.5 * d, 0.5 * x);
}

double chi2_quantile(int d, double p) {
    if (d < 1) throw Error(ErrorCode::parameter, "chi2_quantile: degrees of freedom must be >= 1");
    check_probability(p, "chi2_quantile");
    return 2.0 * boost::math::gamma_p_inv(0.5 * d, p);
}

}  // namespace peakinf
