#include "peakinf/detect.hpp"

#include <cmath>
#include <limits>

#include "peakinf/errors.hpp"
#include "peakinf/special.hpp"

namespace peakinf {

namespace {

double shift(double v, int d) {
    if (d < 0) throw Error(ErrorCode::parameter, "dimension must be >= 0");
    if (!(v > 0.0)) throw Error(ErrorCode::parameter, "pre-threshold v must be positive");
    return d / v;
}

}  // namespace

double tg_survival(double u, double v, int d) {
    const double m = shift(v, d);
    if (u < v) throw Error(ErrorCode::parameter, "tg_survival requires u >= v");
    if (u == v) return 1.0;
    return std::exp(log_normal_survival(u - m) - log_normal_survival(v - m));
}

double tg_threshold(double alpha, double v, int d) {
    const double m = shift(v, d);
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::parameter, "alpha must lie in (0,1]");
    if (alpha == 1.0) return v;
    return m + normal_upper_quantile(alpha * normal_survival(v - m));
}

std::vector<Peak> prethreshold(const std::vector<Peak>& peaks, double v) {
    std::vector<Peak> out;
    for (const auto& p : peaks)
        if (!p.degenerate && p.height > v) out.push_back(p);
    return out;
}

void DetectionConfig::validate() const {
    if (dimension < 0) throw Error(ErrorCode::configuration, "detection dimension must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::configuration, "alpha must lie in (0,1]");
    if (explicit_u) {
        if (!(*explicit_u >= v)) throw Error(ErrorCode::parameter, "explicit u must be >= v");
    } else if (!(v > 0.0)) {
        throw Error(ErrorCode::configuration, "TG calibration needs v > 0");
    }
}

double DetectionConfig::threshold() const {
    validate();
    return explicit_u ? *explicit_u : tg_threshold(alpha, v, dimension);
}

DetectionResult tg_test(const std::vector<Peak>& prethresholded, const DetectionConfig& config) {
    DetectionResult r;
    r.u_used = config.threshold();
    r.prethresholded = prethresholded;
    for (const auto& p : prethresholded)
        if (p.height > r.u_used) r.discoveries.push_back(p);
    return r;
}

DetectionResult detect_scaled(const std::vector<Peak>& peaks, const DetectionConfig& config, double scale) {
    if (!(scale > 0.0)) throw Error(ErrorCode::parameter, "scale must be positive");
    DetectionResult r;
    r.u_used = scale * config.threshold();
    r.prethresholded = prethreshold(peaks, scale * config.v);
    for (const auto& p : r.prethresholded)
        if (p.height > r.u_used) r.discoveries.push_back(p);
    return r;
}

}  // namespace peakinf
