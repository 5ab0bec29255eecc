#pragma once

#include <optional>
#include <vector>

#include "peakinf/peaks.hpp"

namespace peakinf {

[[nodiscard]] double tg_survival(double u, double v, int d);
[[nodiscard]] double tg_threshold(double alpha, double v, int d);

// Non-degenerate peaks strictly above v, order preserved.
[[nodiscard]] std::vector<Peak> prethreshold(const std::vector<Peak>& peaks, double v);

struct DetectionConfig {
    double v = 3.0;
    double alpha = 0.1;
    std::optional<double> explicit_u;  // empty: TG-calibrated
    int dimension = 2;

    void validate() const;
    // Threshold used on the standardized scale.
    [[nodiscard]] double threshold() const;
};

struct DetectionResult {
    std::vector<Peak> prethresholded;
    std::vector<Peak> discoveries;
    double u_used = 0.0;
};

[[nodiscard]] DetectionResult tg_test(const std::vector<Peak>& prethresholded, const DetectionConfig& config);

// Detection on a field with noise standard deviation `scale` (the selection
// field): prethreshold at scale*v and reject above scale*u. u_used is
// reported on the raw scale.
[[nodiscard]] DetectionResult detect_scaled(const std::vector<Peak>& peaks, const DetectionConfig& config,
                                            double scale);

}  // namespace peakinf
