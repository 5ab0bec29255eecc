#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "peakinf/model.hpp"
#include "peakinf/peaks.hpp"

namespace peakinf {

enum class LabelKind { epsilon_consistent, null_region, high_gradient };

struct PeakLabel {
    static constexpr std::size_t kNoPeak = static_cast<std::size_t>(-1);

    LabelKind kind = LabelKind::high_gradient;
    std::size_t true_peak = kNoPeak;  // nearest true peak, kNoPeak when there is none
    double distance = std::numeric_limits<double>::infinity();
};

[[nodiscard]] const char* label_name(LabelKind kind) noexcept;

// Nearest true peak (ties to the lowest index) and region label. A peak is in
// the null region when the ball of radius null_radius around it misses the
// support of every bump, which needs tapered bumps (or no bumps at all).
[[nodiscard]] PeakLabel label_location(const Vec& location, const SignalSpec& signal,
                                       const std::vector<TruePeak>& truth, double eps_n, double null_radius);
[[nodiscard]] std::vector<PeakLabel> label_peaks(const std::vector<Peak>& peaks, const SignalSpec& signal,
                                                 const std::vector<TruePeak>& truth, double eps_n,
                                                 double null_radius);

struct RateEstimate {
    double value = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    double numerator = 0.0;
    double denominator = 0.0;
    std::size_t replicates = 0;

    [[nodiscard]] bool defined() const noexcept { return denominator > 0.0; }
};

// Ratio of pooled sums with a leave-one-replicate-out jackknife SE.
[[nodiscard]] RateEstimate pooled_ratio(std::span<const double> numerators, std::span<const double> denominators);

// Per-replicate counts entering the error-rate estimators.
struct ReplicateCounts {
    double prethresholded = 0;  // denominator of every rate
    double discoveries = 0;
    double null_discoveries = 0;
    double inconsistent_discoveries = 0;  // label != epsilon-consistent
    double height_misses = 0;
    double location_misses = 0;
};

[[nodiscard]] RateEstimate estimate_null_pcer(std::span<const ReplicateCounts> outcomes);
[[nodiscard]] RateEstimate estimate_eps_pcer(std::span<const ReplicateCounts> outcomes);

struct PcmrEstimate {
    RateEstimate height;
    RateEstimate location;
};

[[nodiscard]] PcmrEstimate estimate_pcmr(std::span<const ReplicateCounts> outcomes);

// Mean with its standard error; used for conditional coverage and widths.
struct MeanEstimate {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

[[nodiscard]] MeanEstimate mean_estimate(std::span<const double> values);

// One conditioned observation for one true peak under one method.
struct CoverageRecord {
    bool height_evaluated = true;  // false when the height interval was skipped
    bool height_covered = false;
    bool location_covered = false;
    double height_width = 0.0;
    double location_width = 0.0;
};

struct ConditionalCoverage {
    MeanEstimate height;
    MeanEstimate location;
    MeanEstimate height_width;
    MeanEstimate location_width;
};

[[nodiscard]] ConditionalCoverage conditional_coverage(std::span<const CoverageRecord> records);

// Kolmogorov-Smirnov distance of a sample against a continuous CDF.
template <class Cdf>
[[nodiscard]] double ks_statistic(std::vector<double> sample, Cdf&& cdf);

}  // namespace peakinf

#include <algorithm>

namespace peakinf {

template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
    if (sample.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

}  // namespace peakinf
