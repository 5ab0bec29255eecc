#include "peakinf/metrics.hpp"

#include <cmath>
#include <numeric>

#include "peakinf/errors.hpp"

namespace peakinf {

const char* label_name(LabelKind kind) noexcept {
    switch (kind) {
        case LabelKind::epsilon_consistent: return "epsilon_consistent";
        case LabelKind::null_region: return "null_region";
        case LabelKind::high_gradient: return "high_gradient";
    }
    return "unknown";
}

PeakLabel label_location(const Vec& location, const SignalSpec& signal, const std::vector<TruePeak>& truth,
                         double eps_n, double null_radius) {
    PeakLabel label;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = (location - truth[i].location).norm();
        if (d < label.distance) {
            label.distance = d;
            label.true_peak = i;
        }
    }
    if (label.true_peak != PeakLabel::kNoPeak && label.distance <= eps_n) {
        label.kind = LabelKind::epsilon_consistent;
        return label;
    }
    bool null = true;
    for (const auto& b : signal.bumps) {
        if ((location - b.center).norm() < signal.support_radius(b) + null_radius) {
            null = false;
            break;
        }
    }
    label.kind = null ? LabelKind::null_region : LabelKind::high_gradient;
    return label;
}

std::vector<PeakLabel> label_peaks(const std::vector<Peak>& peaks, const SignalSpec& signal,
                                   const std::vector<TruePeak>& truth, double eps_n, double null_radius) {
    std::vector<PeakLabel> out;
    out.reserve(peaks.size());
    for (const auto& p : peaks) out.push_back(label_location(p.location, signal, truth, eps_n, null_radius));
    return out;
}

RateEstimate pooled_ratio(std::span<const double> num, std::span<const double> den) {
    if (num.size() != den.size()) throw Error(ErrorCode::parameter, "pooled_ratio: length mismatch");
    RateEstimate r;
    r.replicates = num.size();
    r.numerator = std::accumulate(num.begin(), num.end(), 0.0);
    r.denominator = std::accumulate(den.begin(), den.end(), 0.0);
    if (!(r.denominator > 0.0)) return r;
    r.value = r.numerator / r.denominator;
    const std::size_t n = num.size();
    if (n < 2) return r;
    std::vector<double> loo;
    loo.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double b = r.denominator - den[i];
        if (b > 0.0) loo.push_back((r.numerator - num[i]) / b);
    }
    if (loo.size() < 2) return r;
    const double m = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(loo.size());
    double ss = 0.0;
    for (double x : loo) ss += (x - m) * (x - m);
    const double k = static_cast<double>(loo.size());
    r.se = std::sqrt((k - 1.0) / k * ss);
    return r;
}

namespace {

template <class F>
RateEstimate rate(std::span<const ReplicateCounts> outcomes, F numerator) {
    std::vector<double> num, den;
    num.reserve(outcomes.size());
    den.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        num.push_back(numerator(o));
        den.push_back(o.prethresholded);
    }
    return pooled_ratio(num, den);
}

}  // namespace

RateEstimate estimate_null_pcer(std::span<const ReplicateCounts> outcomes) {
    return rate(outcomes, [](const ReplicateCounts& o) { return o.null_discoveries; });
}

RateEstimate estimate_eps_pcer(std::span<const ReplicateCounts> outcomes) {
    return rate(outcomes, [](const ReplicateCounts& o) { return o.inconsistent_discoveries; });
}

PcmrEstimate estimate_pcmr(std::span<const ReplicateCounts> outcomes) {
    return {rate(outcomes, [](const ReplicateCounts& o) { return o.height_misses; }),
            rate(outcomes, [](const ReplicateCounts& o) { return o.location_misses; })};
}

MeanEstimate mean_estimate(std::span<const double> values) {
    MeanEstimate m;
    m.n = values.size();
    if (values.empty()) return m;
    const double n = static_cast<double>(values.size());
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return m;
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.se = std::sqrt(ss / (n - 1.0) / n);
    return m;
}

ConditionalCoverage conditional_coverage(std::span<const CoverageRecord> records) {
    std::vector<double> h, l, hw, lw;
    for (const auto& r : records) {
        if (r.height_evaluated) {
            h.push_back(r.height_covered ? 1.0 : 0.0);
            hw.push_back(r.height_width);
        }
        l.push_back(r.location_covered ? 1.0 : 0.0);
        lw.push_back(r.location_width);
    }
    return {mean_estimate(h), mean_estimate(l), mean_estimate(hw), mean_estimate(lw)};
}

}  // namespace peakinf
