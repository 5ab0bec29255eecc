#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "peakinf/detect.hpp"
#include "peakinf/field.hpp"
#include "peakinf/infer.hpp"
#include "peakinf/metrics.hpp"
#include "peakinf/model.hpp"
#include "peakinf/theory.hpp"

namespace peakinf {

enum class Method { standard = 0, carve = 1, split = 2 };
inline constexpr int kMethodCount = 3;
[[nodiscard]] const char* method_name(Method m) noexcept;

enum class SignalKind { single_bump, bumps, null };

// offset: u = mu0 + offset per cell; tg: u = u_TG(alpha, v); explicit_u: fixed u.
enum class ThresholdMode { offset, tg, explicit_u };

struct ExperimentConfig {
    std::string name = "custom";
    KernelSpec kernel;

    SignalKind signal_kind = SignalKind::single_bump;
    Vec center;                   // single_bump; defaults to the box centre
    double bump_width = 0.0;      // single_bump; 0 means the kernel length scale
    std::vector<Bump> bumps;      // bumps
    int taper_order = 0;
    double taper_radius = 3.0;

    Box box;
    std::vector<int> counts;
    double spacing_ratio = 0.0;   // > 0 enforces spacing <= length_scale / ratio
    std::size_t covariance_cap = kDefaultCovarianceCap;

    ThresholdMode threshold_mode = ThresholdMode::offset;
    std::optional<double> v;      // empty in offset mode means v = u
    double detection_alpha = 0.1;
    std::optional<double> explicit_u;

    double inference_alpha = 0.1;
    bool carve_height = true;

    std::vector<Method> methods{Method::standard};
    double gamma = 1.0;

    std::vector<double> mu0{11.0};
    std::vector<double> u_offsets{0.0};

    std::size_t replicates = 1000;
    std::uint64_t seed = 1;
    int threads = 1;

    double eps_constant = 6.0;
    std::optional<double> null_radius;  // default 3 * max bump width

    std::string output_dir = "out";
    bool write_pivots = true;
    double max_failure_fraction = 0.01;

    // Throws ErrorCode::configuration (or the module's own code) on violations.
    void validate() const;
    [[nodiscard]] bool has_method(Method m) const;
    [[nodiscard]] int dim() const { return kernel.dimension; }
};

// JSON config parsing. Unknown keys are rejected.
[[nodiscard]] ExperimentConfig config_from_json(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
// Preset JSON text for exp1, exp2, exp3 or custom; optional overrides (a JSON
// object) are merged on top before parsing.
[[nodiscard]] std::string preset_json(const std::string& name);
[[nodiscard]] ExperimentConfig make_config(const std::string& preset, const std::string& overrides_json = "");
[[nodiscard]] std::string config_to_json(const ExperimentConfig& config);

// Pivot statistics recorded for conditioned replicates. Wald entries are
// stored as chi-square CDF values so all of them are Uniform(0,1) in the limit.
enum class Statistic {
    tg_oracle,
    tg_unshifted,
    naive,
    tg_plugin,
    wald_goldilocks,
    wald_marginal,
    wald_conditional,
    wald_plugin,
    soft_tg,
    carve_wald,
    split_height,
    split_wald,
};
[[nodiscard]] const char* statistic_name(Statistic s) noexcept;
[[nodiscard]] const std::vector<Statistic>& method_statistics(Method m);

// One (mu0, threshold) combination with everything that does not depend on
// the replicate.
struct CellPlan {
    double mu0 = 0.0;
    double u_offset = 0.0;
    double u = 0.0;       // standard threshold
    double v = 0.0;       // standard pre-threshold
    double u_sel = 0.0;   // raw threshold on Y^sel
    double v_sel = 0.0;
    std::shared_ptr<const SignalSpec> signal;
    std::vector<TruePeak> truth;
    std::optional<CurvatureScales> scales;      // absent without true peaks
    std::optional<CurvatureScales> scales_sel;  // for Y^sel / sigma_gamma
    std::vector<TheoryContext> ctx;             // per true peak, threshold u
    std::vector<TheoryContext> ctx_sel;         // per true peak, threshold u_sel
    double null_radius = 0.0;
    std::size_t signal_index = 0;               // cells sharing a mu0 share the signal
};

struct ExperimentPlan {
    ExperimentConfig config;
    DerivativeBundle bundle;
    std::shared_ptr<const Grid> grid;
    std::shared_ptr<const CovarianceFactor> factor;
    std::vector<std::shared_ptr<const SignalSpec>> signals;
    std::vector<Vec> signal_grids;
    std::vector<CellPlan> cells;
};

[[nodiscard]] ExperimentPlan make_plan(const ExperimentConfig& config);

// Per-target record of a conditioned replicate.
struct ConditionedRecord {
    std::uint32_t replicate = 0;
    CoverageRecord coverage;
    std::vector<double> statistics;  // aligned with method_statistics(method)
};

struct MethodOutcome {
    bool enabled = false;
    ReplicateCounts counts;
    bool height_evaluated = true;
    std::vector<double> consistent_discoveries;                 // per target
    std::vector<std::optional<ConditionedRecord>> conditioned;  // per target
    std::size_t degenerate = 0;
    std::size_t failed_match = 0;
    std::size_t numerical_failures = 0;
};

struct CellOutcome {
    std::array<MethodOutcome, kMethodCount> methods;
};

struct ReplicateOutcome {
    std::uint32_t index = 0;
    std::vector<CellOutcome> cells;
};

// Deterministic in (config, index): noise and omega come from counter-based
// streams keyed by (seed, index, stream).
[[nodiscard]] ReplicateOutcome run_replicate(const ExperimentPlan& plan, std::uint32_t index);

struct MethodSummary {
    std::vector<ReplicateCounts> counts;  // one per replicate, index order
    bool height_evaluated = true;
    std::vector<std::vector<double>> consistent_discoveries;       // [target][replicate]
    std::vector<std::vector<ConditionedRecord>> conditioned;       // [target]
    std::size_t degenerate = 0;
    std::size_t failed_match = 0;
    std::size_t numerical_failures = 0;

    [[nodiscard]] std::vector<double> statistic(std::size_t target, Method m, Statistic s) const;
};

struct CellSummary {
    std::array<MethodSummary, kMethodCount> methods;
};

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<CellSummary> cells;
    std::size_t replicates = 0;
    bool failed = false;
    std::string failure_reason;
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config);

inline constexpr int kCsvSchemaVersion = 1;

void write_pivots_csv(const ExperimentResult& result, const std::filesystem::path& path);
void write_coverage_csv(const ExperimentResult& result, const std::filesystem::path& path);
void write_rates_csv(const ExperimentResult& result, const std::filesystem::path& path);
// pivots.csv (unless disabled), coverage.csv and rates.csv under config.output_dir.
void write_outputs(const ExperimentResult& result);

// One field realization as CSV: coordinates, y, mu.
void write_field_csv(const FieldSample& sample, const std::filesystem::path& path);

// Closed-form quantities per cell and true peak, printed with 12 significant digits.
[[nodiscard]] std::string theory_report(const ExperimentConfig& config);

}  // namespace peakinf
