#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "peakinf/model.hpp"
#include "peakinf/rng.hpp"

namespace peakinf {

// Regular lattice including both endpoints of every axis. Points are ordered
// lexicographically with the last axis varying fastest.
class Grid {
public:
    Grid(Box box, std::vector<int> counts);

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(counts_.size()); }
    [[nodiscard]] const Box& box() const noexcept { return box_; }
    [[nodiscard]] const std::vector<int>& counts() const noexcept { return counts_; }
    [[nodiscard]] const Vec& spacing() const noexcept { return spacing_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t stride(int axis) const noexcept { return strides_[axis]; }

    [[nodiscard]] std::vector<int> multi_index(std::size_t flat) const;
    [[nodiscard]] std::size_t flat_index(const std::vector<int>& multi) const;
    [[nodiscard]] Vec point(std::size_t flat) const;
    [[nodiscard]] double coordinate(int axis, int i) const noexcept { return box_.lo(axis) + i * spacing_(axis); }

    // Throws ErrorCode::configuration when some spacing exceeds length_scale/ratio.
    void check_spacing(const KernelSpec& kernel, double ratio = 6.0) const;

    [[nodiscard]] bool operator==(const Grid& other) const;

private:
    Box box_;
    std::vector<int> counts_;
    std::vector<std::size_t> strides_;
    Vec spacing_;
    std::size_t size_ = 0;
};

inline constexpr std::size_t kDefaultCovarianceCap = 4096;

class CovarianceFactor {
public:
    CovarianceFactor(KernelSpec kernel, std::shared_ptr<const Grid> grid, Mat lower, double jitter);

    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] const Mat& lower() const noexcept { return lower_; }
    [[nodiscard]] double jitter() const noexcept { return jitter_; }

    // L z for a vector of standard normals.
    [[nodiscard]] Vec correlate(const Vec& z) const;
    // Draws L z with z from the keyed counter-based stream.
    [[nodiscard]] Vec draw(const NoiseKey& key) const;

private:
    KernelSpec kernel_;
    std::shared_ptr<const Grid> grid_;
    Mat lower_;
    double jitter_;
};

[[nodiscard]] Mat covariance_matrix(const KernelSpec& kernel, const Grid& grid);

[[nodiscard]] CovarianceFactor covariance_factor(const KernelSpec& kernel, std::shared_ptr<const Grid> grid,
                                                 std::size_t cap = kDefaultCovarianceCap);

// Read-only view of lattice values.
struct FieldView {
    const Grid& grid;
    std::span<const double> values;
};

struct FieldSample {
    std::shared_ptr<const Grid> grid;
    Vec values;
    Vec mean;
    NoiseKey noise_key;
    std::shared_ptr<const SignalSpec> signal;

    [[nodiscard]] FieldView view() const { return {*grid, {values.data(), static_cast<std::size_t>(values.size())}}; }
};

[[nodiscard]] Vec signal_on_grid(const SignalSpec& signal, const Grid& grid);

[[nodiscard]] FieldSample sample_field(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                                       const NoiseKey& key);
[[nodiscard]] FieldSample sample_field(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                                       std::uint64_t seed);

// Test hook: the field built from a caller-supplied correlated noise vector.
[[nodiscard]] FieldSample field_from_noise(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                                           const Vec& noise);

struct RandomizationSplit {
    double gamma = 1.0;
    Vec sel_values;
    Vec inf_values;
    NoiseKey omega_key;

    [[nodiscard]] FieldView sel_view(const Grid& g) const {
        return {g, {sel_values.data(), static_cast<std::size_t>(sel_values.size())}};
    }
    [[nodiscard]] FieldView inf_view(const Grid& g) const {
        return {g, {inf_values.data(), static_cast<std::size_t>(inf_values.size())}};
    }
};

[[nodiscard]] RandomizationSplit randomize(const FieldSample& sample, const CovarianceFactor& factor, double gamma,
                                           const NoiseKey& omega_key);

// Test hook: split built from a caller-supplied omega (already correlated).
[[nodiscard]] RandomizationSplit randomize_with_omega(const FieldSample& sample, double gamma, const Vec& omega);

[[nodiscard]] inline double selection_scale(double gamma) { return std::sqrt(1.0 + gamma); }
[[nodiscard]] inline double inference_scale(double gamma) { return std::sqrt(1.0 + 1.0 / gamma); }

}  // namespace peakinf
