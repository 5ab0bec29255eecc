#pragma once

#include <cstddef>
#include <vector>

#include "peakinf/field.hpp"

namespace peakinf {

struct Peak {
    Vec location;
    double height = 0.0;
    std::size_t grid_index = 0;
    Mat neg_hessian;
    Vec gradient;
    bool degenerate = false;
};

// Strict 3^d-neighbourhood maxima at least two cells from the boundary,
// refined and sorted by height (descending, ties by grid index).
[[nodiscard]] std::vector<Peak> find_local_maxima(const FieldView& field);
[[nodiscard]] std::vector<Peak> find_local_maxima(const FieldSample& sample);

[[nodiscard]] Peak refine_peak(const FieldView& field, std::size_t grid_index);
[[nodiscard]] Peak refine_peak(const FieldSample& sample, std::size_t grid_index);

// Central-difference gradient and negative Hessian at a grid point with
// at least one neighbour on each side.
void fd_derivatives(const FieldView& field, std::size_t grid_index, Vec& gradient, Mat& neg_hessian);

// Negative FD Hessian multilinearly interpolated at an arbitrary location.
[[nodiscard]] Mat interpolated_neg_hessian(const FieldView& field, const Vec& location);

[[nodiscard]] Mat peak_hessian_inf(const RandomizationSplit& split, const Grid& grid, const Vec& location);

}  // namespace peakinf
