#pragma once

#include <functional>

namespace peakinf {

// Adaptive Simpson on [a, b]; throws ErrorCode::numerical if the recursion
// depth is exhausted before the local error estimate meets abs_tol.
[[nodiscard]] double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                                      int max_depth = 48);

// Composite Simpson with n (even) panels, used for coarse scale estimates.
[[nodiscard]] double composite_simpson(const std::function<double(double)>& f, double a, double b, int n);

}  // namespace peakinf
