#pragma once

#include <stdexcept>
#include <string>

namespace peakinf {

enum class ErrorCode {
    configuration,
    domain,
    model,
    parameter,
    numerical,
    selection_violated,
    degenerate_hessian,
    degenerate_carve_precision,
    matching,
    window,
    ill_conditioned_kernel,
    curvature_too_low,
    io,
};

[[nodiscard]] const char* error_code_name(ErrorCode code) noexcept;

// Single exception type; callers branch on code() rather than on a class tree.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace peakinf
