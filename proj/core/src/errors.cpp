#include "peakinf/errors.hpp"

namespace peakinf {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::configuration: return "configuration";
        case ErrorCode::domain: return "domain";
        case ErrorCode::model: return "model";
        case ErrorCode::parameter: return "parameter";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::selection_violated: return "selection_violated";
        case ErrorCode::degenerate_hessian: return "degenerate_hessian";
        case ErrorCode::degenerate_carve_precision: return "degenerate_carve_precision";
        case ErrorCode::matching: return "matching";
        case ErrorCode::window: return "window";
        case ErrorCode::ill_conditioned_kernel: return "ill_conditioned_kernel";
        case ErrorCode::curvature_too_low: return "curvature_too_low";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

}  // namespace peakinf
