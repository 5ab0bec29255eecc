#pragma once

#include <memory>

#include "peakinf/field.hpp"
#include "peakinf/model.hpp"

namespace peakinf::test {

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline Box square(double lo, double hi, int d = 2) {
    return {Vec::Constant(d, lo), Vec::Constant(d, hi)};
}

inline KernelSpec se_kernel(double l = 0.15, int d = 2) {
    KernelSpec k;
    k.length_scale = l;
    k.dimension = d;
    return k;
}

inline std::shared_ptr<const SignalSpec> single_bump(double amplitude, double width = 0.15, int d = 2,
                                                     double half = 1.0) {
    auto s = std::make_shared<SignalSpec>();
    s->domain = square(-half, half, d);
    s->bumps.push_back({Vec::Zero(d), amplitude, width});
    return s;
}

inline std::shared_ptr<const SignalSpec> null_signal(int d = 2, double half = 1.0) {
    auto s = std::make_shared<SignalSpec>();
    s->domain = square(-half, half, d);
    return s;
}

// A sampled field whose values are an arbitrary function of the coordinates.
template <class F>
FieldSample tabulate(std::shared_ptr<const Grid> grid, F f) {
    FieldSample s;
    s.grid = grid;
    s.values.resize(static_cast<Eigen::Index>(grid->size()));
    for (std::size_t i = 0; i < grid->size(); ++i) s.values(static_cast<Eigen::Index>(i)) = f(grid->point(i));
    s.mean = Vec::Zero(s.values.size());
    return s;
}

}  // namespace peakinf::test
