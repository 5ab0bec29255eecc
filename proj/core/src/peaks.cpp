#include "peakinf/peaks.hpp"

#include <algorithm>
#include <cmath>

#include "peakinf/errors.hpp"

namespace peakinf {

namespace {

// Flat offsets of the 3^d - 1 neighbours.
std::vector<std::ptrdiff_t> neighbour_offsets(const Grid& g) {
    const int d = g.dim();
    std::vector<std::ptrdiff_t> out;
    std::vector<int> digit(d, -1);
    while (true) {
        std::ptrdiff_t off = 0;
        bool zero = true;
        for (int a = 0; a < d; ++a) {
            off += digit[a] * static_cast<std::ptrdiff_t>(g.stride(a));
            zero = zero && digit[a] == 0;
        }
        if (!zero) out.push_back(off);
        int a = d - 1;
        while (a >= 0 && digit[a] == 1) digit[a--] = -1;
        if (a < 0) break;
        ++digit[a];
    }
    return out;
}

bool positive_definite(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

void fd_derivatives(const FieldView& field, std::size_t idx, Vec& gradient, Mat& neg_hessian) {
    const Grid& g = field.grid;
    const int d = g.dim();
    const auto& v = field.values;
    const double f0 = v[idx];
    gradient.resize(d);
    neg_hessian.resize(d, d);
    for (int a = 0; a < d; ++a) {
        const std::size_t sa = g.stride(a);
        const double ha = g.spacing()(a);
        const double fp = v[idx + sa], fm = v[idx - sa];
        gradient(a) = (fp - fm) / (2.0 * ha);
        neg_hessian(a, a) = -(fp - 2.0 * f0 + fm) / (ha * ha);
        for (int b = 0; b < a; ++b) {
            const std::size_t sb = g.stride(b);
            const double hb = g.spacing()(b);
            const double hab = (v[idx + sa + sb] - v[idx + sa - sb] - v[idx - sa + sb] + v[idx - sa - sb]) /
                               (4.0 * ha * hb);
            neg_hessian(a, b) = -hab;
            neg_hessian(b, a) = -hab;
        }
    }
}

Peak refine_peak(const FieldView& field, std::size_t idx) {
    const Grid& g = field.grid;
    const auto m = g.multi_index(idx);
    for (int a = 0; a < g.dim(); ++a)
        if (m[a] < 1 || m[a] > g.counts()[a] - 2)
            throw Error(ErrorCode::domain, "refine_peak needs an interior grid index");

    Peak p;
    p.grid_index = idx;
    p.location = g.point(idx);
    p.height = field.values[idx];
    fd_derivatives(field, idx, p.gradient, p.neg_hessian);
    if (!positive_definite(p.neg_hessian)) {
        p.degenerate = true;
        return p;
    }
    Vec s = p.neg_hessian.llt().solve(p.gradient);
    double worst = 0.0;
    for (int a = 0; a < g.dim(); ++a) worst = std::max(worst, std::abs(s(a)) / g.spacing()(a));
    if (worst > 1.0) s /= worst;
    p.location += s;
    p.height += p.gradient.dot(s) - 0.5 * s.dot(p.neg_hessian * s);
    return p;
}

Peak refine_peak(const FieldSample& sample, std::size_t idx) { return refine_peak(sample.view(), idx); }

std::vector<Peak> find_local_maxima(const FieldView& field) {
    const Grid& g = field.grid;
    const int d = g.dim();
    if (field.values.size() != g.size()) throw Error(ErrorCode::parameter, "field has wrong number of values");
    for (int a = 0; a < d; ++a)
        if (g.counts()[a] < 5) throw Error(ErrorCode::parameter, "find_local_maxima needs >= 5 points per axis");

    const auto offsets = neighbour_offsets(g);
    std::vector<Peak> out;
    std::vector<int> m(d, 2);
    const auto& v = field.values;
    while (true) {
        const std::size_t idx = g.flat_index(m);
        const double f0 = v[idx];
        bool is_max = true;
        for (auto off : offsets) {
            if (!(f0 > v[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + off)])) {
                is_max = false;
                break;
            }
        }
        if (is_max) out.push_back(refine_peak(field, idx));

        int a = d - 1;
        while (a >= 0 && m[a] == g.counts()[a] - 3) m[a--] = 2;
        if (a < 0) break;
        ++m[a];
    }
    std::stable_sort(out.begin(), out.end(), [](const Peak& x, const Peak& y) {
        if (x.height != y.height) return x.height > y.height;
        return x.grid_index < y.grid_index;
    });
    return out;
}

std::vector<Peak> find_local_maxima(const FieldSample& sample) { return find_local_maxima(sample.view()); }

Mat interpolated_neg_hessian(const FieldView& field, const Vec& location) {
    const Grid& g = field.grid;
    const int d = g.dim();
    if (location.size() != d) throw Error(ErrorCode::domain, "location has wrong dimension");
    std::vector<int> base(d);
    Vec w(d);
    for (int a = 0; a < d; ++a) {
        const int n = g.counts()[a];
        if (n < 4) throw Error(ErrorCode::domain, "interpolation needs >= 4 points per axis");
        const double x = (location(a) - g.box().lo(a)) / g.spacing()(a);
        if (!(x >= 1.0 - 1e-12 && x <= n - 2 + 1e-12))
            throw Error(ErrorCode::domain, "location outside the finite-difference margin");
        int i0 = static_cast<int>(std::floor(x));
        i0 = std::clamp(i0, 1, n - 3);
        base[a] = i0;
        w(a) = std::clamp(x - i0, 0.0, 1.0);
    }
    Mat out = Mat::Zero(d, d);
    Vec grad;
    Mat H;
    std::vector<int> corner(d);
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        double weight = 1.0;
        for (int a = 0; a < d; ++a) {
            const bool up = (mask >> a) & 1u;
            corner[a] = base[a] + (up ? 1 : 0);
            weight *= up ? w(a) : 1.0 - w(a);
        }
        if (weight == 0.0) continue;
        fd_derivatives(field, g.flat_index(corner), grad, H);
        out += weight * H;
    }
    return 0.5 * (out + out.transpose());
}

Mat peak_hessian_inf(const RandomizationSplit& split, const Grid& grid, const Vec& location) {
    if (split.inf_values.size() != static_cast<Eigen::Index>(grid.size()))
        throw Error(ErrorCode::parameter, "split does not match grid");
    return interpolated_neg_hessian(split.inf_view(grid), location);
}

}  // namespace peakinf
