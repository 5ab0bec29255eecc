#include "peakinf/quadrature.hpp"

#include <cmath>
#include <limits>

#include "peakinf/errors.hpp"

namespace peakinf {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Simpson {
    const std::function<double(double)>& f;
    bool failed = false;

    double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = f(lm), frm = f(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
        // Tolerance below rounding level or an interval that no longer splits:
        // refining further cannot help.
        if (std::abs(diff) <= 64.0 * kEps * std::abs(left + right) || !(a < lm && rm < b))
            return left + right + diff / 15.0;
        if (depth <= 0) {
            failed = true;
            return left + right + diff / 15.0;
        }
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    if (a > b) return -adaptive_simpson(f, b, a, abs_tol, max_depth);
    Simpson s{f};
    // Split into four starting panels so narrow features are not skipped.
    double total = 0.0;
    const double h = (b - a) / 4.0;
    for (int i = 0; i < 4; ++i) {
        const double lo = a + i * h, hi = (i == 3) ? b : a + (i + 1) * h;
        const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += s.recurse(lo, hi, flo, fmid, fhi, whole, 0.25 * abs_tol, max_depth);
    }
    if (s.failed || !std::isfinite(total))
        throw Error(ErrorCode::numerical, "adaptive Simpson did not converge");
    return total;
}

double composite_simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace peakinf
