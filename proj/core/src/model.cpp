#include "peakinf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "peakinf/errors.hpp"

namespace peakinf {

Mat Tensor3::contract(const Vec& h) const {
    Mat out = Mat::Zero(d_, d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j)
            for (int k = 0; k < d_; ++k) out(i, j) += (*this)(i, j, k) * h(k);
    return out;
}

Vec Tensor3::contract2(const Vec& h) const { return contract(h) * h; }

double Tensor3::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

void KernelSpec::validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw Error(ErrorCode::configuration, "kernel length_scale must be positive");
    if (dimension < 1) throw Error(ErrorCode::configuration, "kernel dimension must be >= 1");
}

double kernel_eval(const KernelSpec& spec, const Vec& s, const Vec& t) {
    spec.validate();
    const double r2 = (s - t).squaredNorm();
    return std::exp(-0.5 * r2 / (spec.length_scale * spec.length_scale));
}

DerivativeBundle derivative_bundle(const KernelSpec& spec) {
    spec.validate();
    const int d = spec.dimension;
    const double inv_l2 = 1.0 / (spec.length_scale * spec.length_scale);
    DerivativeBundle b;
    b.lambda = inv_l2 * Mat::Identity(d, d);
    b.k21 = Tensor3(d);
    b.gamma = Tensor3(d);
    b.sigma1_sq = inv_l2;
    return b;
}

bool Box::contains(const Vec& t) const {
    if (t.size() != lo.size()) return false;
    for (int i = 0; i < t.size(); ++i)
        if (!(t(i) >= lo(i) && t(i) <= hi(i))) return false;
    return true;
}

double Box::volume() const { return (hi - lo).prod(); }

double Box::distance_to_boundary(const Vec& t) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t.size(); ++i) m = std::min({m, t(i) - lo(i), hi(i) - t(i)});
    return m;
}

namespace {

// Radial profile f(s), s = |t - c|^2, and its first three s-derivatives.
struct Profile {
    double f0 = 0, f1 = 0, f2 = 0, f3 = 0;
};

Profile bump_profile(const SignalSpec& spec, const Bump& b, double s) {
    const double iw = 1.0 / (2.0 * b.width * b.width);
    const double g = b.amplitude * std::exp(-s * iw);
    const double g1 = -iw * g, g2 = iw * iw * g, g3 = -iw * iw * iw * g;
    if (spec.taper_order <= 0) return {g, g1, g2, g3};

    const double R2 = std::pow(spec.taper_radius * b.width, 2);
    if (s >= R2) return {};
    const int k = spec.taper_order;
    const double x = 1.0 - s / R2;
    const double T = std::pow(x, k);
    const double T1 = -k / R2 * std::pow(x, k - 1);
    const double T2 = k * (k - 1) / (R2 * R2) * (k >= 2 ? std::pow(x, k - 2) : 0.0);
    const double T3 = -k * (k - 1) * (k - 2) / (R2 * R2 * R2) * (k >= 3 ? std::pow(x, k - 3) : 0.0);
    return {g * T, g1 * T + g * T1, g2 * T + 2 * g1 * T1 + g * T2,
            g3 * T + 3 * g2 * T1 + 3 * g1 * T2 + g * T3};
}

void check_point(const SignalSpec& spec, const Vec& t) {
    if (t.size() != spec.dim()) throw Error(ErrorCode::domain, "point dimension does not match signal");
    if (!spec.domain.contains(t)) throw Error(ErrorCode::domain, "point outside signal domain");
}

}  // namespace

double SignalSpec::support_radius(const Bump& b) const {
    if (taper_order <= 0) return std::numeric_limits<double>::infinity();
    return taper_radius * b.width;
}

double SignalSpec::max_width() const {
    double w = 0.0;
    for (const auto& b : bumps) w = std::max(w, b.width);
    return w;
}

void SignalSpec::validate() const {
    const int d = dim();
    if (d < 1 || domain.hi.size() != d) throw Error(ErrorCode::model, "signal domain is malformed");
    for (int i = 0; i < d; ++i)
        if (!(domain.hi(i) > domain.lo(i))) throw Error(ErrorCode::model, "signal domain is empty");
    if (taper_order < 0 || (taper_order > 0 && taper_order < 3))
        throw Error(ErrorCode::model, "taper order must be 0 or >= 3");
    if (taper_order > 0 && !(taper_radius > 0.0))
        throw Error(ErrorCode::model, "taper radius must be positive");
    const double wmax = max_width();
    for (std::size_t a = 0; a < bumps.size(); ++a) {
        const Bump& b = bumps[a];
        if (b.center.size() != d) throw Error(ErrorCode::model, "bump center has wrong dimension");
        if (!(b.width > 0.0)) throw Error(ErrorCode::model, "bump width must be positive");
        if (!(b.amplitude > 0.0)) throw Error(ErrorCode::model, "bump amplitude must be positive");
        if (domain.distance_to_boundary(b.center) < 3.0 * b.width)
            throw Error(ErrorCode::model, "bump " + std::to_string(a) + " is within 3 widths of the boundary");
        for (std::size_t c = 0; c < a; ++c) {
            if ((b.center - bumps[c].center).norm() < 6.0 * wmax - 1e-12)
                throw Error(ErrorCode::model, "bumps " + std::to_string(c) + " and " + std::to_string(a) +
                                                  " are closer than 6 widths");
        }
    }
}

double signal_eval_unchecked(const SignalSpec& spec, const Vec& t) {
    double v = 0.0;
    for (const auto& b : spec.bumps) v += bump_profile(spec, b, (t - b.center).squaredNorm()).f0;
    return v;
}

double signal_eval(const SignalSpec& spec, const Vec& t) {
    check_point(spec, t);
    return signal_eval_unchecked(spec, t);
}

Vec signal_grad(const SignalSpec& spec, const Vec& t) {
    check_point(spec, t);
    Vec g = Vec::Zero(t.size());
    for (const auto& b : spec.bumps) {
        const Vec x = t - b.center;
        g += 2.0 * bump_profile(spec, b, x.squaredNorm()).f1 * x;
    }
    return g;
}

Mat signal_hess(const SignalSpec& spec, const Vec& t) {
    check_point(spec, t);
    const int d = spec.dim();
    Mat H = Mat::Zero(d, d);
    for (const auto& b : spec.bumps) {
        const Vec x = t - b.center;
        const Profile p = bump_profile(spec, b, x.squaredNorm());
        H += 2.0 * p.f1 * Mat::Identity(d, d) + 4.0 * p.f2 * x * x.transpose();
    }
    return H;
}

Tensor3 signal_third(const SignalSpec& spec, const Vec& t) {
    check_point(spec, t);
    const int d = spec.dim();
    Tensor3 T(d);
    for (const auto& b : spec.bumps) {
        const Vec x = t - b.center;
        const Profile p = bump_profile(spec, b, x.squaredNorm());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    const double sym = (i == j ? x(k) : 0.0) + (i == k ? x(j) : 0.0) + (j == k ? x(i) : 0.0);
                    T(i, j, k) += 4.0 * p.f2 * sym + 8.0 * p.f3 * x(i) * x(j) * x(k);
                }
    }
    return T;
}

std::vector<TruePeak> true_peaks(const SignalSpec& spec) {
    spec.validate();
    std::vector<TruePeak> out;
    out.reserve(spec.bumps.size());
    for (const auto& b : spec.bumps) {
        Vec t = b.center;
        for (int it = 0; it < 50; ++it) {
            const Vec g = signal_grad(spec, t);
            if (g.norm() <= 1e-13 * (1.0 + b.amplitude / (b.width * b.width))) break;
            const Mat H = signal_hess(spec, t);
            Eigen::LDLT<Mat> ldlt(H);
            const Vec step = ldlt.solve(g);
            if (!step.allFinite()) break;
            t -= step;
            if (step.norm() < 1e-15) break;
        }
        TruePeak p;
        p.location = t;
        p.height = signal_eval(spec, t);
        p.neg_hessian = -signal_hess(spec, t);
        p.neg_hessian = 0.5 * (p.neg_hessian + p.neg_hessian.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> es(p.neg_hessian, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        if (!(lmin > 0.0)) throw Error(ErrorCode::model, "signal Hessian at a bump center is not negative definite");
        if (signal_grad(spec, t).norm() > 1e-8) throw Error(ErrorCode::model, "Newton polish did not converge");
        p.delta = 1.0 / lmin;
        out.push_back(std::move(p));
    }
    return out;
}

CurvatureScales curvature_scales_scaled(const std::vector<TruePeak>& peaks, const DerivativeBundle& bundle,
                                        double scale, double eps_constant) {
    if (peaks.empty()) throw Error(ErrorCode::parameter, "curvature_scales needs at least one peak");
    if (!(eps_constant >= kMinEpsConstant))
        throw Error(ErrorCode::configuration, "eps_constant must exceed 4");
    if (!(scale > 0.0)) throw Error(ErrorCode::parameter, "scale must be positive");
    CurvatureScales c;
    c.eps_constant = eps_constant;
    for (const auto& p : peaks) c.delta_n = std::max(c.delta_n, p.delta * scale);
    c.lambda_n = 1.0 / c.delta_n;
    if (!(c.lambda_n > 1.0))
        throw Error(ErrorCode::curvature_too_low, "lambda_n <= 1: signal curvature too low for the asymptotic regime");
    const double lg = std::log(c.lambda_n);
    c.eps_n = c.delta_n * std::sqrt(eps_constant * bundle.sigma1_sq * lg);
    c.Delta_n = std::sqrt(eps_constant * lg);
    return c;
}

CurvatureScales curvature_scales(const std::vector<TruePeak>& peaks, const DerivativeBundle& bundle,
                                 double eps_constant) {
    return curvature_scales_scaled(peaks, bundle, 1.0, eps_constant);
}

}  // namespace peakinf
