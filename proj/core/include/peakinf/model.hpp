#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace peakinf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dense d x d x d array, used for K21, Gamma and third derivatives of mu.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int d) : d_(d), data_(static_cast<std::size_t>(d) * d * d, 0.0) {}

    [[nodiscard]] int dim() const noexcept { return d_; }
    double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    [[nodiscard]] double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

    // T(h)_{ij} = sum_k T_{ijk} h_k
    [[nodiscard]] Mat contract(const Vec& h) const;
    // T(h,h)_i = sum_{jk} T_{ijk} h_j h_k
    [[nodiscard]] Vec contract2(const Vec& h) const;
    [[nodiscard]] double max_abs() const;

private:
    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * d_ + j) * d_ + k;
    }
    int d_ = 0;
    std::vector<double> data_;
};

enum class KernelFamily { squared_exponential };

struct KernelSpec {
    KernelFamily family = KernelFamily::squared_exponential;
    double length_scale = 0.15;
    int dimension = 2;

    void validate() const;
};

[[nodiscard]] double kernel_eval(const KernelSpec& spec, const Vec& s, const Vec& t);

struct DerivativeBundle {
    Mat lambda;
    Tensor3 k21;
    Tensor3 gamma;
    double sigma1_sq = 0.0;
};

[[nodiscard]] DerivativeBundle derivative_bundle(const KernelSpec& spec);

struct Box {
    Vec lo;
    Vec hi;

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(lo.size()); }
    [[nodiscard]] bool contains(const Vec& t) const;
    [[nodiscard]] double volume() const;
    [[nodiscard]] double distance_to_boundary(const Vec& t) const;
};

struct Bump {
    Vec center;
    double amplitude = 0.0;
    double width = 0.15;
};

// Mean function: a superposition of Gaussian bumps. With a taper order k > 0
// each bump is multiplied by (1 - s/R^2)^k on s < R^2, R = taper_radius*width,
// which gives the signal compact support and so a genuine null region.
struct SignalSpec {
    std::vector<Bump> bumps;
    Box domain;
    int taper_order = 0;
    double taper_radius = 3.0;

    // Throws ErrorCode::model on margin, separation or shape violations.
    void validate() const;
    [[nodiscard]] int dim() const noexcept { return domain.dim(); }
    [[nodiscard]] double support_radius(const Bump& b) const;  // +inf when untapered
    [[nodiscard]] double max_width() const;
};

[[nodiscard]] double signal_eval(const SignalSpec& spec, const Vec& t);
[[nodiscard]] Vec signal_grad(const SignalSpec& spec, const Vec& t);
[[nodiscard]] Mat signal_hess(const SignalSpec& spec, const Vec& t);
[[nodiscard]] Tensor3 signal_third(const SignalSpec& spec, const Vec& t);

// Same as signal_eval without the domain check; used on lattices that the
// caller already validated.
[[nodiscard]] double signal_eval_unchecked(const SignalSpec& spec, const Vec& t);

struct TruePeak {
    Vec location;
    double height = 0.0;
    Mat neg_hessian;
    double delta = 0.0;
};

[[nodiscard]] std::vector<TruePeak> true_peaks(const SignalSpec& spec);

struct CurvatureScales {
    double delta_n = 0.0;
    double lambda_n = 0.0;
    double eps_n = 0.0;
    double Delta_n = 0.0;
    double eps_constant = 6.0;
};

inline constexpr double kMinEpsConstant = 4.0 + 1e-6;

[[nodiscard]] CurvatureScales curvature_scales(const std::vector<TruePeak>& peaks,
                                               const DerivativeBundle& bundle,
                                               double eps_constant = 6.0);

// Scales for the field Y/scale (signal divided by scale, same kernel).
[[nodiscard]] CurvatureScales curvature_scales_scaled(const std::vector<TruePeak>& peaks,
                                                      const DerivativeBundle& bundle,
                                                      double scale, double eps_constant = 6.0);

}  // namespace peakinf
