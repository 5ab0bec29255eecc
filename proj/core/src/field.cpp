#include "peakinf/field.hpp"

#include <random>
#include <string>

#include "peakinf/errors.hpp"

namespace peakinf {

Grid::Grid(Box box, std::vector<int> counts) : box_(std::move(box)), counts_(std::move(counts)) {
    const int d = static_cast<int>(counts_.size());
    if (d < 1 || box_.dim() != d || box_.hi.size() != d)
        throw Error(ErrorCode::configuration, "grid counts and box dimension disagree");
    spacing_ = Vec::Zero(d);
    strides_.assign(d, 1);
    size_ = 1;
    for (int a = d - 1; a >= 0; --a) {
        if (counts_[a] < 1) throw Error(ErrorCode::configuration, "grid counts must be positive");
        if (!(box_.hi(a) >= box_.lo(a))) throw Error(ErrorCode::configuration, "grid box is inverted");
        spacing_(a) = counts_[a] > 1 ? (box_.hi(a) - box_.lo(a)) / (counts_[a] - 1) : 0.0;
        strides_[a] = size_;
        size_ *= static_cast<std::size_t>(counts_[a]);
    }
}

std::vector<int> Grid::multi_index(std::size_t flat) const {
    std::vector<int> m(counts_.size());
    for (int a = 0; a < dim(); ++a) {
        m[a] = static_cast<int>(flat / strides_[a]);
        flat %= strides_[a];
    }
    return m;
}

std::size_t Grid::flat_index(const std::vector<int>& multi) const {
    std::size_t f = 0;
    for (int a = 0; a < dim(); ++a) f += strides_[a] * static_cast<std::size_t>(multi[a]);
    return f;
}

Vec Grid::point(std::size_t flat) const {
    Vec p(dim());
    for (int a = 0; a < dim(); ++a) {
        p(a) = coordinate(a, static_cast<int>(flat / strides_[a]));
        flat %= strides_[a];
    }
    return p;
}

void Grid::check_spacing(const KernelSpec& kernel, double ratio) const {
    for (int a = 0; a < dim(); ++a)
        if (spacing_(a) > kernel.length_scale / ratio * (1.0 + 1e-12))
            throw Error(ErrorCode::configuration, "grid spacing " + std::to_string(spacing_(a)) +
                                                      " exceeds length_scale/" + std::to_string(ratio));
}

bool Grid::operator==(const Grid& o) const {
    return counts_ == o.counts_ && box_.lo == o.box_.lo && box_.hi == o.box_.hi;
}

CovarianceFactor::CovarianceFactor(KernelSpec kernel, std::shared_ptr<const Grid> grid, Mat lower, double jitter)
    : kernel_(kernel), grid_(std::move(grid)), lower_(std::move(lower)), jitter_(jitter) {}

Vec CovarianceFactor::correlate(const Vec& z) const {
    if (z.size() != lower_.rows()) throw Error(ErrorCode::parameter, "noise vector has wrong length");
    return lower_.triangularView<Eigen::Lower>() * z;
}

Vec CovarianceFactor::draw(const NoiseKey& key) const {
    Philox4x32 gen(key.seed, key.stream, key.replicate, key.cell);
    std::normal_distribution<double> normal;
    Vec z(lower_.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(gen);
    return correlate(z);
}

Mat covariance_matrix(const KernelSpec& kernel, const Grid& grid) {
    kernel.validate();
    if (grid.dim() != kernel.dimension) throw Error(ErrorCode::configuration, "grid and kernel dimension differ");
    const auto n = static_cast<Eigen::Index>(grid.size());
    std::vector<Vec> pts;
    pts.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) pts.push_back(grid.point(i));
    const double c = -0.5 / (kernel.length_scale * kernel.length_scale);
    Mat K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = std::exp(c * (pts[i] - pts[j]).squaredNorm());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

CovarianceFactor covariance_factor(const KernelSpec& kernel, std::shared_ptr<const Grid> grid, std::size_t cap) {
    if (!grid) throw Error(ErrorCode::configuration, "null grid");
    if (grid->size() > cap)
        throw Error(ErrorCode::configuration,
                    "grid has " + std::to_string(grid->size()) + " points, above the cap " + std::to_string(cap));
    const Mat K = covariance_matrix(kernel, *grid);
    const Mat I = Mat::Identity(K.rows(), K.cols());
    for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::LLT<Mat> llt(K + jitter * I);
        if (llt.info() == Eigen::Success) {
            Mat L = llt.matrixL();
            return CovarianceFactor(kernel, std::move(grid), std::move(L), jitter);
        }
    }
    throw Error(ErrorCode::ill_conditioned_kernel, "Cholesky factorization failed at the maximum jitter 1e-6");
}

Vec signal_on_grid(const SignalSpec& signal, const Grid& grid) {
    if (signal.dim() != grid.dim()) throw Error(ErrorCode::configuration, "signal and grid dimension differ");
    Vec mu(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) mu(static_cast<Eigen::Index>(i)) = signal_eval_unchecked(signal, grid.point(i));
    return mu;
}

namespace {

FieldSample assemble(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal, Vec noise,
                     const NoiseKey& key) {
    if (!signal) throw Error(ErrorCode::configuration, "null signal");
    FieldSample s;
    s.grid = factor.grid_ptr();
    s.mean = signal_on_grid(*signal, *s.grid);
    s.values = s.mean + noise;
    s.noise_key = key;
    s.signal = std::move(signal);
    return s;
}

}  // namespace

FieldSample sample_field(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                         const NoiseKey& key) {
    return assemble(factor, std::move(signal), factor.draw(key), key);
}

FieldSample sample_field(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                         std::uint64_t seed) {
    return sample_field(factor, std::move(signal), NoiseKey{seed, 0, kNoiseStream, 0});
}

FieldSample field_from_noise(const CovarianceFactor& factor, std::shared_ptr<const SignalSpec> signal,
                             const Vec& noise) {
    if (noise.size() != static_cast<Eigen::Index>(factor.grid().size()))
        throw Error(ErrorCode::parameter, "noise vector has wrong length");
    return assemble(factor, std::move(signal), noise, NoiseKey{});
}

RandomizationSplit randomize_with_omega(const FieldSample& sample, double gamma, const Vec& omega) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::parameter, "gamma must be positive");
    if (omega.size() != sample.values.size()) throw Error(ErrorCode::parameter, "omega has wrong length");
    RandomizationSplit r;
    r.gamma = gamma;
    const double sg = std::sqrt(gamma);
    r.sel_values = sample.values + sg * omega;
    r.inf_values = sample.values - omega / sg;
    return r;
}

RandomizationSplit randomize(const FieldSample& sample, const CovarianceFactor& factor, double gamma,
                             const NoiseKey& omega_key) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::parameter, "gamma must be positive");
    if (omega_key.stream == sample.noise_key.stream && omega_key.seed == sample.noise_key.seed &&
        omega_key.replicate == sample.noise_key.replicate && omega_key.cell == sample.noise_key.cell)
        throw Error(ErrorCode::parameter, "omega stream must differ from the noise stream");
    RandomizationSplit r = randomize_with_omega(sample, gamma, factor.draw(omega_key));
    r.omega_key = omega_key;
    return r;
}

}  // namespace peakinf
