#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "charlab/errors.hpp"
#include "charlab/polynomial.hpp"
#include "charlab/rng.hpp"
#include "charlab/space.hpp"

namespace charlab {

inline constexpr std::uint64_t kJointStreamTag = 0xffffffffffffffffull;

/// Gaussian law on R^d. Covariance is symmetrized on input and must be PSD up
/// to a -1e-12 eigenvalue slack (negative eigenvalues are clamped to zero, so
/// degenerate Gaussians are allowed).
class GaussianDist {
public:
    GaussianDist(Vector mean, Matrix cov) : mean_(std::move(mean)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean_.size())
            throw DimensionError("GaussianDist: mean/cov dimension mismatch");
        double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw Error("GaussianDist: covariance not symmetric");
        cov_ = 0.5 * (cov + cov.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(cov_);
        Vector ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
            throw Error("GaussianDist: covariance not positive semidefinite");
        transform_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    int dim() const { return static_cast<int>(mean_.size()); }
    const Vector& mean() const { return mean_; }
    const Matrix& cov() const { return cov_; }

    Complex log_cf(const DualVector& f) const {
        return Complex(-0.5 * f.dot(cov_ * f), mean_.dot(f));
    }

    Complex cf(const DualVector& f) const { return std::exp(log_cf(f)); }

    GaussianDist reflected() const { return {-mean_, cov_}; }
    GaussianDist symmetrized() const {
        return {Vector::Zero(dim()), Matrix(2.0 * cov_)};
    }

    QuadraticExponent exponent() const {
        return QuadraticExponent::gaussian(mean_, cov_);
    }

    Vector sample(SplitMix64& g) const {
        Vector z(dim());
        for (int i = 0; i < dim(); ++i) z(i) = g.next_gauss();
        return mean_ + transform_ * z;
    }

private:
    Vector mean_;
    Matrix cov_;
    Matrix transform_; // V * sqrt(clamped eigenvalues)
};

/// One-dimensional families with closed-form characteristic functions; used
/// both as building blocks for product marginals and as the non-Gaussian
/// counterexample generators.
struct ScalarFamily {
    enum class Kind { gaussian1d, uniform, laplace, exponential, mixture };

    Kind kind = Kind::gaussian1d;
    double p1 = 0, p2 = 1, p3 = 0, p4 = 1;

    static ScalarFamily gaussian1d(double mean, double sigma) {
        return {Kind::gaussian1d, mean, sigma, 0, 0};
    }
    static ScalarFamily uniform(double a, double b) {
        if (!(a < b)) throw Error("ScalarFamily::uniform: need a < b");
        return {Kind::uniform, a, b, 0, 0};
    }
    static ScalarFamily laplace(double scale) {
        return {Kind::laplace, scale, 0, 0, 0};
    }
    static ScalarFamily exponential(double rate) {
        if (rate <= 0) throw Error("ScalarFamily::exponential: need rate > 0");
        return {Kind::exponential, rate, 0, 0, 0};
    }
    /// Two-component Gaussian mixture w*N(m1, sigma^2) + (1-w)*N(m2, sigma^2).
    static ScalarFamily mixture(double w, double m1, double m2, double sigma) {
        if (w < 0 || w > 1) throw Error("ScalarFamily::mixture: need w in [0,1]");
        return {Kind::mixture, w, m1, m2, sigma};
    }

    Complex cf(double t) const {
        switch (kind) {
            case Kind::gaussian1d:
                return std::exp(Complex(-0.5 * p2 * p2 * t * t, p1 * t));
            case Kind::uniform: {
                double mid = 0.5 * (p1 + p2), half = 0.5 * (p2 - p1);
                double x = half * t;
                double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
                return std::exp(Complex(0, mid * t)) * sinc;
            }
            case Kind::laplace:
                return Complex(1.0 / (1.0 + p1 * p1 * t * t), 0);
            case Kind::exponential:
                return 1.0 / Complex(1.0, -t / p1);
            case Kind::mixture: {
                Complex gauss = std::exp(Complex(-0.5 * p4 * p4 * t * t, 0));
                return gauss * (p1 * std::exp(Complex(0, p2 * t)) +
                                (1.0 - p1) * std::exp(Complex(0, p3 * t)));
            }
        }
        return {1, 0};
    }

    /// True iff the characteristic function is real and nonnegative on all of
    /// R, in which case the symmetrization step of the theorem proofs is a
    /// no-op and drivers may skip it.
    bool nonneg_cf() const {
        switch (kind) {
            case Kind::gaussian1d: return p1 == 0.0;
            case Kind::laplace: return true;
            case Kind::mixture: return p2 == 0.0 && p3 == 0.0;
            default: return false;
        }
    }

    double sample(SplitMix64& g) const {
        switch (kind) {
            case Kind::gaussian1d: return p1 + p2 * g.next_gauss();
            case Kind::uniform: return g.next_uniform(p1, p2);
            case Kind::laplace: {
                double u = g.next_open() - 0.5;
                return -p1 * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
            }
            case Kind::exponential: return -std::log(g.next_open()) / p1;
            case Kind::mixture: {
                double m = g.next_unit() < p1 ? p2 : p3;
                return m + p4 * g.next_gauss();
            }
        }
        return 0;
    }
};

/// One component of a tuple: a Gaussian on R^d or a product of d independent
/// scalar families, optionally reflected and/or symmetrized.
class ComponentDist {
public:
    ComponentDist(GaussianDist g) : base_(std::move(g)) {} // NOLINT
    ComponentDist(ScalarFamily f) : base_(std::vector<ScalarFamily>{f}) {} // NOLINT
    explicit ComponentDist(std::vector<ScalarFamily> fs) : base_(std::move(fs)) {
        if (std::get<1>(base_).empty())
            throw DimensionError("ComponentDist: empty scalar product");
    }

    int dim() const {
        if (auto* g = std::get_if<GaussianDist>(&base_)) return g->dim();
        return static_cast<int>(std::get<1>(base_).size());
    }

    bool is_gaussian() const { return std::holds_alternative<GaussianDist>(base_); }
    const GaussianDist& gaussian() const { return std::get<GaussianDist>(base_); }
    const std::vector<ScalarFamily>& scalars() const { return std::get<1>(base_); }
    bool symmetrized() const { return symmetrized_; }
    bool reflected() const { return reflected_; }

    /// log cf with each scalar factor taken on its principal branch; Gaussians
    /// are evaluated analytically so no branch can wrap.
    Complex log_cf(const DualVector& f) const {
        if (f.size() != dim())
            throw DimensionError("ComponentDist::log_cf: dimension mismatch");
        Complex lam;
        if (auto* g = std::get_if<GaussianDist>(&base_)) {
            lam = g->log_cf(f);
        } else {
            lam = Complex(0, 0);
            const auto& fs = std::get<1>(base_);
            for (int i = 0; i < dim(); ++i) lam += std::log(fs[i].cf(f(i)));
        }
        if (symmetrized_) return Complex(2.0 * lam.real(), 0);
        return reflected_ ? std::conj(lam) : lam;
    }

    Complex cf(const DualVector& f) const {
        if (auto* g = std::get_if<GaussianDist>(&base_)) {
            Complex v = g->cf(f);
            if (symmetrized_) return Complex(std::norm(v), 0);
            return reflected_ ? std::conj(v) : v;
        }
        Complex v(1, 0);
        const auto& fs = std::get<1>(base_);
        for (int i = 0; i < dim(); ++i) v *= fs[i].cf(f(i));
        if (symmetrized_) return Complex(std::norm(v), 0);
        return reflected_ ? std::conj(v) : v;
    }

    bool nonneg_cf() const {
        if (symmetrized_) return true;
        if (auto* g = std::get_if<GaussianDist>(&base_))
            return g->mean().isZero(0.0);
        for (const auto& f : std::get<1>(base_))
            if (!f.nonneg_cf()) return false;
        return true;
    }

    /// mu-bar: distribution of -xi, cf is the complex conjugate.
    ComponentDist reflect() const {
        ComponentDist r = *this;
        if (auto* g = std::get_if<GaussianDist>(&r.base_)) {
            r.base_ = g->reflected();
        } else if (!r.symmetrized_) {
            r.reflected_ = !r.reflected_;
        }
        return r;
    }

    /// nu = mu * mu-bar: cf is |cf|^2; sampling draws xi - xi'.
    ComponentDist symmetrize() const {
        if (symmetrized_)
            throw UnsupportedError("ComponentDist: already symmetrized");
        ComponentDist r = *this;
        if (auto* g = std::get_if<GaussianDist>(&r.base_)) {
            r.base_ = g->symmetrized();
        } else {
            r.symmetrized_ = true;
        }
        return r;
    }

    Vector sample(SplitMix64& g) const {
        Vector v = base_sample(g);
        if (symmetrized_) v -= base_sample(g);
        if (reflected_) v = -v;
        return v;
    }

private:
    Vector base_sample(SplitMix64& g) const {
        if (auto* gd = std::get_if<GaussianDist>(&base_)) return gd->sample(g);
        const auto& fs = std::get<1>(base_);
        Vector v(dim());
        for (int i = 0; i < dim(); ++i) v(i) = fs[i].sample(g);
        return v;
    }

    std::variant<GaussianDist, std::vector<ScalarFamily>> base_;
    bool reflected_ = false;
    bool symmetrized_ = false;
};

/// N x (n*d) matrix of replicates; rows are replicates, component blocks are
/// contiguous column groups.
struct SampleMatrix {
    Eigen::MatrixXd data;
    int n = 0;
    int d = 0;
    std::uint64_t seed = 0;

    long rows() const { return static_cast<long>(data.rows()); }

    auto block(int j) const {
        return data.middleCols(static_cast<Eigen::Index>(j) * d, d);
    }

    void to_csv(std::ostream& os) const {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < d; ++i)
                os << (j || i ? "," : "") << "comp" << j + 1 << "_dim" << i + 1;
        os << "\n";
        for (long r = 0; r < rows(); ++r) {
            for (Eigen::Index c = 0; c < data.cols(); ++c) {
                if (c) os << ",";
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.17g", data(r, c));
                os << buf;
            }
            os << "\n";
        }
    }
};

struct CouplingBlock {
    int i = 0;
    int j = 1;
    Matrix sigma; // Cov(xi_i, xi_j), d x d
};

/// Tuple (xi_1, ..., xi_n) of components on R^d: independent, jointly Gaussian
/// with cross-covariance blocks, or a perfectly dependent duplicated scalar
/// component (the degenerate counterexample case).
class ProductDist {
public:
    enum class Coupling { none, gaussian, duplicate };

    explicit ProductDist(std::vector<ComponentDist> comps)
        : comps_(std::move(comps)) {
        if (comps_.empty()) throw DimensionError("ProductDist: no components");
        d_ = comps_[0].dim();
        for (auto& c : comps_)
            if (c.dim() != d_)
                throw DimensionError("ProductDist: components must share dimension");
    }

    static ProductDist coupled(std::vector<ComponentDist> comps,
                               std::vector<CouplingBlock> blocks) {
        ProductDist p(std::move(comps));
        p.mode_ = Coupling::gaussian;
        p.blocks_ = std::move(blocks);
        p.build_joint();
        return p;
    }

    static ProductDist duplicated(ComponentDist comp, int n) {
        if (n < 1) throw DimensionError("ProductDist::duplicated: n >= 1");
        ProductDist p(std::vector<ComponentDist>(static_cast<std::size_t>(n), comp));
        p.mode_ = Coupling::duplicate;
        return p;
    }

    static ProductDist iid(const ComponentDist& comp, int n) {
        ProductDist p(std::vector<ComponentDist>(static_cast<std::size_t>(n), comp));
        p.iid_ = true;
        return p;
    }

    int n() const { return static_cast<int>(comps_.size()); }
    int d() const { return d_; }
    int joint_dim() const { return n() * d_; }
    Coupling mode() const { return mode_; }
    bool is_iid() const { return iid_ || mode_ == Coupling::duplicate; }
    const ComponentDist& comp(int j) const { return comps_[j]; }
    const std::vector<CouplingBlock>& coupling() const { return blocks_; }

    Complex joint_log_cf(const DualVector& F) const {
        if (F.size() != joint_dim())
            throw DimensionError("ProductDist::joint_log_cf: dimension mismatch");
        switch (mode_) {
            case Coupling::gaussian:
                return Complex(-0.5 * F.dot(joint_cov_ * F), joint_mean_.dot(F));
            case Coupling::duplicate: {
                DualVector s = DualVector::Zero(d_);
                for (int j = 0; j < n(); ++j) s += F.segment(j * d_, d_);
                return comps_[0].log_cf(s);
            }
            case Coupling::none: {
                Complex acc(0, 0);
                for (int j = 0; j < n(); ++j)
                    acc += comps_[j].log_cf(F.segment(j * d_, d_));
                return acc;
            }
        }
        return {0, 0};
    }

    Complex joint_cf(const DualVector& F) const {
        if (mode_ == Coupling::none) {
            // the joint cf factors exactly into the product of marginal cfs
            Complex v(1, 0);
            for (int j = 0; j < n(); ++j) v *= comps_[j].cf(F.segment(j * d_, d_));
            return v;
        }
        return std::exp(joint_log_cf(F));
    }

    /// The explicit Q-independence witness of the coupled-Gaussian tuple:
    /// q(f_1, ..., f_n) = -sum_{i<j} <Sigma_ij f_j, f_i>, so that
    /// joint cf = (prod marginal cfs) * exp(q). Degree 2, q(0) = 0.
    PolyC coupled_q() const {
        if (mode_ != Coupling::gaussian)
            throw UnsupportedError("coupled_gaussian_q: tuple is not jointly "
                                   "Gaussian with coupling blocks");
        BlockShape shape = tuple_shape();
        PolyC q(shape);
        for (const auto& b : blocks_) {
            for (int r = 0; r < d_; ++r) {
                for (int c = 0; c < d_; ++c) {
                    if (b.sigma(r, c) == 0.0) continue;
                    Monomial m(shape.total(), 0);
                    m[shape.var(b.i, r)] = static_cast<std::uint8_t>(m[shape.var(b.i, r)] + 1);
                    m[shape.var(b.j, c)] = static_cast<std::uint8_t>(m[shape.var(b.j, c)] + 1);
                    q.add_term(m, Complex(-b.sigma(r, c), 0));
                }
            }
        }
        return q;
    }

    BlockShape tuple_shape() const {
        std::vector<std::pair<std::string, int>> bs;
        for (int j = 0; j < n(); ++j)
            bs.emplace_back("f" + std::to_string(j + 1), d_);
        return BlockShape(bs);
    }

    ProductDist symmetrized() const {
        ProductDist p = *this;
        for (auto& c : p.comps_) c = c.symmetrize();
        if (mode_ == Coupling::gaussian) {
            for (auto& b : p.blocks_) b.sigma *= 2.0;
            p.build_joint();
        }
        return p;
    }

    ProductDist reflected() const {
        ProductDist p = *this;
        for (auto& c : p.comps_) c = c.reflect();
        if (mode_ == Coupling::gaussian) p.build_joint();
        return p;
    }

    bool nonneg_cf() const {
        for (const auto& c : comps_)
            if (!c.nonneg_cf()) return false;
        return true;
    }

    using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

    /// Deterministic given (this, seed); every replicate draws from its own
    /// derived stream, so any partition of rows samples identically.
    void sample_row(std::uint64_t seed, long r, RowRef row) const {
        switch (mode_) {
            case Coupling::gaussian: {
                auto g = derive_stream(seed, kJointStreamTag, static_cast<std::uint64_t>(r));
                Vector z(joint_dim());
                for (int i = 0; i < joint_dim(); ++i) z(i) = g.next_gauss();
                row = (joint_mean_ + joint_transform_ * z).transpose();
                break;
            }
            case Coupling::duplicate: {
                auto g = derive_stream(seed, 0, static_cast<std::uint64_t>(r));
                Vector v = comps_[0].sample(g);
                for (int j = 0; j < n(); ++j) row.segment(j * d_, d_) = v.transpose();
                break;
            }
            case Coupling::none: {
                for (int j = 0; j < n(); ++j) {
                    auto g = derive_stream(seed, static_cast<std::uint64_t>(j),
                                           static_cast<std::uint64_t>(r));
                    row.segment(j * d_, d_) = comps_[j].sample(g).transpose();
                }
                break;
            }
        }
    }

    SampleMatrix sample(long N, std::uint64_t seed) const {
        if (N < 1) throw Error("ProductDist::sample: need N >= 1");
        SampleMatrix s;
        s.n = n();
        s.d = d_;
        s.seed = seed;
        s.data.resize(N, joint_dim());
        for (long r = 0; r < N; ++r) sample_row(seed, r, s.data.row(r));
        return s;
    }

private:
    void build_joint() {
        joint_mean_ = Vector::Zero(joint_dim());
        joint_cov_ = Matrix::Zero(joint_dim(), joint_dim());
        for (int j = 0; j < n(); ++j) {
            if (!comps_[j].is_gaussian())
                throw UnsupportedError(
                    "ProductDist: coupling blocks require Gaussian components");
            const auto& g = comps_[j].gaussian();
            joint_mean_.segment(j * d_, d_) = g.mean();
            joint_cov_.block(j * d_, j * d_, d_, d_) = g.cov();
        }
        for (const auto& b : blocks_) {
            if (b.i < 0 || b.j < 0 || b.i >= n() || b.j >= n() || b.i == b.j)
                throw DimensionError("ProductDist: bad coupling block indices");
            if (b.sigma.rows() != d_ || b.sigma.cols() != d_)
                throw DimensionError("ProductDist: coupling block must be d x d");
            joint_cov_.block(b.i * d_, b.j * d_, d_, d_) = b.sigma;
            joint_cov_.block(b.j * d_, b.i * d_, d_, d_) = b.sigma.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(joint_cov_);
        Vector ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
            throw Error("ProductDist: block covariance not positive semidefinite");
        joint_transform_ =
            es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    std::vector<ComponentDist> comps_;
    std::vector<CouplingBlock> blocks_;
    Coupling mode_ = Coupling::none;
    bool iid_ = false;
    int d_ = 0;
    Vector joint_mean_;
    Matrix joint_cov_;
    Matrix joint_transform_;
};

} // namespace charlab
