#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "charlab/distributions.hpp"
#include "charlab/errors.hpp"
#include "charlab/rng.hpp"
#include "charlab/space.hpp"

namespace charlab {

// ---------------------------------------------------------------------------
// Vectorizable sincos for the empirical characteristic-function hot path.
// Argument reduction to [-pi, pi] plus Taylor-Horner; absolute error < 1e-9,
// far below the Monte-Carlo noise it feeds. No libm calls in the loop so the
// compiler can vectorize.
// ---------------------------------------------------------------------------
inline void fast_sincos(const double* phi, long n, double* cs, double* sn) {
    constexpr double kTwoPi = 6.283185307179586476925287;
    constexpr double kInvTwoPi = 0.159154943091895335768884;
    for (long i = 0; i < n; ++i) {
        double x = phi[i];
        x -= kTwoPi * __builtin_nearbyint(x * kInvTwoPi);
        double x2 = x * x;
        double s = -1.0 / 121645100408832000.0; // -1/19!
        s = s * x2 + 1.0 / 355687428096000.0;
        s = s * x2 - 1.0 / 1307674368000.0;
        s = s * x2 + 1.0 / 6227020800.0;
        s = s * x2 - 1.0 / 39916800.0;
        s = s * x2 + 1.0 / 362880.0;
        s = s * x2 - 1.0 / 5040.0;
        s = s * x2 + 1.0 / 120.0;
        s = s * x2 - 1.0 / 6.0;
        sn[i] = x * (1.0 + x2 * s);
        double c = 1.0 / 2432902008176640000.0; // 1/20!
        c = c * x2 - 1.0 / 6402373705728000.0;
        c = c * x2 + 1.0 / 20922789888000.0;
        c = c * x2 - 1.0 / 87178291200.0;
        c = c * x2 + 1.0 / 479001600.0;
        c = c * x2 - 1.0 / 3628800.0;
        c = c * x2 + 1.0 / 40320.0;
        c = c * x2 - 1.0 / 720.0;
        c = c * x2 + 1.0 / 24.0;
        c = c * x2 - 1.0 / 2.0;
        cs[i] = 1.0 + x2 * c;
    }
}

// ---------------------------------------------------------------------------
// Selectors and log-cf linear combinations
// ---------------------------------------------------------------------------

/// Which characteristic functional a stencil point refers to.
struct Selector {
    enum class Kind { component, joint, pooled };
    Kind kind = Kind::component;
    int index = 0;

    static Selector component(int j) { return {Kind::component, j}; }
    static Selector joint() { return {Kind::joint, 0}; }
    static Selector pooled() { return {Kind::pooled, 0}; }
};

/// One chain of a combination: sum_k kweights[k] * log cf_sel(base + k*step).
struct CombTerm {
    Selector sel;
    Eigen::VectorXd base;
    Eigen::VectorXd step; // size 0 means no stepping (kweights must have size 1)
    std::vector<double> kweights;
};

struct EvalStat {
    Complex value{0, 0};
    double se = 0;
    bool valid = false;
    double min_cf_mod = std::numeric_limits<double>::infinity();
    std::string why;
};

inline std::string point_str(const Eigen::VectorXd& p) {
    std::ostringstream os;
    os << "(";
    for (Eigen::Index i = 0; i < p.size(); ++i)
        os << (i ? ", " : "") << p(i);
    os << ")";
    return os.str();
}

/// Evaluator of linear combinations of log characteristic functionals, either
/// from closed forms (se = 0) or from a sample matrix with an influence-based
/// standard error that accounts for correlation across stencil points.
class CfEngine {
public:
    virtual ~CfEngine() = default;
    virtual bool exact() const = 0;
    virtual int dim(const Selector& sel) const = 0;
    virtual EvalStat eval_comb(const std::vector<CombTerm>& terms, double floor,
                               double radius_cap) const = 0;

    /// Single-point log cf.
    EvalStat eval_log(const Selector& sel, const Eigen::VectorXd& f, double floor,
                      double radius_cap) const {
        CombTerm t{sel, f, Eigen::VectorXd(), {1.0}};
        return eval_comb({t}, floor, radius_cap);
    }
};

class ExactEngine : public CfEngine {
public:
    explicit ExactEngine(const ProductDist& dist) : dist_(&dist) {}

    bool exact() const override { return true; }

    int dim(const Selector& sel) const override {
        switch (sel.kind) {
            case Selector::Kind::joint: return dist_->joint_dim();
            default: return dist_->d();
        }
    }

    Complex log_cf_at(const Selector& sel, const Eigen::VectorXd& y) const {
        switch (sel.kind) {
            case Selector::Kind::component: return dist_->comp(sel.index).log_cf(y);
            case Selector::Kind::joint: return dist_->joint_log_cf(y);
            case Selector::Kind::pooled:
                if (!dist_->is_iid())
                    throw PreconditionError("pooled cf requires identically "
                                            "distributed components");
                return dist_->comp(0).log_cf(y);
        }
        return {0, 0};
    }

    EvalStat eval_comb(const std::vector<CombTerm>& terms, double floor,
                       double radius_cap) const override {
        EvalStat out;
        for (const auto& t : terms) {
            long K = static_cast<long>(t.kweights.size());
            for (long k = 0; k < K; ++k) {
                Eigen::VectorXd y = t.base;
                if (t.step.size()) y += static_cast<double>(k) * t.step;
                if (y.norm() > radius_cap + 1e-12) {
                    out.valid = false;
                    out.why = "outside grid radius at " + point_str(y);
                    return out;
                }
                Complex lam = log_cf_at(t.sel, y);
                double mod = std::exp(lam.real());
                out.min_cf_mod = std::min(out.min_cf_mod, mod);
                if (mod < floor) {
                    out.valid = false;
                    out.why = "cf modulus " + std::to_string(mod) +
                              " below floor at " + point_str(y);
                    return out;
                }
                out.value += t.kweights[k] * lam;
            }
        }
        out.valid = true;
        return out;
    }

private:
    const ProductDist* dist_;
};

class EmpiricalEngine : public CfEngine {
public:
    explicit EmpiricalEngine(const SampleMatrix& samples, long influence_cap = 20000)
        : s_(&samples), cap_(influence_cap) {
        if (s_->rows() < 1) throw Error("EmpiricalEngine: empty sample");
    }

    bool exact() const override { return false; }

    int dim(const Selector& sel) const override {
        return sel.kind == Selector::Kind::joint ? s_->n * s_->d : s_->d;
    }

    /// Empirical cf with a standard error (sample std of the summands / sqrt N,
    /// real and imaginary parts combined in quadrature). `pre` realizes
    /// xi'_j = A xi_j by evaluating at A* f.
    std::pair<Complex, double> ecf(const Selector& sel, const Eigen::VectorXd& f,
                                   const LinearOp* pre = nullptr) const {
        Eigen::VectorXd arg = pre ? Eigen::VectorXd(pre->matrix().transpose() * f)
                                  : f;
        Eigen::ArrayXd phi = phases(sel, arg);
        long R = phi.size();
        Eigen::ArrayXd c(R), s(R);
        fast_sincos(phi.data(), R, c.data(), s.data());
        Complex mean(c.mean(), s.mean());
        double se = 0;
        if (R > 1) {
            double vr = (c - mean.real()).square().sum() / static_cast<double>(R - 1);
            double vi = (s - mean.imag()).square().sum() / static_cast<double>(R - 1);
            se = std::sqrt((vr + vi) / static_cast<double>(R));
        }
        return {mean, se};
    }

    EvalStat eval_comb(const std::vector<CombTerm>& terms, double floor,
                       double radius_cap) const override {
        EvalStat out;
        bool pooled = !terms.empty() && terms[0].sel.kind == Selector::Kind::pooled;
        for (const auto& t : terms)
            if ((t.sel.kind == Selector::Kind::pooled) != pooled)
                throw Error("eval_comb: cannot mix pooled and row-aligned selectors");

        long R = pooled ? s_->rows() * s_->n : s_->rows();
        long M = std::min<long>(cap_, R);
        Eigen::ArrayXcd infl = Eigen::ArrayXcd::Zero(M);

        for (const auto& t : terms) {
            long K = static_cast<long>(t.kweights.size());
            for (long k = 0; k < K; ++k) { // radius pre-check, no data pass
                Eigen::VectorXd y = t.base;
                if (t.step.size()) y += static_cast<double>(k) * t.step;
                if (y.norm() > radius_cap + 1e-12) {
                    out.valid = false;
                    out.why = "outside grid radius at " + point_str(y);
                    return out;
                }
            }
            Eigen::ArrayXd phib = phases(t.sel, t.base);
            Eigen::ArrayXcd cur(R);
            {
                Eigen::ArrayXd c(R), s(R);
                fast_sincos(phib.data(), R, c.data(), s.data());
                cur.real() = c;
                cur.imag() = s;
            }
            Eigen::ArrayXcd w;
            bool stepping = t.step.size() && t.step.norm() > 0 && K > 1;
            if (stepping) {
                Eigen::ArrayXd phis = phases(t.sel, t.step);
                Eigen::ArrayXd c(R), s(R);
                fast_sincos(phis.data(), R, c.data(), s.data());
                w.resize(R);
                w.real() = c;
                w.imag() = s;
            }
            for (long k = 0; k < K; ++k) {
                Complex mean = cur.mean();
                double mod = std::abs(mean);
                out.min_cf_mod = std::min(out.min_cf_mod, mod);
                if (mod < floor) {
                    Eigen::VectorXd y = t.base;
                    if (t.step.size()) y += static_cast<double>(k) * t.step;
                    out.valid = false;
                    out.why = "cf modulus " + std::to_string(mod) +
                              " below floor at " + point_str(y);
                    return out;
                }
                out.value += t.kweights[k] * std::log(mean);
                infl += (t.kweights[k] / mean) * cur.head(M);
                if (k + 1 < K && stepping) cur *= w;
            }
        }

        if (M > 1) {
            Complex mu = infl.mean();
            double vr = (infl.real() - mu.real()).square().sum() /
                        static_cast<double>(M - 1);
            double vi = (infl.imag() - mu.imag()).square().sum() /
                        static_cast<double>(M - 1);
            out.se = std::sqrt((vr + vi) / static_cast<double>(R));
        }
        out.valid = true;
        return out;
    }

private:
    Eigen::ArrayXd phases(const Selector& sel, const Eigen::VectorXd& y) const {
        switch (sel.kind) {
            case Selector::Kind::component: {
                if (y.size() != s_->d)
                    throw DimensionError("EmpiricalEngine: argument dim mismatch");
                return (s_->block(sel.index) * y).array();
            }
            case Selector::Kind::joint: {
                if (y.size() != s_->n * s_->d)
                    throw DimensionError("EmpiricalEngine: joint argument dim mismatch");
                return (s_->data * y).array();
            }
            case Selector::Kind::pooled: {
                if (y.size() != s_->d)
                    throw DimensionError("EmpiricalEngine: argument dim mismatch");
                Eigen::ArrayXd phi(s_->rows() * s_->n);
                for (int b = 0; b < s_->n; ++b)
                    phi.segment(static_cast<long>(b) * s_->rows(), s_->rows()) =
                        (s_->block(b) * y).array();
                return phi;
            }
        }
        return {};
    }

    const SampleMatrix* s_;
    long cap_;
};

// ---------------------------------------------------------------------------
// Star grids and the branch-continuous log-cf field
// ---------------------------------------------------------------------------

struct StarGrid {
    std::vector<Eigen::VectorXd> rays; // unit directions
    std::vector<double> radii;         // increasing, excludes 0

    static StarGrid make(int dim, int n_rays, int n_radii, double radius,
                         std::uint64_t seed) {
        if (dim < 1 || n_rays < 1 || n_radii < 1 || radius <= 0)
            throw Error("StarGrid: bad parameters");
        StarGrid g;
        auto rng = derive_stream(seed, 0x57a9);
        for (int r = 0; r < n_rays; ++r) {
            Eigen::VectorXd u(dim);
            if (dim == 1) {
                u(0) = r % 2 == 0 ? 1.0 : -1.0;
            } else {
                do {
                    for (int i = 0; i < dim; ++i) u(i) = rng.next_gauss();
                } while (u.norm() < 1e-12);
                u.normalize();
            }
            g.rays.push_back(u);
        }
        for (int k = 1; k <= n_radii; ++k)
            g.radii.push_back(radius * k / n_radii);
        return g;
    }
};

struct RayField {
    Eigen::VectorXd u;
    std::vector<double> t;       // retained radii
    std::vector<Complex> psi;    // psi = -log cf, branch-continuous along the ray
    std::vector<double> se;
    double truncated_radius = std::numeric_limits<double>::infinity();
    bool branch_ok = true;
};

struct LogCfField {
    std::vector<RayField> rays;
    bool branch_ok = true;
};

/// psi = -log cf on a star grid, with the argument unwrapped by continuity
/// along each ray outward from 0 (psi(0) = 0). Points where |cf| < floor are
/// excluded; each ray records its truncation radius.
inline LogCfField log_cf_field(const CfEngine& eng, const Selector& sel,
                               const StarGrid& grid, double floor) {
    if (floor <= 0 || floor >= 1) throw Error("log_cf_field: floor must be in (0,1)");
    LogCfField field;
    double cap = grid.radii.back() * 1.000001;
    for (const auto& u : grid.rays) {
        RayField ray;
        ray.u = u;
        double prev_im = 0.0; // Im of log cf continues from 0 at the origin
        for (double t : grid.radii) {
            EvalStat ev = eng.eval_log(sel, Eigen::VectorXd(t * u), floor, cap);
            if (!ev.valid) {
                ray.truncated_radius = t;
                break;
            }
            Complex lam = ev.value;
            double im = lam.imag() +
                        6.283185307179586 *
                            std::round((prev_im - lam.imag()) / 6.283185307179586);
            if (std::abs(im - prev_im) >= 3.141592653589793) ray.branch_ok = false;
            prev_im = im;
            ray.t.push_back(t);
            ray.psi.push_back(-Complex(lam.real(), im));
            ray.se.push_back(ev.se);
        }
        field.branch_ok = field.branch_ok && ray.branch_ok;
        field.rays.push_back(std::move(ray));
    }
    return field;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline std::vector<double> binomial_signs(int order) {
    // (-1)^(order-k) * C(order, k), k = 0..order
    std::vector<double> w(order + 1);
    double c = 1;
    for (int k = 0; k <= order; ++k) {
        w[k] = ((order - k) % 2 ? -1.0 : 1.0) * c;
        c = c * (order - k) / (k + 1);
    }
    return w;
}

/// Delta_h^order psi(f) for an arbitrary callable psi (complex-valued).
/// Mixed shifts over multi-block arguments are the same call with f and h
/// being the concatenated tuples.
template <class F>
Complex finite_difference(F&& psi, const Eigen::VectorXd& f,
                          const Eigen::VectorXd& h, int order) {
    if (order < 0) throw Error("finite_difference: order must be >= 0");
    auto w = binomial_signs(order);
    Complex acc(0, 0);
    for (int k = 0; k <= order; ++k)
        acc += w[k] * psi(Eigen::VectorXd(f + static_cast<double>(k) * h));
    return acc;
}

/// Engine-backed Delta_h^order of psi = -log cf; throws DomainError when the
/// stencil leaves the valid domain, naming the offending point.
inline EvalStat delta_log_cf(const CfEngine& eng, const Selector& sel,
                             const Eigen::VectorXd& f, const Eigen::VectorXd& h,
                             int order, double floor, double radius_cap) {
    auto w = binomial_signs(order);
    for (auto& x : w) x = -x; // psi = -log cf
    CombTerm t{sel, f, h, w};
    EvalStat ev = eng.eval_comb({t}, floor, radius_cap);
    if (!ev.valid) throw DomainError("finite difference stencil " + ev.why);
    return ev;
}

// ---------------------------------------------------------------------------
// Polynomial-degree certification
// ---------------------------------------------------------------------------

/// A complex field over R^dim probed through finite-difference stencils with
/// a propagated standard error.
class ProbeField {
public:
    virtual ~ProbeField() = default;
    virtual int dim() const = 0;
    virtual EvalStat eval_delta(const Eigen::VectorXd& base,
                                const Eigen::VectorXd& h, int order) const = 0;
    EvalStat eval(const Eigen::VectorXd& p) const {
        return eval_delta(p, Eigen::VectorXd::Zero(dim()), 0);
    }
};

/// Field of the form F(p) = sum_t weight_t * log cf_sel_t(L_t p); all residual
/// equations and directional log-cf restrictions have this shape, so their
/// finite differences become single engine combinations.
class CfFunctionalField : public ProbeField {
public:
    struct Term {
        Selector sel;
        Eigen::MatrixXd L; // argument = L * point
        double weight = 1.0;
    };

    CfFunctionalField(const CfEngine& eng, std::vector<Term> terms, int dim,
                      double floor, double radius_cap)
        : eng_(&eng), terms_(std::move(terms)), dim_(dim), floor_(floor),
          cap_(radius_cap) {
        for (auto& t : terms_)
            if (t.L.cols() != dim_)
                throw DimensionError("CfFunctionalField: term map has wrong width");
    }

    int dim() const override { return dim_; }
    double floor() const { return floor_; }
    double radius_cap() const { return cap_; }
    const CfEngine& engine() const { return *eng_; }

    EvalStat eval_delta(const Eigen::VectorXd& base, const Eigen::VectorXd& h,
                        int order) const override {
        auto signs = binomial_signs(order);
        std::vector<CombTerm> combs;
        combs.reserve(terms_.size());
        for (const auto& t : terms_) {
            CombTerm c;
            c.sel = t.sel;
            c.base = t.L * base;
            c.step = t.L * h;
            c.kweights = signs;
            for (auto& x : c.kweights) x *= t.weight;
            combs.push_back(std::move(c));
        }
        return eng_->eval_comb(combs, floor_, cap_);
    }

private:
    const CfEngine* eng_;
    std::vector<Term> terms_;
    int dim_;
    double floor_;
    double cap_;
};

/// Exact callable field (exact polynomial oracles in tests).
class CallableField : public ProbeField {
public:
    CallableField(std::function<Complex(const Eigen::VectorXd&)> f, int dim,
                  double radius_cap)
        : f_(std::move(f)), dim_(dim), cap_(radius_cap) {}

    int dim() const override { return dim_; }

    EvalStat eval_delta(const Eigen::VectorXd& base, const Eigen::VectorXd& h,
                        int order) const override {
        EvalStat out;
        auto w = binomial_signs(order);
        for (int k = 0; k <= order; ++k) {
            Eigen::VectorXd p = base + static_cast<double>(k) * h;
            if (p.norm() > cap_ + 1e-12) {
                out.why = "outside grid radius at " + point_str(p);
                return out;
            }
            out.value += w[k] * f_(p);
        }
        out.valid = true;
        out.min_cf_mod = 1.0;
        return out;
    }

private:
    std::function<Complex(const Eigen::VectorXd&)> f_;
    int dim_;
    double cap_;
};

/// Verdict of the finite-difference polynomial-degree test. The reported
/// max_residual / noise_threshold pair belongs to the decisive probe:
/// polynomial implies max_residual <= noise_threshold, not_polynomial implies
/// max_residual > 3 * noise_threshold.
struct PolyDegreeCertificate {
    enum class Verdict { polynomial, not_polynomial, inconclusive };

    int degree_bound = 0;
    double max_residual = 0;
    double noise_threshold = 0;
    Verdict verdict = Verdict::inconclusive;
    int probe_count = 0;
    double max_ratio = 0;
    double aggregate_z2 = 0;     // sum over noisy probes of (residual / se)^2
    double aggregate_bound = 0;  // null-consistency bound for aggregate_z2
    std::string diagnostic;
};

inline const char* to_string(PolyDegreeCertificate::Verdict v) {
    switch (v) {
        case PolyDegreeCertificate::Verdict::polynomial: return "polynomial";
        case PolyDegreeCertificate::Verdict::not_polynomial: return "not_polynomial";
        default: return "inconclusive";
    }
}

struct DegreeTestOptions {
    int probes = 32;
    double radius = 2.0;     // sampling ball for stencils
    double eps_exact = 1e-9; // absolute threshold floor (exact-arithmetic dust)
    int attempts_per_probe = 10;
};

/// Tests Delta_h^{D+1} F == 0 on random stencils. Shifts satisfy
/// ||h|| <= radius / (D + 2); bases are drawn so the stencil spans as much of
/// the valid region as the floor culling allows (shrink-retries otherwise).
///
/// Per probe the noise threshold is 4 * se of the difference statistic itself
/// (influence-propagated, so correlation between stencil points is priced in)
/// plus the exactness floor. Accepting "polynomial" additionally requires the
/// per-probe z-scores to be chi-square consistent with pure noise, which
/// prevents a high-order test with no statistical power from masking a
/// systematic residual just below the 4-sigma line.
inline PolyDegreeCertificate degree_test(const ProbeField& field, int D,
                                         std::uint64_t seed,
                                         const DegreeTestOptions& opt) {
    if (D < 0 || opt.probes < 1)
        throw Error("degree_test: need D >= 0 and probes >= 1");
    const int dim = field.dim();
    const int order = D + 1;
    const double R = opt.radius;
    const double hnorm0 = R / (D + 2);
    const double base_max0 = std::max(0.05 * R, 0.98 * R - order * hnorm0);
    static constexpr double kShrink[] = {1.0, 0.7, 0.5, 0.35, 0.25, 0.17, 0.1};

    auto rng = derive_stream(seed, 0xde97ee, static_cast<std::uint64_t>(D));
    PolyDegreeCertificate cert;
    cert.degree_bound = D;

    int valid = 0;
    double worst_ratio = -1;
    for (int p = 0; p < opt.probes; ++p) {
        EvalStat got;
        for (int att = 0; att < opt.attempts_per_probe && !got.valid; ++att) {
            Eigen::VectorXd u(dim), b(dim);
            for (int i = 0; i < dim; ++i) u(i) = rng.next_gauss();
            if (u.norm() < 1e-12) continue;
            u.normalize();
            for (int i = 0; i < dim; ++i) b(i) = rng.next_gauss();
            if (b.norm() > 0) b *= std::pow(rng.next_open(), 1.0 / dim) / b.norm();
            for (double s : kShrink) {
                Eigen::VectorXd base = b * (base_max0 * s);
                Eigen::VectorXd h = u * (hnorm0 * s);
                got = field.eval_delta(base, h, order);
                if (got.valid) break;
            }
        }
        if (!got.valid) continue;
        ++valid;
        double res = std::abs(got.value);
        double thr = 4.0 * got.se + opt.eps_exact;
        double ratio = res / thr;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            cert.max_residual = res;
            cert.noise_threshold = thr;
        }
        if (got.se > 0) {
            double z = res / got.se;
            cert.aggregate_z2 += z * z;
            cert.aggregate_bound += 1.0;
        }
    }
    cert.probe_count = valid;
    cert.max_ratio = std::max(worst_ratio, 0.0);
    double noisy = cert.aggregate_bound;
    cert.aggregate_bound = noisy > 0 ? noisy + 5.0 * std::sqrt(2.0 * noisy) + 5.0 : 0;

    if (valid < opt.probes) {
        cert.verdict = PolyDegreeCertificate::Verdict::inconclusive;
        cert.diagnostic = "only " + std::to_string(valid) + "/" +
                          std::to_string(opt.probes) + " valid stencils fit the field";
        return cert;
    }
    if (worst_ratio > 3.0) {
        cert.verdict = PolyDegreeCertificate::Verdict::not_polynomial;
    } else if (worst_ratio <= 1.0 &&
               (noisy == 0 || cert.aggregate_z2 <= cert.aggregate_bound)) {
        cert.verdict = PolyDegreeCertificate::Verdict::polynomial;
    } else {
        cert.verdict = PolyDegreeCertificate::Verdict::inconclusive;
        cert.diagnostic = "residuals neither pass the polynomial gate nor exceed "
                          "3x the noise threshold";
    }
    return cert;
}

} // namespace charlab
