#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "charlab/charfn.hpp"
#include "charlab/distributions.hpp"
#include "charlab/space.hpp"

namespace charlab {

enum class Equation { lemma1, lemma4, lemma6, q };

inline const char* to_string(Equation e) {
    switch (e) {
        case Equation::lemma1: return "lemma1";
        case Equation::lemma4: return "lemma4";
        case Equation::lemma6: return "lemma6";
        case Equation::q: return "q";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Residual functionals. Every residual is the log of the exponential factor
// of its defining equation, a linear combination of log cfs whose arguments
// are linear in the tuple of dual variables, so finite differences of the
// field collapse into single engine combinations.
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd hcat(const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index rows = parts[0].rows(), cols = 0;
    for (auto& p : parts) cols += p.cols();
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index at = 0;
    for (auto& p : parts) {
        m.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    return m;
}

} // namespace detail

/// r(f, g) = sum_j [log cf_j(A_j* f + B_j* g) - log cf_j(A_j* f) - log cf_j(B_j* g)]
/// over the tuple (f, g); zero iff the two forms are independent, polynomial
/// iff they are Q-independent.
inline CfFunctionalField make_lemma1_field(const CfEngine& eng,
                                           const std::vector<LinearOp>& A,
                                           const std::vector<LinearOp>& B,
                                           double floor, double radius) {
    if (A.size() != B.size() || A.empty())
        throw DimensionError("lemma1 field: operator lists must match");
    int d = A[0].dim();
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
    std::vector<CfFunctionalField::Term> terms;
    for (std::size_t j = 0; j < A.size(); ++j) {
        Eigen::MatrixXd At = A[j].matrix().transpose();
        Eigen::MatrixXd Bt = B[j].matrix().transpose();
        auto sel = Selector::component(static_cast<int>(j));
        terms.push_back({sel, detail::hcat({At, Bt}), 1.0});
        terms.push_back({sel, detail::hcat({At, zero}), -1.0});
        terms.push_back({sel, detail::hcat({zero, Bt}), -1.0});
    }
    return CfFunctionalField(eng, std::move(terms), 2 * d, floor, radius);
}

/// r(f, g) = sum_j [log cf_j(A_j* f + B_j* g) - log cf_j(A_j* f - B_j* g)],
/// the log of the conditional-symmetry equation factor; r(f, 0) = 0.
inline CfFunctionalField make_lemma4_field(const CfEngine& eng,
                                           const std::vector<LinearOp>& A,
                                           const std::vector<LinearOp>& B,
                                           double floor, double radius) {
    if (A.size() != B.size() || A.empty())
        throw DimensionError("lemma4 field: operator lists must match");
    std::vector<CfFunctionalField::Term> terms;
    int d = A[0].dim();
    for (std::size_t j = 0; j < A.size(); ++j) {
        Eigen::MatrixXd At = A[j].matrix().transpose();
        Eigen::MatrixXd Bt = B[j].matrix().transpose();
        auto sel = Selector::component(static_cast<int>(j));
        terms.push_back({sel, detail::hcat({At, Bt}), 1.0});
        terms.push_back({sel, detail::hcat({At, Eigen::MatrixXd(-Bt)}), -1.0});
    }
    return CfFunctionalField(eng, std::move(terms), 2 * d, floor, radius);
}

/// Sample-mean / residue-vector residual over (f, g_1, ..., g_n) for an
/// identically distributed tuple:
/// r = sum_j log cf(f/n + g_j - gbar) - n log cf(f/n) - sum_j log cf(g_j - gbar).
inline CfFunctionalField make_lemma6_field(const CfEngine& eng, int n, int d,
                                           double floor, double radius) {
    if (n < 2) throw PreconditionError("lemma6 field: need n >= 2");
    auto sel = Selector::pooled();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    auto block_map = [&](double f_coeff, int gj, double center_coeff) {
        // argument = f_coeff * f + sum_k (delta_{k,gj} + center_coeff) g_k
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, (n + 1) * d);
        L.middleCols(0, d) = f_coeff * I;
        for (int k = 0; k < n; ++k) {
            double c = center_coeff + (k == gj ? 1.0 : 0.0);
            if (c != 0.0) L.middleCols((k + 1) * d, d) = c * I;
        }
        return L;
    };
    std::vector<CfFunctionalField::Term> terms;
    for (int j = 0; j < n; ++j)
        terms.push_back({sel, block_map(1.0 / n, j, -1.0 / n), 1.0});
    terms.push_back({sel, block_map(1.0 / n, -1, 0.0), -static_cast<double>(n)});
    for (int j = 0; j < n; ++j)
        terms.push_back({sel, block_map(0.0, j, -1.0 / n), -1.0});
    return CfFunctionalField(eng, std::move(terms), (n + 1) * d, floor, radius);
}

/// The reduced 2-variable slice of the sample-mean equation obtained by
/// substituting f = n h, g_1 = g, g_2 = -g and zeroing the remaining g's:
/// r~(h, g) = log cf(h+g) + log cf(h-g) - 2 log cf(h) - log cf(g) - log cf(-g).
inline CfFunctionalField make_sample_mean_slice_field(const CfEngine& eng, int d,
                                                      double floor,
                                                      double radius) {
    auto sel = Selector::pooled();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d, d);
    std::vector<CfFunctionalField::Term> terms = {
        {sel, detail::hcat({I, I}), 1.0},
        {sel, detail::hcat({I, Eigen::MatrixXd(-I)}), 1.0},
        {sel, detail::hcat({I, Z}), -2.0},
        {sel, detail::hcat({Z, I}), -1.0},
        {sel, detail::hcat({Z, Eigen::MatrixXd(-I)}), -1.0}};
    return CfFunctionalField(eng, std::move(terms), 2 * d, floor, radius);
}

/// q(f_1, ..., f_n) = log joint cf - sum_j log marginal cf_j.
inline CfFunctionalField make_q_field(const CfEngine& eng, int n, int d,
                                      double floor, double radius) {
    std::vector<CfFunctionalField::Term> terms;
    terms.push_back(
        {Selector::joint(), Eigen::MatrixXd::Identity(n * d, n * d), 1.0});
    for (int j = 0; j < n; ++j) {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, n * d);
        L.middleCols(static_cast<Eigen::Index>(j) * d, d) =
            Eigen::MatrixXd::Identity(d, d);
        terms.push_back({Selector::component(j), L, -1.0});
    }
    return CfFunctionalField(eng, std::move(terms), n * d, floor, radius);
}

// ---------------------------------------------------------------------------
// Grids of tuple points and evaluated residual fields
// ---------------------------------------------------------------------------

struct TupleGrid {
    int dim = 0;
    std::vector<Eigen::VectorXd> points; // includes the origin

    /// Cartesian product of per-block star grids when small enough, otherwise
    /// a seeded random subsample of it.
    static TupleGrid product(const std::vector<StarGrid>& blocks, long cap,
                             std::uint64_t seed) {
        TupleGrid g;
        std::vector<std::vector<Eigen::VectorXd>> pts(blocks.size());
        long total = 1;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            for (const auto& u : blocks[b].rays)
                for (double t : blocks[b].radii) pts[b].push_back(t * u);
            g.dim += static_cast<int>(blocks[b].rays[0].size());
            total *= static_cast<long>(pts[b].size());
        }
        g.points.push_back(Eigen::VectorXd::Zero(g.dim));
        if (total <= cap) {
            std::vector<std::size_t> idx(blocks.size(), 0);
            for (long count = 0; count < total; ++count) {
                g.points.push_back(assemble(pts, idx, g.dim));
                for (std::size_t b = 0; b < idx.size(); ++b) {
                    if (++idx[b] < pts[b].size()) break;
                    idx[b] = 0;
                }
            }
        } else {
            auto rng = derive_stream(seed, 0x97fd);
            for (long count = 0; count < cap; ++count) {
                std::vector<std::size_t> idx(blocks.size());
                for (std::size_t b = 0; b < idx.size(); ++b)
                    idx[b] = rng.next() % pts[b].size();
                g.points.push_back(assemble(pts, idx, g.dim));
            }
        }
        return g;
    }

private:
    static Eigen::VectorXd assemble(
        const std::vector<std::vector<Eigen::VectorXd>>& pts,
        const std::vector<std::size_t>& idx, int dim) {
        Eigen::VectorXd p(dim);
        Eigen::Index at = 0;
        for (std::size_t b = 0; b < pts.size(); ++b) {
            p.segment(at, pts[b][idx[b]].size()) = pts[b][idx[b]];
            at += pts[b][idx[b]].size();
        }
        return p;
    }
};

struct FieldPoint {
    Eigen::VectorXd point;
    Complex value{0, 0};
    double se = 0;
    bool valid = false;
};

/// Residual (or q-estimate) values on a tuple grid with per-point standard
/// errors; points culled by the cf floor are kept with valid = false.
struct ResidualGrid {
    Equation equation = Equation::q;
    std::vector<std::string> coord_names;
    std::vector<FieldPoint> pts;

    long valid_count() const {
        long k = 0;
        for (auto& p : pts) k += p.valid ? 1 : 0;
        return k;
    }

    double max_abs() const {
        double m = 0;
        for (auto& p : pts)
            if (p.valid) m = std::max(m, std::abs(p.value));
        return m;
    }

    const FieldPoint* at_origin() const {
        for (auto& p : pts)
            if (p.point.isZero(0)) return &p;
        return nullptr;
    }

    void to_csv(std::ostream& os) const {
        for (auto& c : coord_names) os << c << ",";
        os << "re,im,se,valid\n";
        char buf[32];
        for (auto& p : pts) {
            for (Eigen::Index i = 0; i < p.point.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", p.point(i));
                os << buf << ",";
            }
            std::snprintf(buf, sizeof(buf), "%.17g", p.value.real());
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", p.value.imag());
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", p.se);
            os << buf << "," << (p.valid ? 1 : 0) << "\n";
        }
    }
};

inline std::vector<std::string> tuple_coord_names(
    const std::vector<std::pair<std::string, int>>& blocks) {
    std::vector<std::string> names;
    for (auto& [n, d] : blocks)
        for (int i = 1; i <= d; ++i) names.push_back(n + std::to_string(i));
    return names;
}

inline ResidualGrid eval_grid(const CfFunctionalField& field, Equation eq,
                              const TupleGrid& grid,
                              std::vector<std::string> coord_names) {
    ResidualGrid out;
    out.equation = eq;
    out.coord_names = std::move(coord_names);
    if (grid.dim != field.dim())
        throw DimensionError("eval_grid: tuple dimension mismatch");
    bool any_valid = false;
    for (const auto& p : grid.points) {
        EvalStat ev = field.eval(p);
        FieldPoint fp;
        fp.point = p;
        fp.valid = ev.valid;
        if (ev.valid) {
            fp.value = ev.value;
            fp.se = ev.se;
            any_valid = true;
        }
        out.pts.push_back(std::move(fp));
    }
    if (!any_valid)
        throw DomainError("residual grid: every point culled by the cf floor");
    return out;
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

/// Operational verdict "Q-independent at degree <= D": the polynomial-degree
/// certificate of the residual field together with the equation it came from.
struct QIndependenceCertificate {
    Equation equation = Equation::q;
    std::string variant; // "" for the full equation, "reduced_slice" for eq-24
    PolyDegreeCertificate::Verdict verdict =
        PolyDegreeCertificate::Verdict::inconclusive;
    int degree = -1; // smallest accepted degree when verdict == polynomial
    int d_max = 0;
    PolyDegreeCertificate decisive;
    std::vector<PolyDegreeCertificate> per_degree;
    long grid_points = 0;
};

/// Runs degree_test for D = 0..d_max and aggregates: the smallest D accepted
/// as polynomial wins; otherwise not_polynomial when at least one degree is
/// decisively rejected and no degree is accepted; otherwise inconclusive.
inline QIndependenceCertificate certify(const ProbeField& field, Equation eq,
                                        int d_max, std::uint64_t seed,
                                        const DegreeTestOptions& opt,
                                        long grid_points = 0) {
    QIndependenceCertificate cert;
    cert.equation = eq;
    cert.d_max = d_max;
    cert.grid_points = grid_points;
    for (int D = 0; D <= d_max; ++D) {
        PolyDegreeCertificate c = degree_test(field, D, seed, opt);
        cert.per_degree.push_back(c);
        if (c.verdict == PolyDegreeCertificate::Verdict::polynomial) {
            cert.verdict = c.verdict;
            cert.degree = D;
            cert.decisive = c;
            return cert;
        }
    }
    const PolyDegreeCertificate* worst = nullptr;
    bool any_np = false;
    for (const auto& c : cert.per_degree) {
        if (c.verdict == PolyDegreeCertificate::Verdict::not_polynomial) {
            any_np = true;
            if (!worst || c.max_ratio > worst->max_ratio) worst = &c;
        }
    }
    if (any_np) {
        cert.verdict = PolyDegreeCertificate::Verdict::not_polynomial;
        cert.decisive = *worst;
    } else {
        cert.verdict = PolyDegreeCertificate::Verdict::inconclusive;
        cert.decisive = cert.per_degree.back();
    }
    return cert;
}

} // namespace charlab
