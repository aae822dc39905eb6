#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "charlab/errors.hpp"
#include "charlab/rng.hpp"

namespace charlab {

/// Named blocks of dual variables, e.g. {f: d, g: d} or {f: d, g1: d, ..., gn: d}.
class BlockShape {
public:
    BlockShape() = default;
    BlockShape(std::initializer_list<std::pair<std::string, int>> bs)
        : blocks_(bs) {
        init();
    }
    explicit BlockShape(std::vector<std::pair<std::string, int>> bs)
        : blocks_(std::move(bs)) {
        init();
    }

    int count() const { return static_cast<int>(blocks_.size()); }
    int dim(int b) const { return blocks_[b].second; }
    const std::string& name(int b) const { return blocks_[b].first; }
    int offset(int b) const { return offsets_[b]; }
    int total() const { return total_; }

    int find(const std::string& n) const {
        for (int b = 0; b < count(); ++b)
            if (blocks_[b].first == n) return b;
        return -1;
    }

    /// Variable index of coordinate `i` in block `b`.
    int var(int b, int i) const { return offsets_[b] + i; }

    std::string var_name(int v) const {
        for (int b = count() - 1; b >= 0; --b)
            if (v >= offsets_[b])
                return blocks_[b].first + std::to_string(v - offsets_[b] + 1);
        return "?";
    }

    bool operator==(const BlockShape& o) const { return blocks_ == o.blocks_; }
    bool operator!=(const BlockShape& o) const { return !(*this == o); }

private:
    void init() {
        offsets_.clear();
        total_ = 0;
        for (auto& [n, d] : blocks_) {
            if (d < 1) throw DimensionError("BlockShape: block dimension must be >= 1");
            offsets_.push_back(total_);
            total_ += d;
        }
    }

    std::vector<std::pair<std::string, int>> blocks_;
    std::vector<int> offsets_;
    int total_ = 0;
};

using Monomial = std::vector<std::uint8_t>;

inline int monomial_degree(const Monomial& m) {
    int s = 0;
    for (auto e : m) s += e;
    return s;
}

/// Graded lexicographic order over (block index, coordinate).
struct GradedLex {
    bool operator()(const Monomial& a, const Monomial& b) const {
        int da = monomial_degree(a), db = monomial_degree(b);
        if (da != db) return da < db;
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

template <class K>
struct FieldTraits;

template <>
struct FieldTraits<std::complex<double>> {
    static constexpr bool exact = false;
    static constexpr double default_tol = 1e-12;
    static double abs(const std::complex<double>& v) { return std::abs(v); }
    static bool is_zero(const std::complex<double>& v, double tol) {
        return std::abs(v) <= tol;
    }
    static std::complex<double> random(SplitMix64& g) {
        return {g.next_uniform(-1, 1), 0.0};
    }
};

/// Per-block affine substitution x_b := sum_c L[b][c] * y_c + t_b mapping
/// polynomials over `source` to polynomials over `target`.
template <class K>
struct AffineMap {
    BlockShape source;
    BlockShape target;
    // lin[sb][tb]: row-major source_dim(sb) x target_dim(tb), empty = zero.
    std::vector<std::vector<std::vector<K>>> lin;
    // shift[sb]: length source_dim(sb), empty = zero.
    std::vector<std::vector<K>> shift;

    static AffineMap shift_only(const BlockShape& shape,
                                std::vector<std::vector<K>> shifts) {
        AffineMap m;
        m.source = shape;
        m.target = shape;
        m.lin.assign(shape.count(), std::vector<std::vector<K>>(shape.count()));
        for (int b = 0; b < shape.count(); ++b) {
            auto& id = m.lin[b][b];
            id.assign(static_cast<std::size_t>(shape.dim(b)) * shape.dim(b), K(0));
            for (int i = 0; i < shape.dim(b); ++i)
                id[static_cast<std::size_t>(i) * shape.dim(b) + i] = K(1);
        }
        m.shift = std::move(shifts);
        m.shift.resize(shape.count());
        return m;
    }
};

/// Exact multivariate polynomial over named blocks of dual variables with
/// coefficients in K (complex doubles by default, exact rationals optionally).
/// Canonical form: no coefficients below the canonicalization threshold are
/// stored; monomials ordered graded-lex.
template <class K>
class BlockPolynomial {
public:
    using Traits = FieldTraits<K>;
    static constexpr int kDegreeCap = 8;

    explicit BlockPolynomial(BlockShape shape) : shape_(std::move(shape)) {}

    static BlockPolynomial constant(const BlockShape& shape, const K& c) {
        BlockPolynomial p(shape);
        p.add_term(Monomial(shape.total(), 0), c);
        return p;
    }

    static BlockPolynomial variable(const BlockShape& shape, int block, int coord) {
        BlockPolynomial p(shape);
        Monomial m(shape.total(), 0);
        m[shape.var(block, coord)] = 1;
        p.add_term(m, K(1));
        return p;
    }

    const BlockShape& shape() const { return shape_; }
    const std::map<Monomial, K, GradedLex>& terms() const { return terms_; }

    void add_term(const Monomial& m, const K& c) {
        if (static_cast<int>(m.size()) != shape_.total())
            throw DimensionError("BlockPolynomial: monomial size mismatch");
        if (monomial_degree(m) > kDegreeCap)
            throw Error("BlockPolynomial: degree cap " + std::to_string(kDegreeCap) +
                        " exceeded");
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            if (!Traits::is_zero(c, Traits::default_tol)) terms_.emplace(m, c);
        } else {
            it->second = it->second + c;
            if (Traits::is_zero(it->second, Traits::default_tol)) terms_.erase(it);
        }
    }

    K coeff(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? K(0) : it->second;
    }

    BlockPolynomial operator+(const BlockPolynomial& o) const {
        require_same_shape(o);
        BlockPolynomial r = *this;
        for (auto& [m, c] : o.terms_) r.add_term(m, c);
        return r;
    }

    BlockPolynomial operator-(const BlockPolynomial& o) const {
        require_same_shape(o);
        BlockPolynomial r = *this;
        for (auto& [m, c] : o.terms_) r.add_term(m, K(0) - c);
        return r;
    }

    BlockPolynomial operator-() const {
        BlockPolynomial r(shape_);
        for (auto& [m, c] : terms_) r.terms_.emplace(m, K(0) - c);
        return r;
    }

    BlockPolynomial operator*(const BlockPolynomial& o) const {
        require_same_shape(o);
        BlockPolynomial r(shape_);
        for (auto& [ma, ca] : terms_) {
            for (auto& [mb, cb] : o.terms_) {
                Monomial m(ma);
                for (std::size_t i = 0; i < m.size(); ++i)
                    m[i] = static_cast<std::uint8_t>(m[i] + mb[i]);
                r.add_term(m, ca * cb);
            }
        }
        return r;
    }

    BlockPolynomial scaled(const K& c) const {
        BlockPolynomial r(shape_);
        for (auto& [m, v] : terms_) r.add_term(m, v * c);
        return r;
    }

    int total_degree() const {
        return terms_.empty() ? 0 : monomial_degree(terms_.rbegin()->first);
    }

    bool is_zero(double tol = Traits::default_tol) const {
        for (auto& [m, c] : terms_)
            if (!Traits::is_zero(c, tol)) return false;
        return true;
    }

    double max_abs_coeff() const {
        double r = 0.0;
        for (auto& [m, c] : terms_) r = std::max(r, Traits::abs(c));
        return r;
    }

    /// Term-by-term evaluation with cached variable powers.
    K evaluate(const std::vector<std::vector<K>>& block_values) const {
        if (static_cast<int>(block_values.size()) != shape_.count())
            throw DimensionError("BlockPolynomial::evaluate: block count mismatch");
        std::vector<K> vals(shape_.total(), K(0));
        for (int b = 0; b < shape_.count(); ++b) {
            if (static_cast<int>(block_values[b].size()) != shape_.dim(b))
                throw DimensionError("BlockPolynomial::evaluate: block dim mismatch");
            for (int i = 0; i < shape_.dim(b); ++i)
                vals[shape_.var(b, i)] = block_values[b][i];
        }
        K acc(0);
        for (auto& [m, c] : terms_) {
            K t = c;
            for (std::size_t v = 0; v < m.size(); ++v)
                for (int e = 0; e < m[v]; ++e) t = t * vals[v];
            acc = acc + t;
        }
        return acc;
    }

    /// Exact polynomial substitution; degree does not increase.
    BlockPolynomial compose_affine(const AffineMap<K>& map) const {
        if (map.source != shape_)
            throw DimensionError("compose_affine: source shape mismatch");
        const BlockShape& tgt = map.target;
        // Affine image of every source variable.
        std::vector<BlockPolynomial> img;
        img.reserve(shape_.total());
        for (int sb = 0; sb < shape_.count(); ++sb) {
            for (int i = 0; i < shape_.dim(sb); ++i) {
                BlockPolynomial p(tgt);
                if (sb < static_cast<int>(map.shift.size()) &&
                    !map.shift[sb].empty())
                    p.add_term(Monomial(tgt.total(), 0), map.shift[sb][i]);
                if (sb < static_cast<int>(map.lin.size())) {
                    for (int tb = 0;
                         tb < std::min<int>(tgt.count(),
                                            static_cast<int>(map.lin[sb].size()));
                         ++tb) {
                        const auto& L = map.lin[sb][tb];
                        if (L.empty()) continue;
                        for (int j = 0; j < tgt.dim(tb); ++j) {
                            const K& c = L[static_cast<std::size_t>(i) * tgt.dim(tb) + j];
                            if (Traits::is_zero(c, 0.0)) continue;
                            Monomial m(tgt.total(), 0);
                            m[tgt.var(tb, j)] = 1;
                            p.add_term(m, c);
                        }
                    }
                }
                img.push_back(std::move(p));
            }
        }
        // Powers on demand, then term-by-term products.
        std::vector<std::vector<BlockPolynomial>> pw(img.size());
        auto power = [&](int v, int e) -> const BlockPolynomial& {
            auto& cache = pw[v];
            if (cache.empty()) cache.push_back(constant(tgt, K(1)));
            while (static_cast<int>(cache.size()) <= e)
                cache.push_back(cache.back() * img[v]);
            return cache[e];
        };
        BlockPolynomial out(tgt);
        for (auto& [m, c] : terms_) {
            BlockPolynomial prod = constant(tgt, c);
            for (std::size_t v = 0; v < m.size(); ++v)
                if (m[v] > 0) prod = prod * power(static_cast<int>(v), m[v]);
            out = out + prod;
        }
        return out;
    }

    /// Exact finite difference p(x + h) - p(x) with one constant shift per block.
    BlockPolynomial delta(std::vector<std::vector<K>> shift_per_block) const {
        auto m = AffineMap<K>::shift_only(shape_, std::move(shift_per_block));
        return compose_affine(m) - *this;
    }

    /// Text form like "-0.5*f1^2 + 1.0*f1*g1" (descending graded-lex).
    std::string pretty() const {
        if (terms_.empty()) return "0";
        std::string out;
        for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
            if (!out.empty()) out += " + ";
            out += format_coeff(it->second);
            for (std::size_t v = 0; v < it->first.size(); ++v) {
                int e = it->first[v];
                if (e == 0) continue;
                out += "*" + shape_.var_name(static_cast<int>(v));
                if (e > 1) out += "^" + std::to_string(e);
            }
        }
        return out;
    }

private:
    void require_same_shape(const BlockPolynomial& o) const {
        if (shape_ != o.shape_)
            throw DimensionError("BlockPolynomial: block shape mismatch");
    }

    static std::string format_real(double x) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", x);
        std::string s(buf);
        if (s.find_first_of(".einf") == std::string::npos) s += ".0";
        return s;
    }

    static std::string format_coeff(const K& c);

    BlockShape shape_;
    std::map<Monomial, K, GradedLex> terms_;
};

template <>
inline std::string BlockPolynomial<std::complex<double>>::format_coeff(
    const std::complex<double>& c) {
    if (std::abs(c.imag()) <= 1e-12) return format_real(c.real());
    return "(" + format_real(c.real()) + (c.imag() < 0 ? "-" : "+") +
           format_real(std::abs(c.imag())) + "i)";
}

using PolyC = BlockPolynomial<std::complex<double>>;

/// psi(f) = -i<m, f> + 1/2 <R f, f> for a Gaussian law with mean m and
/// covariance R; embeds losslessly into a degree-2 BlockPolynomial.
struct QuadraticExponent {
    Eigen::VectorXcd linear; // -i*m
    Eigen::MatrixXd quad;    // R/2, symmetric

    static QuadraticExponent gaussian(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov) {
        QuadraticExponent q;
        q.linear = std::complex<double>(0, -1) * mean.cast<std::complex<double>>();
        q.quad = 0.5 * (cov + cov.transpose()) * 0.5;
        return q;
    }

    int dim() const { return static_cast<int>(linear.size()); }

    std::complex<double> eval(const Eigen::VectorXd& f) const {
        std::complex<double> lin = linear.dot(f.cast<std::complex<double>>());
        return std::conj(lin) + std::complex<double>(f.dot(quad * f), 0);
    }

    PolyC to_poly(const BlockShape& shape, int block) const {
        if (shape.dim(block) != dim())
            throw DimensionError("QuadraticExponent::to_poly: block dim mismatch");
        PolyC p(shape);
        for (int i = 0; i < dim(); ++i) {
            Monomial m(shape.total(), 0);
            m[shape.var(block, i)] = 1;
            p.add_term(m, linear(i));
        }
        for (int i = 0; i < dim(); ++i) {
            for (int j = i; j < dim(); ++j) {
                Monomial m(shape.total(), 0);
                m[shape.var(block, i)] = static_cast<std::uint8_t>(m[shape.var(block, i)] + 1);
                m[shape.var(block, j)] = static_cast<std::uint8_t>(m[shape.var(block, j)] + 1);
                double c = i == j ? quad(i, i) : quad(i, j) + quad(j, i);
                p.add_term(m, std::complex<double>(c, 0));
            }
        }
        return p;
    }
};

/// Small dense matrix over an arbitrary coefficient field; just enough linear
/// algebra for the elimination replays (products, transpose, exact inverse).
template <class K>
struct KMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<K> a; // row-major

    KMatrix() = default;
    KMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, K(0)) {}

    static KMatrix identity(int d) {
        KMatrix m(d, d);
        for (int i = 0; i < d; ++i) m.at(i, i) = K(1);
        return m;
    }

    template <class M>
    static KMatrix from(const M& em) {
        KMatrix m(static_cast<int>(em.rows()), static_cast<int>(em.cols()));
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = K(em(i, j));
        return m;
    }

    K& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const K& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    KMatrix transpose() const {
        KMatrix m(cols, rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m.at(j, i) = at(i, j);
        return m;
    }

    KMatrix operator*(const KMatrix& o) const {
        if (cols != o.rows) throw DimensionError("KMatrix: product dim mismatch");
        KMatrix m(rows, o.cols);
        for (int i = 0; i < rows; ++i)
            for (int k = 0; k < cols; ++k)
                for (int j = 0; j < o.cols; ++j)
                    m.at(i, j) = m.at(i, j) + at(i, k) * o.at(k, j);
        return m;
    }

    KMatrix operator+(const KMatrix& o) const {
        KMatrix m = *this;
        for (std::size_t i = 0; i < a.size(); ++i) m.a[i] = m.a[i] + o.a[i];
        return m;
    }

    KMatrix operator-(const KMatrix& o) const {
        KMatrix m = *this;
        for (std::size_t i = 0; i < a.size(); ++i) m.a[i] = m.a[i] - o.a[i];
        return m;
    }

    KMatrix scaled(const K& c) const {
        KMatrix m = *this;
        for (auto& x : m.a) x = x * c;
        return m;
    }

    std::vector<K> apply(const std::vector<K>& v) const {
        if (static_cast<int>(v.size()) != cols)
            throw DimensionError("KMatrix: apply dim mismatch");
        std::vector<K> r(rows, K(0));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) r[i] = r[i] + at(i, j) * v[j];
        return r;
    }

    /// Gauss-Jordan with abs-pivoting; exact for exact fields.
    KMatrix inverse() const {
        if (rows != cols) throw DimensionError("KMatrix: inverse of non-square");
        KMatrix m = *this;
        KMatrix inv = identity(rows);
        for (int c = 0; c < cols; ++c) {
            int piv = -1;
            double best = 0;
            for (int r = c; r < rows; ++r) {
                double mag = FieldTraits<K>::abs(m.at(r, c));
                if (mag > best) {
                    best = mag;
                    piv = r;
                }
            }
            if (piv < 0 || best < 1e-300)
                throw PreconditionError("KMatrix: singular matrix");
            for (int j = 0; j < cols; ++j) {
                std::swap(m.at(c, j), m.at(piv, j));
                std::swap(inv.at(c, j), inv.at(piv, j));
            }
            K p = m.at(c, c);
            K pinv = K(1) / p;
            for (int j = 0; j < cols; ++j) {
                m.at(c, j) = m.at(c, j) * pinv;
                inv.at(c, j) = inv.at(c, j) * pinv;
            }
            for (int r = 0; r < rows; ++r) {
                if (r == c) continue;
                K f = m.at(r, c);
                if (FieldTraits<K>::is_zero(f, 0.0)) continue;
                for (int j = 0; j < cols; ++j) {
                    m.at(r, j) = m.at(r, j) - f * m.at(c, j);
                    inv.at(r, j) = inv.at(r, j) - f * inv.at(c, j);
                }
            }
        }
        return inv;
    }
};

template <class K>
std::vector<K> negated(std::vector<K> v) {
    for (auto& x : v) x = K(0) - x;
    return v;
}

/// Eigen-friendly helpers for the complex-double instantiation.
inline std::vector<std::complex<double>> to_kvec(const Eigen::VectorXd& v) {
    std::vector<std::complex<double>> r(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) r[i] = std::complex<double>(v(i), 0);
    return r;
}

inline std::vector<std::complex<double>> to_kmat(const Eigen::MatrixXd& m) {
    std::vector<std::complex<double>> r(static_cast<std::size_t>(m.rows()) * m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r[static_cast<std::size_t>(i) * m.cols() + j] = std::complex<double>(m(i, j), 0);
    return r;
}

inline std::complex<double> eval_poly(const PolyC& p,
                                      const std::vector<Eigen::VectorXd>& blocks) {
    std::vector<std::vector<std::complex<double>>> vals;
    vals.reserve(blocks.size());
    for (auto& b : blocks) vals.push_back(to_kvec(b));
    return p.evaluate(vals);
}

} // namespace charlab
