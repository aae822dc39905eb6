#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "charlab/errors.hpp"

namespace charlab {

using Vector = Eigen::VectorXd;     // element of X = R^d
using DualVector = Eigen::VectorXd; // element of X* (Euclidean pairing)
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;

/// Relative tolerance for membership in GL(X): smallest singular value must
/// exceed kGlTol times the largest.
inline constexpr double kGlTol = 1e-10;

/// <x, f> for x in X, f in X*.
inline double pairing(const Vector& x, const DualVector& f) {
    if (x.size() != f.size())
        throw DimensionError("pairing: dimension mismatch (" +
                             std::to_string(x.size()) + " vs " +
                             std::to_string(f.size()) + ")");
    return x.dot(f);
}

/// A continuous linear operator on R^d with invertibility metadata.
/// Immutable after construction; the SVD and (when defined) the inverse are
/// computed eagerly so instances are safe to share between threads.
class LinearOp {
public:
    explicit LinearOp(Matrix m) : mat_(std::move(m)) {
        if (mat_.rows() != mat_.cols())
            throw DimensionError("LinearOp: matrix must be square");
        Eigen::JacobiSVD<Matrix> svd(mat_);
        smax_ = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        smin_ = svd.singularValues().size()
                    ? svd.singularValues()(svd.singularValues().size() - 1)
                    : 0.0;
        if (smax_ > 0.0 && smin_ > 1e-14 * smax_)
            inv_ = mat_.partialPivLu().inverse();
    }

    static LinearOp identity(int d) { return LinearOp(Matrix::Identity(d, d)); }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const Matrix& matrix() const { return mat_; }

    Vector apply(const Vector& x) const {
        if (x.size() != mat_.cols())
            throw DimensionError("LinearOp::apply: dimension mismatch");
        return mat_ * x;
    }

    /// A* ; for a real matrix the transpose.
    LinearOp adjoint() const { return LinearOp(mat_.transpose()); }

    /// GL(X) membership at relative tolerance `tol`.
    bool invertible(double tol = kGlTol) const {
        return smax_ > 0.0 && smin_ > tol * smax_;
    }

    double cond_estimate() const {
        return smin_ > 0.0 ? smax_ / smin_
                           : std::numeric_limits<double>::infinity();
    }

    const Matrix& inverse() const {
        if (!inv_)
            throw PreconditionError("LinearOp::inverse: operator is singular");
        return *inv_;
    }

private:
    Matrix mat_;
    std::optional<Matrix> inv_;
    double smax_ = 0.0;
    double smin_ = 0.0;
};

inline LinearOp adjoint(const LinearOp& a) { return a.adjoint(); }

inline bool check_invertible(const LinearOp& a, double tol = kGlTol) {
    return a.invertible(tol);
}

/// Outcome of the pairwise Heyde condition; `i`, `j`, `sign` identify the
/// first failing pair when !ok.
struct HeydeCheck {
    bool ok = true;
    int i = -1;
    int j = -1;
    char sign = ' ';
    std::string message;
};

/// Checks B_i A_i^{-1} +- B_j A_j^{-1} in GL(X) for all i != j.
/// Throws PreconditionError (naming the index) if some A_i or B_i is itself
/// not invertible.
inline HeydeCheck check_heyde_pairs(const std::vector<LinearOp>& A,
                                    const std::vector<LinearOp>& B,
                                    double tol = kGlTol) {
    if (A.size() != B.size() || A.size() < 2)
        throw PreconditionError(
            "check_heyde_condition: need equally sized lists with n >= 2");
    for (std::size_t k = 0; k < A.size(); ++k) {
        if (!A[k].invertible(tol))
            throw PreconditionError("check_heyde_condition: A_" +
                                    std::to_string(k + 1) + " is not invertible");
        if (!B[k].invertible(tol))
            throw PreconditionError("check_heyde_condition: B_" +
                                    std::to_string(k + 1) + " is not invertible");
    }
    std::vector<Matrix> ratio;
    ratio.reserve(A.size());
    for (std::size_t k = 0; k < A.size(); ++k)
        ratio.push_back(B[k].matrix() * A[k].inverse());

    HeydeCheck res;
    for (std::size_t i = 0; i < A.size(); ++i) {
        for (std::size_t j = i + 1; j < A.size(); ++j) {
            for (char sign : {'+', '-'}) {
                Matrix m = sign == '+' ? Matrix(ratio[i] + ratio[j])
                                       : Matrix(ratio[i] - ratio[j]);
                if (!LinearOp(m).invertible(tol)) {
                    res.ok = false;
                    res.i = static_cast<int>(i);
                    res.j = static_cast<int>(j);
                    res.sign = sign;
                    res.message = "B_i A_i^-1 " + std::string(1, sign) +
                                  " B_j A_j^-1 singular for (i, j) = (" +
                                  std::to_string(i + 1) + ", " +
                                  std::to_string(j + 1) + ")";
                    return res;
                }
            }
        }
    }
    return res;
}

inline bool check_heyde_condition(const std::vector<LinearOp>& A,
                                  const std::vector<LinearOp>& B,
                                  double tol = kGlTol) {
    return check_heyde_pairs(A, B, tol).ok;
}

} // namespace charlab
