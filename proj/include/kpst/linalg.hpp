#pragma once

// Dense linear algebra used by the Kronecker-product-structure test.
//
// All matrices are Eigen column-major doubles, so vec() is the natural
// storage order. Functions validate their inputs and throw kpst::Error.

#include <Eigen/Dense>

#include <variant>

#include "kpst/error.hpp"

namespace kpst {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// m(m+1)/2, the length of vech of an m x m matrix.
constexpr Index tri(Index m) noexcept { return m * (m + 1) / 2; }

/// Throws InvalidArgument if any entry is NaN or infinite, or the matrix is empty.
void require_finite(const Matrix& a, const char* what);

/// Column-stacked vectorisation.
Vector vec(const Matrix& a);

/// Inverse of vec for a rows x cols matrix.
Matrix unvec(const Vector& v, Index rows, Index cols);

/// Lower-triangular half-vectorisation. Requires a symmetric input
/// (max |A - A'| <= tol).
Vector vech(const Matrix& a, double tol = 1e-10);

/// Position of element (i, j), i >= j, inside vech of an m x m matrix.
constexpr Index vech_index(Index i, Index j, Index m) noexcept {
    return j * m - j * (j - 1) / 2 + (i - j);
}

/// The m^2 x m(m+1)/2 duplication matrix D_m with D_m vech(A) = vec(A).
Matrix duplication_matrix(Index m);

/// (D_m' D_m)^{-1} D_m', which maps vec(A) to vech of the symmetric part of A.
Matrix duplication_pinv(Index m);

/// Orthonormal basis of the antisymmetric subspace: columns
/// (e_i (x) e_j - e_j (x) e_i) / sqrt(2) for i < j in lexicographic order.
/// m = 1 yields a 1 x 0 matrix.
Matrix duplication_complement(Index m);

/// Kronecker product A (x) B.
Matrix kron(const Matrix& a, const Matrix& b);

/// Van Loan-Pitsianis rearrangement of a kp x kp matrix made of p x p
/// blocks of size k x k: row j*p + i (0-based) holds vec(A_ij)'.
/// The result is p^2 x k^2 and rearrange(G1 (x) G2) = vec(G1) vec(G2)'.
Matrix rearrange(const Matrix& a, Index p, Index k);

/// Inverse of rearrange.
Matrix unrearrange(const Matrix& r, Index p, Index k);

/// Full SVD M = L diag(sigma) N' with the leading singular pair split off:
/// L = (L1 | L2), N = (N1 | N2) and the lower-right blocks L22, N22.
/// Sign convention: L(0,0) >= 0.
class SvdPartition {
public:
    SvdPartition() = default;
    SvdPartition(Matrix l, Vector sigma, Matrix n);

    [[nodiscard]] const Matrix& l() const noexcept { return l_; }
    [[nodiscard]] const Matrix& n() const noexcept { return n_; }
    /// Singular values, non-increasing, length min(rows, cols).
    [[nodiscard]] const Vector& sigma() const noexcept { return sigma_; }

    [[nodiscard]] Index rows() const noexcept { return l_.rows(); }
    [[nodiscard]] Index cols() const noexcept { return n_.rows(); }

    [[nodiscard]] double sigma1() const { return sigma_(0); }
    [[nodiscard]] double l11() const { return l_(0, 0); }
    [[nodiscard]] double n11() const { return n_(0, 0); }
    [[nodiscard]] Vector l1() const { return l_.col(0); }
    [[nodiscard]] Vector n1() const { return n_.col(0); }
    [[nodiscard]] Matrix l2() const { return l_.rightCols(rows() - 1); }
    [[nodiscard]] Matrix n2() const { return n_.rightCols(cols() - 1); }
    [[nodiscard]] Matrix l22() const { return l_.bottomRightCorner(rows() - 1, rows() - 1); }
    [[nodiscard]] Matrix n22() const { return n_.bottomRightCorner(cols() - 1, cols() - 1); }
    /// The (rows-1) x (cols-1) rectangular diagonal block of trailing singular values.
    [[nodiscard]] Matrix sigma2() const;
    /// L diag(sigma) N'.
    [[nodiscard]] Matrix reconstruct() const;

private:
    Matrix l_;
    Vector sigma_;
    Matrix n_;
};

SvdPartition svd_partitioned(const Matrix& m);

struct FixedRank {
    Index rank;
};
struct Tolerance {
    double rtol;
};
using RankPolicy = std::variant<FixedRank, Tolerance>;

/// Moore-Penrose inverse of a symmetric PSD matrix through its
/// eigendecomposition. FixedRank keeps the r largest eigenvalues,
/// Tolerance keeps eigenvalues above rtol * lambda_max.
Matrix pseudo_inverse(const Matrix& s, const RankPolicy& policy);

/// Same as pseudo_inverse but also reports the retained eigenvalues
/// (descending) so callers can diagnose rank deficiency.
struct PseudoInverse {
    Matrix inverse;
    Vector retained;
    double lambda_max = 0.0;
};
PseudoInverse pseudo_inverse_detailed(const Matrix& s, const RankPolicy& policy);

/// m x (m-1) orthonormal basis of the orthogonal complement of a unit
/// vector, taken from columns 2..m of the Householder reflector that maps
/// v onto a multiple of e_1. Deterministic for a given v.
Matrix orth_complement(const Vector& v);

/// Lower-triangular C with C C' = S.
Matrix cholesky_lower(const Matrix& s);

/// Symmetric square root and inverse square root of an SPD matrix.
Matrix sqrt_spd(const Matrix& s);
Matrix inv_sqrt_spd(const Matrix& s);

/// Largest |a_ij - a_ji|.
double max_asymmetry(const Matrix& a);

}  // namespace kpst
