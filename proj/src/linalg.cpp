#include "kpst/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kpst {

namespace {

std::string shape(const Matrix& a) {
    std::ostringstream os;
    os << a.rows() << "x" << a.cols();
    return os.str();
}

void require_symmetric(const Matrix& a, double tol, const char* what) {
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::NonSquare, std::string(what) + ": expected a square matrix, got " + shape(a));
    }
    const double asym = max_asymmetry(a);
    if (asym > tol) {
        std::ostringstream os;
        os << what << ": matrix is not symmetric (max asymmetry " << asym << ")";
        throw Error(ErrorCode::NotSymmetric, os.str());
    }
}

}  // namespace

void require_finite(const Matrix& a, const char* what) {
    if (a.size() == 0) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + ": empty matrix");
    }
    if (!a.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + ": non-finite entry");
    }
}

double max_asymmetry(const Matrix& a) {
    if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

Vector vec(const Matrix& a) {
    return Eigen::Map<const Vector>(a.data(), a.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
    if (v.size() != rows * cols) {
        throw Error(ErrorCode::ShapeMismatch, "unvec: length does not match requested shape");
    }
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Vector vech(const Matrix& a, double tol) {
    require_symmetric(a, tol, "vech");
    const Index m = a.rows();
    Vector out(tri(m));
    Index pos = 0;
    for (Index j = 0; j < m; ++j) {
        for (Index i = j; i < m; ++i) out(pos++) = a(i, j);
    }
    return out;
}

Matrix duplication_matrix(Index m) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "duplication_matrix: m must be >= 1");
    Matrix d = Matrix::Zero(m * m, tri(m));
    for (Index j = 0; j < m; ++j) {
        for (Index i = j; i < m; ++i) {
            const Index c = vech_index(i, j, m);
            d(j * m + i, c) = 1.0;
            d(i * m + j, c) = 1.0;
        }
    }
    return d;
}

Matrix duplication_pinv(Index m) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "duplication_pinv: m must be >= 1");
    Matrix d = Matrix::Zero(tri(m), m * m);
    for (Index j = 0; j < m; ++j) {
        for (Index i = j; i < m; ++i) {
            const Index r = vech_index(i, j, m);
            if (i == j) {
                d(r, j * m + i) = 1.0;
            } else {
                d(r, j * m + i) = 0.5;
                d(r, i * m + j) = 0.5;
            }
        }
    }
    return d;
}

Matrix duplication_complement(Index m) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "duplication_complement: m must be >= 1");
    Matrix out = Matrix::Zero(m * m, m * (m - 1) / 2);
    const double h = 1.0 / std::sqrt(2.0);
    Index c = 0;
    for (Index i = 0; i < m; ++i) {
        for (Index j = i + 1; j < m; ++j) {
            out(i * m + j, c) = h;
            out(j * m + i, c) = -h;
            ++c;
        }
    }
    return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Matrix rearrange(const Matrix& a, Index p, Index k) {
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::NonSquare, "rearrange: expected a square matrix, got " + shape(a));
    }
    if (p < 1 || k < 1 || a.rows() != p * k || a.cols() != p * k) {
        std::ostringstream os;
        os << "rearrange: a " << shape(a) << " matrix is not kp x kp for p=" << p << ", k=" << k;
        throw Error(ErrorCode::ShapeMismatch, os.str());
    }
    Matrix out(p * p, k * k);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < p; ++i) {
            const auto block = a.block(i * k, j * k, k, k);
            for (Index d = 0; d < k; ++d) {
                for (Index c = 0; c < k; ++c) out(j * p + i, d * k + c) = block(c, d);
            }
        }
    }
    return out;
}

Matrix unrearrange(const Matrix& r, Index p, Index k) {
    if (p < 1 || k < 1 || r.rows() != p * p || r.cols() != k * k) {
        throw Error(ErrorCode::ShapeMismatch, "unrearrange: expected a p^2 x k^2 matrix");
    }
    Matrix out(p * k, p * k);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < p; ++i) {
            for (Index d = 0; d < k; ++d) {
                for (Index c = 0; c < k; ++c) out(i * k + c, j * k + d) = r(j * p + i, d * k + c);
            }
        }
    }
    return out;
}

SvdPartition::SvdPartition(Matrix l, Vector sigma, Matrix n)
    : l_(std::move(l)), sigma_(std::move(sigma)), n_(std::move(n)) {}

Matrix SvdPartition::sigma2() const {
    Matrix s = Matrix::Zero(rows() - 1, cols() - 1);
    for (Index i = 1; i < sigma_.size(); ++i) s(i - 1, i - 1) = sigma_(i);
    return s;
}

Matrix SvdPartition::reconstruct() const {
    Matrix s = Matrix::Zero(rows(), cols());
    for (Index i = 0; i < sigma_.size(); ++i) s(i, i) = sigma_(i);
    return l_ * s * n_.transpose();
}

SvdPartition svd_partitioned(const Matrix& m) {
    require_finite(m, "svd_partitioned");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) {
        throw Error(ErrorCode::ConvergenceFailure, "svd_partitioned: SVD did not converge");
    }
    Matrix l = svd.matrixU();
    Matrix n = svd.matrixV();
    Vector sigma = svd.singularValues();
    if (!l.allFinite() || !n.allFinite() || !sigma.allFinite()) {
        throw Error(ErrorCode::ConvergenceFailure, "svd_partitioned: non-finite factors");
    }
    if (l(0, 0) < 0.0) {
        l.col(0) *= -1.0;
        n.col(0) *= -1.0;
    }
    return SvdPartition(std::move(l), std::move(sigma), std::move(n));
}

PseudoInverse pseudo_inverse_detailed(const Matrix& s, const RankPolicy& policy) {
    require_finite(s, "pseudo_inverse");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    require_symmetric(s, 1e-8 * scale, "pseudo_inverse");

    const Index dim = s.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::ConvergenceFailure, "pseudo_inverse: eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    const Vector& values = eig.eigenvalues();
    const Matrix& vectors = eig.eigenvectors();
    const double lambda_max = values(dim - 1);

    Index keep = 0;
    if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
        if (fixed->rank < 0 || fixed->rank > dim) {
            std::ostringstream os;
            os << "pseudo_inverse: rank " << fixed->rank << " exceeds dimension " << dim;
            throw Error(ErrorCode::RankExceedsDimension, os.str());
        }
        keep = fixed->rank;
    } else {
        const double cutoff = std::get<Tolerance>(policy).rtol * lambda_max;
        for (Index i = dim - 1; i >= 0 && values(i) > cutoff && values(i) > 0.0; --i) ++keep;
    }

    PseudoInverse out;
    out.lambda_max = lambda_max;
    out.retained.resize(keep);
    out.inverse = Matrix::Zero(dim, dim);
    for (Index r = 0; r < keep; ++r) {
        const Index i = dim - 1 - r;
        out.retained(r) = values(i);
        if (values(i) <= 0.0) continue;
        out.inverse.noalias() += (1.0 / values(i)) * vectors.col(i) * vectors.col(i).transpose();
    }
    return out;
}

Matrix pseudo_inverse(const Matrix& s, const RankPolicy& policy) {
    return pseudo_inverse_detailed(s, policy).inverse;
}

Matrix orth_complement(const Vector& v) {
    const Index m = v.size();
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "orth_complement: empty vector");
    const double norm = v.norm();
    if (!std::isfinite(norm) || norm == 0.0) {
        throw Error(ErrorCode::ZeroVector, "orth_complement: zero vector has no defined complement");
    }
    if (std::abs(norm - 1.0) > 1e-10) {
        throw Error(ErrorCode::InvalidArgument, "orth_complement: vector must have unit norm");
    }
    Vector u = v;
    u(0) += v(0) >= 0.0 ? 1.0 : -1.0;
    const Matrix h = Matrix::Identity(m, m) - (2.0 / u.squaredNorm()) * u * u.transpose();
    return h.rightCols(m - 1);
}

Matrix cholesky_lower(const Matrix& s) {
    require_finite(s, "cholesky_lower");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    require_symmetric(s, 1e-10 * scale, "cholesky_lower");
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "cholesky_lower: matrix is not positive definite");
    }
    Matrix c = llt.matrixL();
    for (Index i = 0; i < c.rows(); ++i) {
        if (!(c(i, i) > 0.0)) {
            throw Error(ErrorCode::NotPositiveDefinite, "cholesky_lower: non-positive pivot");
        }
    }
    return c;
}

namespace {

Matrix spd_power(const Matrix& s, bool inverse) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::ConvergenceFailure, "spd_power: eigendecomposition failed");
    }
    const Vector& values = eig.eigenvalues();
    if (values.size() > 0 && !(values.minCoeff() > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "spd_power: matrix is not positive definite");
    }
    const Vector d = inverse ? values.cwiseSqrt().cwiseInverse().eval() : values.cwiseSqrt().eval();
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Matrix sqrt_spd(const Matrix& s) { return spd_power(s, false); }
Matrix inv_sqrt_spd(const Matrix& s) { return spd_power(s, true); }

}  // namespace kpst
