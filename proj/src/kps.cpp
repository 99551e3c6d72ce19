#include "kpst/kps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "kpst/dist.hpp"

namespace kpst {

namespace {

std::string format_double(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Smallest eigenvalue of a symmetric matrix relative to its largest absolute one.
double min_relative_eigenvalue(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s), Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return ev(0) / scale;
}

Matrix second_moment(const Matrix& x) {
    return (x.transpose() * x) / static_cast<double>(x.rows());
}

// Premultiplying each row x_i by C' where C C' = (X'X/n)^{-1}.
Matrix whiten(const Matrix& x, const char* what) {
    const Matrix s = second_moment(x);
    if (min_relative_eigenvalue(s) <= 1e-12) {
        throw Error(ErrorCode::SingularSecondMoment,
                    std::string("second moment of ") + what + " is singular; cannot normalize");
    }
    const Matrix c = cholesky_lower(symmetrize(s.inverse()));
    return x * c;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    return m == Method::Kpst ? "kpst" : "kpst-star";
}

std::vector<std::size_t> cluster_ids(const std::vector<std::string>& labels) {
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::size_t> ids;
    ids.reserve(labels.size());
    for (const auto& label : labels) {
        const auto [it, inserted] = seen.try_emplace(label, seen.size());
        ids.push_back(it->second);
    }
    return ids;
}

KpsSample::KpsSample(Matrix vhat, Matrix z, std::optional<std::vector<std::size_t>> clusters)
    : vhat_(std::move(vhat)), z_(std::move(z)), clusters_(std::move(clusters)) {
    if (vhat_.cols() < 2 || z_.cols() < 2) {
        std::ostringstream os;
        os << "KPS testing needs p >= 2 and k >= 2 (got p=" << vhat_.cols() << ", k=" << z_.cols()
           << "); with p = 1 or k = 1 the null is always true";
        throw Error(ErrorCode::DimensionError, os.str());
    }
    if (vhat_.rows() != z_.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "residuals and regressors must have the same number of rows");
    }
    if (vhat_.rows() < 2) {
        throw Error(ErrorCode::InvalidArgument, "at least two observations are required");
    }
    require_finite(vhat_, "residuals");
    require_finite(z_, "regressors");
    n_effective_ = vhat_.rows();
    if (clusters_) {
        if (static_cast<Index>(clusters_->size()) != vhat_.rows()) {
            throw Error(ErrorCode::ShapeMismatch, "cluster labels must have one entry per row");
        }
        std::vector<std::size_t> distinct = *clusters_;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) {
            throw Error(ErrorCode::TooFewClusters, "clustered data needs at least two distinct clusters");
        }
        n_effective_ = static_cast<Index>(distinct.size());
    }
}

KpsSample KpsSample::with_labels(Matrix vhat, Matrix z, const std::vector<std::string>& labels) {
    return KpsSample(std::move(vhat), std::move(z), cluster_ids(labels));
}

MomentSet build_moments(const KpsSample& sample, bool normalize) {
    const Index n = sample.n();
    const Index p = sample.p();
    const Index k = sample.k();
    if (sample.vhat().isZero(0.0)) {
        throw Error(ErrorCode::DegenerateSample, "residuals are identically zero");
    }

    Matrix v = normalize ? whiten(sample.vhat(), "residuals") : sample.vhat();
    Matrix z = normalize ? whiten(sample.z(), "regressors") : sample.z();

    MomentSet out;
    out.p = p;
    out.k = k;
    out.normalized = normalize;
    out.clustered = sample.clustered();

    Matrix f(n, p * k);
    for (Index a = 0; a < p; ++a) {
        f.middleCols(a * k, k) = z.array().colwise() * v.col(a).array();
    }

    if (!sample.clustered()) {
        out.f = std::move(f);
        return out;
    }
    // Aggregated rows follow ascending cluster id.
    const auto& ids = *sample.clusters();
    std::vector<std::size_t> distinct = ids;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    out.f = Matrix::Zero(static_cast<Index>(distinct.size()), p * k);
    for (Index i = 0; i < n; ++i) {
        const auto row = std::lower_bound(distinct.begin(), distinct.end(), ids[i]) - distinct.begin();
        out.f.row(row) += f.row(i);
    }
    return out;
}

Matrix KpsEstimates::rearranged() const {
    return duplication_matrix(p) * r_star * duplication_matrix(k).transpose();
}

KpsEstimates estimate(const MomentSet& moments) {
    const Index n = moments.f.rows();
    const Index p = moments.p;
    const Index k = moments.k;
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "estimate: need at least two independent units");
    if (moments.f.cols() != p * k) throw Error(ErrorCode::ShapeMismatch, "estimate: moment width is not k*p");
    require_finite(moments.f, "moments");

    const Index ps = tri(p);
    const Index ks = tri(k);
    const Index m = ps * ks;

    // Column i holds vec(R*_i), R*_i = vech-projected rearrangement of f_i f_i'.
    Matrix x(m, n);
    for (Index i = 0; i < n; ++i) {
        const auto fi = moments.f.row(i);
        double* col = x.col(i).data();
        for (Index d = 0; d < k; ++d) {
            for (Index c = d; c < k; ++c) {
                const Index cd = vech_index(c, d, k);
                for (Index b = 0; b < p; ++b) {
                    for (Index a = b; a < p; ++a) {
                        const double val = 0.5 * (fi(a * k + c) * fi(b * k + d) + fi(b * k + c) * fi(a * k + d));
                        col[cd * ps + vech_index(a, b, p)] = val;
                    }
                }
            }
        }
    }

    KpsEstimates est;
    est.p = p;
    est.k = k;
    est.n = n;
    const double inv_n = 1.0 / static_cast<double>(n);
    est.r_hat = (moments.f.transpose() * moments.f) * inv_n;
    const Vector mean = x.rowwise().mean();
    est.r_star = unvec(mean, ps, ks);
    x.colwise() -= mean;
    const Eigen::HouseholderQR<Matrix> qr(x.transpose() * std::sqrt(inv_n));
    est.v_star_root = qr.matrixQR().topRows(std::min(n, m)).triangularView<Eigen::Upper>();
    est.v_star = symmetrize(est.v_star_root.transpose() * est.v_star_root);

    if (!est.r_hat.allFinite() || est.r_hat.trace() <= 0.0) {
        throw Error(ErrorCode::DegenerateSample, "sample covariance of the moments is zero or non-finite");
    }
    if (min_relative_eigenvalue(est.r_hat) < -1e-10) {
        throw Error(ErrorCode::DegenerateSample, "sample covariance of the moments is not positive semi-definite");
    }

    const Matrix dd = kron(duplication_matrix(k), duplication_matrix(p));
    est.v_hat = dd * est.v_star * dd.transpose();
    return est;
}

NkpFit nearest_kps(const Matrix& r_hat, Index p, Index k) {
    require_finite(r_hat, "nearest_kps");
    const double scale = std::max(1.0, r_hat.cwiseAbs().maxCoeff());
    if (r_hat.rows() == r_hat.cols() && max_asymmetry(r_hat) > 1e-10 * scale) {
        throw Error(ErrorCode::NotSymmetric, "nearest_kps: covariance matrix must be symmetric");
    }
    NkpFit fit = nearest_kps_rearranged(rearrange(r_hat, p, k), p, k);
    if (min_relative_eigenvalue(r_hat) <= 0.0) {
        fit.warnings.emplace_back(
            "covariance matrix is not positive definite; the fitted factors may not be positive definite");
    }
    return fit;
}

NkpFit nearest_kps_rearranged(const Matrix& rearranged, Index p, Index k) {
    if (rearranged.rows() != p * p || rearranged.cols() != k * k) {
        throw Error(ErrorCode::ShapeMismatch, "nearest_kps: rearranged matrix must be p^2 x k^2");
    }
    NkpFit fit;
    fit.svd = svd_partitioned(rearranged);
    const Vector& sigma = fit.svd.sigma();
    const double s1 = sigma(0);
    if (!(s1 > 0.0)) {
        throw Error(ErrorCode::DegenerateSample, "nearest_kps: matrix is zero");
    }
    const double l11 = fit.svd.l11();
    if (!(std::abs(l11) > 1e-12)) {
        throw Error(ErrorCode::BlockSingular,
                    "nearest_kps: leading left singular vector has zero first entry; G1 cannot be normalized");
    }

    const Matrix g1_raw = unvec(fit.svd.l1() / l11, p, p);
    const Matrix g2_raw = unvec(l11 * s1 * fit.svd.n1(), k, k);
    fit.g1_asymmetry = max_asymmetry(g1_raw);
    fit.g2_asymmetry = max_asymmetry(g2_raw);
    fit.g1 = symmetrize(g1_raw);
    fit.g2 = symmetrize(g2_raw);
    fit.g1(0, 0) = 1.0;

    double tail = 0.0;
    for (Index i = 1; i < sigma.size(); ++i) tail += sigma(i) * sigma(i);
    fit.ds = std::sqrt(tail);

    const double s2 = sigma.size() > 1 ? sigma(1) : 0.0;
    fit.gap_ok = (s1 - s2) > 1e-10 * s1;
    if (!fit.gap_ok) {
        fit.warnings.emplace_back("near tie between the two largest singular values (sigma1 - sigma2 = " +
                                  format_double(s1 - s2) + "); the nearest KPS factors are not unique");
    }
    if (fit.g1_asymmetry > 1e-8 * fit.g1.cwiseAbs().maxCoeff() ||
        fit.g2_asymmetry > 1e-8 * fit.g2.cwiseAbs().maxCoeff()) {
        fit.warnings.emplace_back("fitted factors were noticeably asymmetric before symmetrization");
    }
    return fit;
}

RankOneDecomposition lambda_hat(const SvdPartition& svd) {
    if (svd.rows() < 2 || svd.cols() < 2) {
        throw Error(ErrorCode::DimensionError, "lambda_hat: need at least two rows and columns");
    }
    if (!(std::abs(svd.l11()) > 1e-12) || !(std::abs(svd.n11()) > 1e-12)) {
        throw Error(ErrorCode::BlockSingular, "lambda_hat: L22 or N22 is numerically singular");
    }
    const Matrix l22 = svd.l22();
    const Matrix n22 = svd.n22();
    const Matrix ll = symmetrize(l22 * l22.transpose());
    const Matrix nn = symmetrize(n22 * n22.transpose());

    Eigen::PartialPivLU<Matrix> l22_lu(l22);
    Eigen::PartialPivLU<Matrix> n22_lu(n22);

    RankOneDecomposition out;
    out.left_perp = svd.l2() * l22_lu.solve(sqrt_spd(ll));
    out.right_perp = svd.n2() * n22_lu.solve(sqrt_spd(nn));
    out.lambda = inv_sqrt_spd(ll) * l22 * svd.sigma2() * n22.transpose() * inv_sqrt_spd(nn);
    return out;
}

bool KpsResult::reject(double level) const {
    return statistic > chi2_quantile(1.0 - level, df);
}

int degrees_of_freedom(Index p, Index k) {
    return static_cast<int>((tri(k) - 1) * (tri(p) - 1));
}

KpsResult statistic_from_estimates(const KpsEstimates& est, Method method, const KpsOptions& options) {
    const int df = degrees_of_freedom(est.p, est.k);
    const RankPolicy policy = options.rank_policy.value_or(FixedRank{df});

    KpsResult result;
    result.method = method;
    result.formula = options.formula;
    result.df = df;
    result.p = est.p;
    result.k = est.k;
    result.n_effective = est.n;
    result.nkp = nearest_kps_rearranged(est.rearranged(), est.p, est.k);
    result.warnings = result.nkp.warnings;

    const SvdPartition star_svd = method == Method::KpstStar ? svd_partitioned(est.r_star) : SvdPartition{};
    const SvdPartition& svd = method == Method::KpstStar ? star_svd : result.nkp.svd;

    Vector x;
    Matrix j;
    if (options.formula == Formula::Full) {
        const RankOneDecomposition dec = lambda_hat(svd);
        j = kron(dec.right_perp, dec.left_perp);
        x = vec(dec.lambda);
    } else {
        j = kron(svd.n2(), svd.l2());
        x = vec(svd.sigma2());
    }
    // The weight J' cov J equals F'F; working with F keeps its conditioning unsquared.
    const Matrix f = method == Method::KpstStar
                         ? Matrix(est.v_star_root * j)
                         : Matrix(est.v_star_root * (kron(duplication_matrix(est.k), duplication_matrix(est.p)).transpose() * j));
    const Eigen::JacobiSVD<Matrix> fsvd(f, Eigen::ComputeThinV);
    const Vector& s = fsvd.singularValues();
    const double lambda_max = s.size() > 0 ? s(0) * s(0) : 0.0;

    Index keep = 0;
    if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
        if (fixed->rank < 0 || fixed->rank > j.cols()) {
            throw Error(ErrorCode::RankExceedsDimension, "rank " + std::to_string(fixed->rank) + " exceeds dimension");
        }
        keep = std::min<Index>(fixed->rank, s.size());
    } else {
        const double cutoff = std::get<Tolerance>(policy).rtol * lambda_max;
        while (keep < s.size() && s(keep) * s(keep) > cutoff && s(keep) > 0.0) ++keep;
    }
    const Vector proj = fsvd.matrixV().leftCols(keep).transpose() * x;
    double quad = 0.0;
    for (Index r = 0; r < keep; ++r) {
        if (s(r) > 0.0) quad += (proj(r) / s(r)) * (proj(r) / s(r));
    }
    result.statistic = std::max(0.0, static_cast<double>(est.n) * quad);
    result.p_value = chi2_sf(result.statistic, df);

    if (keep < df || (keep > 0 && s(keep - 1) * s(keep - 1) <= 1e-10 * lambda_max)) {
        result.warnings.emplace_back("covariance of the restrictions is rank deficient relative to df = " +
                                     std::to_string(df));
    }
    return result;
}

namespace {

KpsResult run(const KpsSample& sample, const KpsOptions& options, Method method) {
    const MomentSet moments = build_moments(sample, options.normalize);
    const KpsEstimates est = estimate(moments);
    KpsResult result = statistic_from_estimates(est, method, options);
    result.clustered = sample.clustered();
    result.normalized = options.normalize;
    result.n = sample.n();
    result.n_effective = sample.n_effective();
    const double pk = static_cast<double>(sample.p() * sample.k());
    if (static_cast<double>(result.n_effective) < std::pow(pk, 4.0)) {
        std::ostringstream os;
        os << "small sample: n = " << result.n_effective << " < (pk)^4 = " << std::pow(pk, 4.0)
           << "; the chi-square approximation tends to over-reject";
        result.warnings.push_back(os.str());
    }
    return result;
}

}  // namespace

KpsResult kpst(const KpsSample& sample, const KpsOptions& options) {
    return run(sample, options, Method::Kpst);
}

KpsResult kpst_star(const KpsSample& sample, const KpsOptions& options) {
    return run(sample, options, Method::KpstStar);
}

double noncentrality(const NoncentralitySpec& spec) {
    const Index p = spec.g1.rows();
    const Index k = spec.g2.rows();
    if (spec.g1.cols() != p || spec.g2.cols() != k || p < 2 || k < 2) {
        throw Error(ErrorCode::ShapeMismatch, "noncentrality: G1 and G2 must be square with dimension >= 2");
    }
    if (spec.a0_full.rows() != p * k || spec.a0_full.cols() != p * k) {
        throw Error(ErrorCode::ShapeMismatch, "noncentrality: A0 must be kp x kp");
    }
    const Index m = tri(p) * tri(k);
    if (spec.v_rstar.rows() != m || spec.v_rstar.cols() != m) {
        throw Error(ErrorCode::ShapeMismatch, "noncentrality: V_R* has the wrong dimension");
    }
    require_finite(spec.a0_full, "A0");
    require_finite(spec.v_rstar, "V_R*");
    if (max_asymmetry(spec.a0_full) > 1e-10 * std::max(1.0, spec.a0_full.cwiseAbs().maxCoeff())) {
        throw Error(ErrorCode::NotSymmetric, "noncentrality: A0 must be symmetric");
    }

    const Vector v1 = vec(spec.g1).normalized();
    const Vector v2 = vec(spec.g2).normalized();
    const Matrix perp1 = orth_complement(v1);
    const Matrix perp2 = orth_complement(v2);
    const Vector a0 = vec(perp1.transpose() * rearrange(spec.a0_full, p, k) * perp2);

    const Matrix dd = kron(duplication_matrix(k), duplication_matrix(p));
    const Matrix j = kron(perp2, perp1).transpose() * dd;
    const Matrix weight = symmetrize(j * spec.v_rstar * j.transpose());
    const Matrix inv = pseudo_inverse(weight, FixedRank{degrees_of_freedom(p, k)});
    return std::max(0.0, a0.dot(inv * a0));
}

Matrix gaussian_vrstar(const Matrix& g1, const Matrix& g2) {
    const auto vech_moment = [](const Matrix& s) {
        const Index m = s.rows();
        const Matrix dp = duplication_pinv(m);
        const Vector h = vech(symmetrize(s), 1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()));
        // cov(vech(XX')) = 2 D+ (S (x) S) D+' for X ~ N(0, S).
        const Matrix cov = 2.0 * dp * kron(s, s) * dp.transpose();
        return std::pair<Matrix, Vector>{cov + h * h.transpose(), h};
    };
    const auto [m1, h1] = vech_moment(g1);
    const auto [m2, h2] = vech_moment(g2);
    const Vector mean = kron(h2, h1);
    return kron(m2, m1) - mean * mean.transpose();
}

}  // namespace kpst
