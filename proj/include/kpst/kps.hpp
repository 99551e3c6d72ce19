#pragma once

// Test of Kronecker product structure (KPS) for the covariance matrix of
// moment vectors f_i = V_i (x) Z_i: moment construction, covariance
// estimators, the nearest-KPS fit, the KPST / KPST* Wald statistics and
// the local-power noncentrality parameter.

#include <optional>
#include <string>
#include <vector>

#include "kpst/linalg.hpp"

namespace kpst {

/// Residuals (n x p) and regressors (n x k) with optional cluster ids.
/// Requires n >= 2, p >= 2, k >= 2, finite entries and, when clustered,
/// at least two distinct clusters.
class KpsSample {
public:
    KpsSample(Matrix vhat, Matrix z, std::optional<std::vector<std::size_t>> clusters = std::nullopt);

    /// Builds dense cluster ids from arbitrary labels (first appearance order).
    static KpsSample with_labels(Matrix vhat, Matrix z, const std::vector<std::string>& labels);

    [[nodiscard]] Index n() const noexcept { return vhat_.rows(); }
    [[nodiscard]] Index p() const noexcept { return vhat_.cols(); }
    [[nodiscard]] Index k() const noexcept { return z_.cols(); }
    [[nodiscard]] const Matrix& vhat() const noexcept { return vhat_; }
    [[nodiscard]] const Matrix& z() const noexcept { return z_; }
    [[nodiscard]] const std::optional<std::vector<std::size_t>>& clusters() const noexcept { return clusters_; }
    [[nodiscard]] bool clustered() const noexcept { return clusters_.has_value(); }
    /// Number of independent units: clusters when clustered, otherwise n.
    [[nodiscard]] Index n_effective() const noexcept { return n_effective_; }

private:
    Matrix vhat_;
    Matrix z_;
    std::optional<std::vector<std::size_t>> clusters_;
    Index n_effective_ = 0;
};

std::vector<std::size_t> cluster_ids(const std::vector<std::string>& labels);

struct MomentSet {
    /// One row per independent unit: (V_i (x) Z_i)', summed within clusters.
    Matrix f;
    Index p = 0;
    Index k = 0;
    bool normalized = false;
    bool clustered = false;
};

/// Forms the moment rows. With normalize, V and Z are first premultiplied
/// by C1', C2' where C C' is the inverse of the sample second moment
/// (lower Cholesky factor), so the whitened second moments are identities.
MomentSet build_moments(const KpsSample& sample, bool normalize = true);

struct KpsEstimates {
    Index p = 0;
    Index k = 0;
    Index n = 0;
    /// (1/n) sum f_i f_i', kp x kp.
    Matrix r_hat;
    /// (1/n) sum vech(V V') vech(Z Z')', p(p+1)/2 x k(k+1)/2.
    Matrix r_star;
    /// Covariance estimate of vec(rearrange(r_hat)), p^2 k^2 square.
    Matrix v_hat;
    /// Covariance estimate of vec(r_star).
    Matrix v_star;
    /// Upper-trapezoidal factor with v_star = v_star_root' v_star_root.
    Matrix v_star_root;

    /// D_p r_star D_k', the rearranged covariance restricted to symmetric blocks.
    [[nodiscard]] Matrix rearranged() const;
};

/// Per-unit moments are reduced to vec(vech(.) vech(.)') vectors by
/// symmetrising the rearranged outer product f_i f_i' (a no-op for single
/// observations, where the blocks of f_i f_i' are already symmetric).
/// The covariance is the centred outer-product average over units.
KpsEstimates estimate(const MomentSet& moments);

struct NkpFit {
    Matrix g1;  ///< p x p, g1(0,0) == 1
    Matrix g2;  ///< k x k
    double ds = 0.0;
    SvdPartition svd;
    bool gap_ok = true;
    double g1_asymmetry = 0.0;
    double g2_asymmetry = 0.0;
    std::vector<std::string> warnings;
};

/// Nearest Kronecker product G1 (x) G2 to r_hat in Frobenius norm.
NkpFit nearest_kps(const Matrix& r_hat, Index p, Index k);
/// Same fit, starting from an already rearranged p^2 x k^2 matrix.
NkpFit nearest_kps_rearranged(const Matrix& rearranged, Index p, Index k);

/// M = v1 w1' + left_perp * lambda * right_perp' where (v1, w1) is the
/// leading singular pair and left_perp / right_perp are orthonormal bases of
/// the complements of v1 and w1 built from the SVD blocks.
struct RankOneDecomposition {
    Matrix lambda;
    Matrix left_perp;
    Matrix right_perp;
};
RankOneDecomposition lambda_hat(const SvdPartition& svd);
inline RankOneDecomposition lambda_hat(const NkpFit& fit) { return lambda_hat(fit.svd); }

enum class Method { Kpst, KpstStar };
enum class Formula { Full, Simplified };

std::string_view to_string(Method m) noexcept;

struct KpsOptions {
    bool normalize = true;
    Formula formula = Formula::Full;
    /// Defaults to FixedRank(df).
    std::optional<RankPolicy> rank_policy;
};

struct KpsResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    Method method = Method::Kpst;
    Formula formula = Formula::Full;
    bool clustered = false;
    bool normalized = false;
    Index n = 0;
    Index n_effective = 0;
    Index p = 0;
    Index k = 0;
    NkpFit nkp;
    std::vector<std::string> warnings;

    [[nodiscard]] bool reject(double level) const;
};

/// (k(k+1)/2 - 1)(p(p+1)/2 - 1).
int degrees_of_freedom(Index p, Index k);

KpsResult kpst(const KpsSample& sample, const KpsOptions& options = {});
KpsResult kpst_star(const KpsSample& sample, const KpsOptions& options = {});

/// Lower-level entry used by the Monte Carlo harness: evaluates one
/// statistic on precomputed estimates.
KpsResult statistic_from_estimates(const KpsEstimates& est, Method method, const KpsOptions& options);

struct NoncentralitySpec {
    Matrix g1;       ///< p x p SPD
    Matrix g2;       ///< k x k SPD
    Matrix a0_full;  ///< kp x kp symmetric local deviation
    Matrix v_rstar;  ///< asymptotic covariance of vec(R*)
};

/// delta = vec(a0)' [J' (D_k (x) D_p) V_R* (D_k (x) D_p)' J]^- vec(a0), with
/// a0 = vec(G1)_perp' rearrange(A0) vec(G2)_perp and J = vec(G2)_perp (x) vec(G1)_perp.
double noncentrality(const NoncentralitySpec& spec);

/// V_R* when V ~ N(0, G1) and Z ~ N(0, G2) are independent.
Matrix gaussian_vrstar(const Matrix& g1, const Matrix& g2);

}  // namespace kpst
