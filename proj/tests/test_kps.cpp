#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kpst/dist.hpp"
#include "kpst/error.hpp"
#include "kpst/kps.hpp"
#include "kpst/montecarlo.hpp"
#include "oracles.hpp"

using namespace kpst;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no kpst::Error thrown";
    return ErrorCode::InvalidArgument;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Matrix diag4(double a, double b, double c, double d) {
    Matrix m = Matrix::Zero(4, 4);
    m.diagonal() << a, b, c, d;
    return m;
}

}  // namespace

TEST(KpsSample, Validation) {
    std::mt19937_64 gen(1);
    const Matrix z = oracle::random_normal(10, 3, gen);
    EXPECT_EQ(code_of([&] { KpsSample(oracle::random_normal(10, 1, gen), z); }), ErrorCode::DimensionError);
    EXPECT_EQ(code_of([&] { KpsSample(oracle::random_normal(9, 2, gen), z); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { KpsSample(oracle::random_normal(10, 2, gen), z, std::vector<std::size_t>(10, 4)); }),
              ErrorCode::TooFewClusters);
    Matrix bad = oracle::random_normal(10, 2, gen);
    bad(3, 1) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { KpsSample(bad, z); }), ErrorCode::InvalidArgument);
}

TEST(KpsSample, ClusterLabels) {
    const auto ids = cluster_ids({"A", "A", "B"});
    EXPECT_EQ(ids, (std::vector<std::size_t>{0, 0, 1}));
    std::mt19937_64 gen(2);
    const KpsSample s =
        KpsSample::with_labels(oracle::random_normal(3, 2, gen), oracle::random_normal(3, 2, gen), {"A", "A", "B"});
    EXPECT_TRUE(s.clustered());
    EXPECT_EQ(s.n_effective(), 2);
    EXPECT_EQ(cluster_ids({"x", "y", "x", "z"}), (std::vector<std::size_t>{0, 1, 0, 2}));
}

TEST(BuildMoments, KroneckerRows) {
    Matrix v(4, 2);
    v << 1, 0, 0, 1, 1, 0, 0, 1;
    const Matrix z = v;
    const MomentSet m = build_moments(KpsSample(v, z), false);
    ASSERT_EQ(m.f.rows(), 4);
    ASSERT_EQ(m.f.cols(), 4);
    EXPECT_EQ(m.f.row(0), (Vector(4) << 1, 0, 0, 0).finished().transpose());
    EXPECT_EQ(m.f.row(1), (Vector(4) << 0, 0, 0, 1).finished().transpose());

    std::mt19937_64 gen(3);
    const Matrix vv = oracle::random_normal(7, 3, gen);
    const Matrix zz = oracle::random_normal(7, 2, gen);
    const MomentSet g = build_moments(KpsSample(vv, zz), false);
    for (Index i = 0; i < 7; ++i) {
        const Vector expected = kron(vv.row(i).transpose(), zz.row(i).transpose());
        EXPECT_LT((g.f.row(i).transpose() - expected).norm(), 1e-15);
    }
}

TEST(BuildMoments, WhitenedSecondMomentsAreIdentity) {
    std::mt19937_64 gen(4);
    const Matrix v = oracle::random_normal(200, 3, gen) * oracle::random_normal(3, 3, gen);
    const Matrix z = oracle::random_normal(200, 2, gen) * oracle::random_normal(2, 2, gen);
    const MomentSet m = build_moments(KpsSample(v, z), true);
    const Matrix sv = v.transpose() * v / 200.0;
    const Matrix c1 = Eigen::LLT<Matrix>(sv.inverse()).matrixL();
    const Matrix w = v * c1;
    EXPECT_LT((w.transpose() * w / 200.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    const Matrix sz = z.transpose() * z / 200.0;
    const Matrix c2 = Eigen::LLT<Matrix>(sz.inverse()).matrixL();
    const Matrix zw = z * c2;
    EXPECT_LT((zw.transpose() * zw / 200.0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    const MomentSet manual = build_moments(KpsSample(w, zw), false);
    EXPECT_LT((manual.f - m.f).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(m.normalized);
}

TEST(BuildMoments, ClusterSums) {
    std::mt19937_64 gen(5);
    const Matrix v = oracle::random_normal(4, 2, gen);
    const Matrix z = oracle::random_normal(4, 2, gen);
    const MomentSet single = build_moments(KpsSample(v, z), false);
    const MomentSet clustered = build_moments(KpsSample(v, z, std::vector<std::size_t>{1, 1, 2, 2}), false);
    ASSERT_EQ(clustered.f.rows(), 2);
    EXPECT_LT((clustered.f.row(0) - single.f.row(0) - single.f.row(1)).norm(), 1e-15);
    EXPECT_LT((clustered.f.row(1) - single.f.row(2) - single.f.row(3)).norm(), 1e-15);
    EXPECT_TRUE(clustered.clustered);
}

TEST(BuildMoments, SingularSecondMoment) {
    std::mt19937_64 gen(6);
    Matrix v = oracle::random_normal(50, 2, gen);
    v.col(1) = 2.0 * v.col(0);
    EXPECT_EQ(code_of([&] { (void)build_moments(KpsSample(v, oracle::random_normal(50, 2, gen)), true); }),
              ErrorCode::SingularSecondMoment);
    EXPECT_EQ(code_of([&] { (void)build_moments(KpsSample(Matrix::Zero(50, 2), oracle::random_normal(50, 2, gen)), true); }),
              ErrorCode::DegenerateSample);
}

TEST(Estimate, MatchesLoopOracle) {
    std::mt19937_64 gen(7);
    for (auto [p, k] : {std::pair<Index, Index>{2, 2}, {2, 3}, {3, 2}, {3, 3}}) {
        const auto [v, z] = oracle::generic_sample(60, p, k, gen);
        const KpsEstimates est = estimate(build_moments(KpsSample(v, z), false));
        const oracle::MomentEstimates ref = oracle::moment_estimates(v, z);
        const double scale = ref.v_star.cwiseAbs().maxCoeff();
        EXPECT_LT((est.r_hat - ref.r_hat).cwiseAbs().maxCoeff(), 1e-12 * ref.r_hat.cwiseAbs().maxCoeff());
        EXPECT_LT((est.r_star - ref.r_star).cwiseAbs().maxCoeff(), 1e-12 * ref.r_star.cwiseAbs().maxCoeff());
        EXPECT_LT((est.v_star - ref.v_star).cwiseAbs().maxCoeff(), 1e-11 * scale);
        EXPECT_LT((est.rearranged() - oracle::rearrange(ref.r_hat, p, k)).cwiseAbs().maxCoeff(),
                  1e-12 * ref.r_hat.cwiseAbs().maxCoeff());
        // v_hat is the covariance of the per-unit rearranged outer products.
        Matrix xs(p * p * k * k, 60);
        for (Index i = 0; i < 60; ++i) {
            Vector f(p * k);
            for (Index a = 0; a < p; ++a)
                for (Index c = 0; c < k; ++c) f(a * k + c) = v(i, a) * z(i, c);
            const Matrix ri = oracle::rearrange(f * f.transpose(), p, k);
            xs.col(i) = Eigen::Map<const Vector>(ri.data(), ri.size());
        }
        const Vector mean = xs.rowwise().mean();
        xs.colwise() -= mean;
        const Matrix vhat_ref = xs * xs.transpose() / 60.0;
        EXPECT_LT((est.v_hat - vhat_ref).cwiseAbs().maxCoeff(), 1e-11 * vhat_ref.cwiseAbs().maxCoeff());
    }
}

TEST(Estimate, TwoObservationHandSums) {
    Matrix v(2, 2), z(2, 2);
    v << 1, 2, -1, 1;
    z << 1, 0, 2, 1;
    const KpsEstimates est = estimate(build_moments(KpsSample(v, z), false));
    const Vector f1 = (Vector(4) << 1, 0, 2, 0).finished();
    const Vector f2 = (Vector(4) << -2, -1, 2, 1).finished();
    const Matrix expected = 0.5 * (f1 * f1.transpose() + f2 * f2.transpose());
    EXPECT_LT((est.r_hat - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Estimate, ConstantMomentsHaveZeroVariance) {
    MomentSet m;
    m.p = 2;
    m.k = 2;
    m.f = Matrix::Ones(5, 4);
    const KpsEstimates est = estimate(m);
    EXPECT_LT(est.v_star.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(NearestKps, ExactKroneckerInput) {
    Matrix g1 = Matrix::Zero(2, 2);
    g1.diagonal() << 1, 2;
    Matrix g2(2, 2);
    g2 << 1, .3, .3, 1;
    const NkpFit fit = nearest_kps(kron(g1, g2), 2, 2);
    EXPECT_LT(fit.ds, 1e-10);
    EXPECT_LT((fit.g1 - g1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((fit.g2 - g2).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(fit.gap_ok);
}

TEST(NearestKps, DiagonalHandSvd) {
    const NkpFit fit = nearest_kps(diag4(1.5, .5, .5, 1.5), 2, 2);
    EXPECT_NEAR(fit.ds, 1.0, 1e-12);
    EXPECT_LT((fit.g1 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((fit.g2 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(fit.svd.sigma()(0), 2.0, 1e-12);
    EXPECT_NEAR(fit.svd.sigma()(1), 1.0, 1e-12);
    EXPECT_NEAR(fit.svd.sigma()(2), 0.0, 1e-12);
    const oracle::AlsFit als = oracle::als_rank_one(oracle::rearrange(diag4(1.5, .5, .5, 1.5), 2, 2));
    EXPECT_NEAR(als.ds, 1.0, 1e-9);
}

TEST(NearestKps, MatchesAlsOracleOnRandomSpd) {
    std::mt19937_64 gen(8);
    for (int t = 0; t < 30; ++t) {
        const Index p = 2 + t % 2;
        const Index k = 2 + (t / 2) % 2;
        const Matrix r = oracle::random_spd(p * k, gen);
        const NkpFit fit = nearest_kps(r, p, k);
        const oracle::AlsFit als = oracle::als_rank_one(oracle::rearrange(r, p, k));
        EXPECT_LT(rel(fit.ds, als.ds), 1e-6) << "trial " << t;
        EXPECT_EQ(fit.g1(0, 0), 1.0);
        EXPECT_EQ(fit.g1, fit.g1.transpose());
        EXPECT_EQ(fit.g2, fit.g2.transpose());
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(fit.g1).eigenvalues().minCoeff(), 0.0);
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(fit.g2).eigenvalues().minCoeff(), 0.0);
        const double fit_err = (oracle::rearrange(r, p, k) - oracle::rearrange(kron(fit.g1, fit.g2), p, k)).norm();
        EXPECT_NEAR(fit_err, fit.ds, 1e-10 * r.norm());
    }
}

TEST(NearestKps, Failures) {
    EXPECT_EQ(code_of([] { (void)nearest_kps(Matrix::Zero(4, 4), 2, 2); }), ErrorCode::DegenerateSample);
    Matrix asym = Matrix::Identity(4, 4);
    asym(0, 1) = 0.5;
    EXPECT_EQ(code_of([&] { (void)nearest_kps(asym, 2, 2); }), ErrorCode::NotSymmetric);
    EXPECT_EQ(code_of([] { (void)nearest_kps(Matrix::Identity(6, 6), 2, 2); }), ErrorCode::ShapeMismatch);
    Matrix m = Matrix::Zero(4, 4);
    m(1, 0) = 1.0;
    EXPECT_EQ(code_of([&] { (void)nearest_kps_rearranged(m, 2, 2); }), ErrorCode::BlockSingular);
}

TEST(NearestKps, NearTieWarns) {
    const Vector u = (Vector(4) << 1, 1, 0, 0).finished() / std::sqrt(2.0);
    const Vector w = (Vector(4) << 1, -1, 0, 0).finished() / std::sqrt(2.0);
    const Vector e1 = Vector::Unit(4, 0);
    const Vector e2 = Vector::Unit(4, 1);
    const Matrix m = 1.2 * u * e1.transpose() + 1.2 * (1.0 - 1e-13) * w * e2.transpose();
    const NkpFit fit = nearest_kps_rearranged(m, 2, 2);
    EXPECT_FALSE(fit.gap_ok);
    EXPECT_FALSE(fit.warnings.empty());
}

TEST(LambdaHat, ExactKpsIsZero) {
    std::mt19937_64 gen(9);
    const Matrix g1 = oracle::random_spd(3, gen);
    const Matrix g2 = oracle::random_spd(2, gen);
    const NkpFit fit = nearest_kps(kron(g1, g2), 3, 2);
    const RankOneDecomposition d = lambda_hat(fit);
    EXPECT_LT(d.lambda.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(d.lambda.rows(), 8);
    EXPECT_EQ(d.lambda.cols(), 3);
}

TEST(LambdaHat, CarriesTrailingSingularValues) {
    const NkpFit fit = nearest_kps(diag4(1.5, .5, .5, 1.5), 2, 2);
    EXPECT_NEAR(lambda_hat(fit).lambda.norm(), 1.0, 1e-12);
    EXPECT_NEAR(lambda_hat(fit).lambda.norm(), fit.ds, 1e-12);
}

TEST(LambdaHat, DecompositionIdentity) {
    std::mt19937_64 gen(10);
    for (int t = 0; t < 10; ++t) {
        const Matrix m = oracle::random_normal(4 + 5 * (t % 2), 9, gen);
        const SvdPartition s = svd_partitioned(m);
        const RankOneDecomposition d = lambda_hat(s);
        const Matrix rebuilt = s.sigma1() * s.l1() * s.n1().transpose() + d.left_perp * d.lambda * d.right_perp.transpose();
        EXPECT_LT((rebuilt - m).cwiseAbs().maxCoeff(), 1e-10);
        const Index a = d.left_perp.cols();
        const Index b = d.right_perp.cols();
        EXPECT_LT((d.left_perp.transpose() * d.left_perp - Matrix::Identity(a, a)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((d.right_perp.transpose() * d.right_perp - Matrix::Identity(b, b)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((d.left_perp.transpose() * s.l1()).norm(), 1e-10);
        EXPECT_LT((d.right_perp.transpose() * s.n1()).norm(), 1e-10);
        EXPECT_NEAR(d.lambda.norm(), std::sqrt(s.sigma().tail(s.sigma().size() - 1).squaredNorm()), 1e-10);
    }
}

TEST(Kpst, DegreesOfFreedom) {
    EXPECT_EQ(degrees_of_freedom(2, 2), 4);
    EXPECT_EQ(degrees_of_freedom(2, 5), 28);
    EXPECT_EQ(degrees_of_freedom(3, 4), 45);
    EXPECT_EQ(degrees_of_freedom(3, 7), 135);
}

TEST(Kpst, NullSampleFullEqualsSimplified) {
    RngStream rng(1, 0);
    const KpsSample s = mc::dgp_null(2, 2, 1626, mc::Dgp::Homoskedastic, rng);
    KpsOptions simple;
    simple.formula = Formula::Simplified;
    const KpsResult full = kpst::kpst(s);
    const KpsResult simp = kpst::kpst(s, simple);
    EXPECT_TRUE(std::isfinite(full.statistic));
    EXPECT_LT(rel(simp.statistic, full.statistic), 1e-8);
    EXPECT_EQ(full.df, 4);
    EXPECT_NEAR(full.p_value, chi2_sf(full.statistic, 4), 1e-15);
    EXPECT_EQ(full.n, 1626);
    EXPECT_FALSE(full.clustered);
    EXPECT_TRUE(full.normalized);
}

TEST(Kpst, InvarianceProperties) {
    std::mt19937_64 gen(11);
    KpsOptions raw;
    raw.normalize = false;
    for (int t = 0; t < 10; ++t) {
        const Index p = 2 + t % 2;
        const Index k = 2 + (t / 2) % 2;
        const auto [v, z] = oracle::generic_sample(400, p, k, gen);
        const Matrix q = oracle::random_orthonormal(p, gen);
        const Matrix h = oracle::random_orthonormal(k, gen);
        const double base_raw = kpst::kpst(KpsSample(v, z), raw).statistic;
        EXPECT_LT(rel(kpst::kpst(KpsSample(v * q.transpose(), z * h.transpose()), raw).statistic, base_raw), 1e-8);
        EXPECT_LT(rel(kpst::kpst(KpsSample(3.7 * v, z), raw).statistic, base_raw), 1e-8);

        const Matrix b = oracle::random_normal(p, p, gen);
        const Matrix a = oracle::random_normal(k, k, gen);
        const double base = kpst::kpst(KpsSample(v, z)).statistic;
        EXPECT_LT(rel(kpst::kpst(KpsSample(v * b.transpose(), z * a.transpose())).statistic, base), 1e-8);
    }
}

TEST(Kpst, MatchesTextbookWaldOracle) {
    // Explicit J' V J, eigen pseudo-inverse with the top df eigenvalues.
    std::mt19937_64 gen(21);
    KpsOptions raw;
    raw.normalize = false;
    for (int t = 0; t < 200; ++t) {
        const Index p = 2 + t % 2;
        const Index k = 2 + (t / 2) % 2;
        const Index n = 150 + 10 * (t % 50);
        const auto [v, z] = oracle::generic_sample(n, p, k, gen);
        const oracle::MomentEstimates m = oracle::moment_estimates(v, z);
        const Matrix r = duplication_matrix(p) * m.r_star * duplication_matrix(k).transpose();
        Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Index rows = p * p;
        const Index cols = k * k;
        Matrix sigma2 = Matrix::Zero(rows - 1, cols - 1);
        for (Index i = 1; i < svd.singularValues().size(); ++i) sigma2(i - 1, i - 1) = svd.singularValues()(i);
        const Matrix j = kron(svd.matrixV().rightCols(cols - 1), svd.matrixU().rightCols(rows - 1));
        const Matrix dd = kron(duplication_matrix(k), duplication_matrix(p));
        const Matrix w = j.transpose() * dd * m.v_star * dd.transpose() * j;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (w + w.transpose()));
        const int df = degrees_of_freedom(p, k);
        const Vector x = Eigen::Map<const Vector>(sigma2.data(), sigma2.size());
        double quad = 0.0;
        for (Index i = w.rows() - df; i < w.rows(); ++i) {
            const double c = eig.eigenvectors().col(i).dot(x);
            quad += c * c / eig.eigenvalues()(i);
        }
        const double expected = static_cast<double>(n) * quad;
        EXPECT_LT(rel(kpst::kpst(KpsSample(v, z), raw).statistic, expected), 1e-8) << "trial " << t;
    }
}

TEST(KpstStar, NotRotationInvariant) {
    std::mt19937_64 gen(12);
    KpsOptions raw;
    raw.normalize = false;
    int changed = 0;
    for (int t = 0; t < 10; ++t) {
        const auto [v, z] = oracle::generic_sample(400, 2, 3, gen);
        const Matrix q = oracle::random_orthonormal(2, gen);
        const Matrix h = oracle::random_orthonormal(3, gen);
        const double base = kpst_star(KpsSample(v, z), raw).statistic;
        const double rotated = kpst_star(KpsSample(v * q.transpose(), z * h.transpose()), raw).statistic;
        changed += rel(rotated, base) > 1e-4 ? 1 : 0;
    }
    EXPECT_GT(changed, 5);
}

TEST(KpstStar, ExactKpsPopulationGivesLargePValue) {
    RngStream rng(3, 0);
    const KpsSample s = mc::dgp_null(2, 2, 20000, mc::Dgp::Homoskedastic, rng);
    const KpsResult r = kpst_star(s);
    EXPECT_EQ(r.method, Method::KpstStar);
    EXPECT_GT(r.p_value, 0.001);
    EXPECT_EQ(r.df, 4);
}

TEST(Kpst, SingletonClustersMatchUnclustered) {
    std::mt19937_64 gen(13);
    const auto [v, z] = oracle::generic_sample(300, 2, 3, gen);
    std::vector<std::size_t> ids(300);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = 299 - i;
    const KpsResult a = kpst::kpst(KpsSample(v, z));
    const KpsResult b = kpst::kpst(KpsSample(v, z, ids));
    EXPECT_LT(std::abs(a.statistic - b.statistic), 1e-12 * std::max(1.0, a.statistic));
    EXPECT_TRUE(b.clustered);
    EXPECT_EQ(b.n_effective, 300);
}

TEST(Kpst, ClusteredRunsAndUsesClusterCount) {
    std::mt19937_64 gen(14);
    const auto [v, z] = oracle::generic_sample(600, 2, 2, gen);
    std::vector<std::string> labels;
    for (int i = 0; i < 600; ++i) labels.push_back("c" + std::to_string(i % 150));
    const KpsResult r = kpst::kpst(KpsSample::with_labels(v, z, labels));
    EXPECT_TRUE(std::isfinite(r.statistic));
    EXPECT_EQ(r.n_effective, 150);
    EXPECT_EQ(r.n, 600);
    bool small = false;
    for (const auto& w : r.warnings) small = small || w.find("small sample") != std::string::npos;
    EXPECT_TRUE(small);
}

TEST(Kpst, TolerancePolicyOnFullRankMatchesFixed) {
    std::mt19937_64 gen(15);
    const auto [v, z] = oracle::generic_sample(500, 2, 2, gen);
    KpsOptions tol;
    tol.rank_policy = Tolerance{1e-10};
    EXPECT_LT(rel(kpst::kpst(KpsSample(v, z), tol).statistic, kpst::kpst(KpsSample(v, z)).statistic), 1e-8);
}

TEST(Noncentrality, ZeroAndKpsSpanDeviations) {
    const Matrix i2 = Matrix::Identity(2, 2);
    const Matrix vr = gaussian_vrstar(i2, i2);
    EXPECT_NEAR(noncentrality({i2, i2, Matrix::Zero(4, 4), vr}), 0.0, 1e-14);
    EXPECT_NEAR(noncentrality({i2, i2, 0.7 * kron(i2, i2), vr}), 0.0, 1e-12);
    std::mt19937_64 gen(16);
    const Matrix g1 = oracle::random_spd(2, gen);
    const Matrix g2 = oracle::random_spd(3, gen);
    EXPECT_NEAR(noncentrality({g1, g2, 2.0 * kron(g1, g2), gaussian_vrstar(g1, g2)}), 0.0, 1e-10);
}

TEST(Noncentrality, LocalDesignScale) {
    const Matrix i2 = Matrix::Identity(2, 2);
    const Matrix vr = gaussian_vrstar(i2, i2);
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        // The two-regime design deviates from I4 by (sigma / 2) diag(1,-1,-1,1) / sqrt(n).
        EXPECT_NEAR(noncentrality({i2, i2, 0.5 * sigma * diag4(1, -1, -1, 1), vr}), sigma * sigma / 4.0, 1e-12);
        EXPECT_NEAR(noncentrality({i2, i2, sigma * diag4(1, -1, -1, 1), vr}), sigma * sigma, 1e-12);
        EXPECT_NEAR(mc::local_noncentrality(sigma), sigma * sigma / 4.0, 1e-15);
    }
    const Matrix pop = mc::local_population_r(10000, 4.0);
    const Matrix dev = (pop - Matrix::Identity(4, 4)) * std::sqrt(10000.0);
    EXPECT_NEAR(noncentrality({i2, i2, dev, vr}), 4.0, 1e-10);
}

TEST(Noncentrality, GaussianVrstarMatchesSimulation) {
    std::mt19937_64 gen(17);
    const Matrix g1 = oracle::random_spd(2, gen);
    const Matrix g2 = oracle::random_spd(2, gen);
    const Index n = 400000;
    const Matrix v = oracle::random_normal(n, 2, gen) * Eigen::LLT<Matrix>(g1).matrixU();
    const Matrix z = oracle::random_normal(n, 2, gen) * Eigen::LLT<Matrix>(g2).matrixU();
    const oracle::MomentEstimates mom = oracle::moment_estimates(v, z);
    const Matrix exact = gaussian_vrstar(g1, g2);
    EXPECT_LT((mom.v_star - exact).cwiseAbs().maxCoeff(), 0.05 * exact.cwiseAbs().maxCoeff());
}
