import math

import numpy as np
import pytest

import kpst


def test_version():
    assert kpst.__version__.count(".") == 2


def test_kpst_on_null_sample():
    v, z = kpst.simulate_null(2, 3, 2000, "scalar-hetero", seed=3)
    assert v.shape == (2000, 2)
    assert z.shape == (2000, 3)
    res = kpst.kpst(v, z)
    assert res.df == 10
    assert res.df == kpst.degrees_of_freedom(2, 3)
    assert 0.0 <= res.p_value <= 1.0
    assert res.statistic >= 0.0
    assert math.isclose(res.p_value, kpst.chi2_sf(res.statistic, res.df), rel_tol=1e-12)
    assert res.reject(0.05) == (res.p_value < 0.05)
    assert "KpsResult" in repr(res)


def test_full_equals_simplified():
    v, z = kpst.simulate_null(3, 2, 500, seed=4)
    full = kpst.kpst(v, z, formula="full").statistic
    simple = kpst.kpst(v, z, formula="simplified").statistic
    assert math.isclose(full, simple, rel_tol=1e-8)


def test_singleton_clusters_match_unclustered():
    v, z = kpst.simulate_null(2, 2, 300, seed=5)
    labels = [str(i) for i in range(300)]
    a = kpst.kpst(v, z).statistic
    b = kpst.kpst(v, z, clusters=labels).statistic
    assert abs(a - b) <= 1e-12 * max(1.0, a)


def test_local_alternative_rejects():
    v, z = kpst.simulate_local(20000, 40.0, seed=6)
    assert kpst.kpst(v, z).reject(0.05)
    assert kpst.kpst_star(v, z).df == 4


def test_nearest_kps_diagonal():
    fit = kpst.nearest_kps(np.diag([1.5, 0.5, 0.5, 1.5]), 2, 2)
    assert fit.ds == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(fit.g1, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(fit.g2, np.eye(2), atol=1e-12)


def test_rearrange_of_kronecker_is_rank_one():
    g1 = np.array([[2.0, 0.5], [0.5, 1.0]])
    g2 = np.array([[1.0, 0.2, 0.0], [0.2, 3.0, 0.1], [0.0, 0.1, 1.0]])
    r = kpst.rearrange(np.kron(g1, g2), 2, 3)
    np.testing.assert_allclose(r, np.outer(g1.flatten("F"), g2.flatten("F")), atol=1e-14)
    assert kpst.duplication_matrix(3).shape == (9, 6)


def test_chi2_functions():
    assert kpst.chi2_cdf(2.0, 2) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-15)
    assert kpst.chi2_quantile(0.95, 4) == pytest.approx(9.487729036781154, rel=1e-12)
    assert kpst.noncentral_chi2_cdf(3.0, 4, 0.0) == pytest.approx(kpst.chi2_cdf(3.0, 4), abs=1e-12)
    assert kpst.noncentral_chi2_cdf(9.4877, 4, 4.0) < kpst.chi2_cdf(9.4877, 4)


def test_errors_raise_kps_error():
    with pytest.raises(kpst.KpsError):
        kpst.nearest_kps(np.eye(6), 2, 2)
    with pytest.raises(ValueError):
        kpst.kpst(np.zeros((10, 2)), np.ones((10, 2)))
