"""Matrix kernels: thin SVD, polar factors, trace norm, subspace angles.

The polar maximality checks are the load-bearing ones here: the whole
alternating scheme rests on tr(Q^H A) being the largest value of
Re tr(X^H A) over orthonormal X.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ptbd.linalg import (
    orth_complement_extend,
    orthonormality_defect,
    polar_factor,
    random_orthonormal,
    sin_theta_frob,
    spectral_norm_estimate,
    sym,
    thin_svd,
    trace_norm,
)


def random_matrix(rng, n, k, field):
    a = rng.standard_normal((n, k))
    if field == "complex":
        a = a + 1j * rng.standard_normal((n, k))
    return a


# ---------------------------------------------------------------- thin_svd


@pytest.mark.parametrize("field", ["real", "complex"])
def test_thin_svd_reconstructs(field):
    rng = np.random.default_rng(1)
    a = random_matrix(rng, 7, 4, field)
    res = thin_svd(a)
    assert res.u.shape == (7, 4)
    assert res.vh.shape == (4, 4)
    assert_allclose(res.u @ np.diag(res.s) @ res.vh, a, atol=1e-12)


def test_thin_svd_singular_values_match_gram_eigs():
    rng = np.random.default_rng(2)
    a = random_matrix(rng, 6, 5, "real")
    s = thin_svd(a).s
    gram_eigs = np.linalg.eigvalsh(a.T @ a)[::-1]
    assert_allclose(s, np.sqrt(np.clip(gram_eigs, 0.0, None)), atol=1e-10)


def test_thin_svd_frozen_cases():
    assert_allclose(thin_svd(np.eye(3)).s, np.ones(3), atol=1e-15)
    s = thin_svd(np.diag([3.0, 0.0])).s
    assert_allclose(s, [3.0, 0.0], atol=1e-15)


# ------------------------------------------------------------ polar_factor


def test_polar_frozen_tall_diagonal():
    a = np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    res = polar_factor(a)
    assert_allclose(res.q, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]), atol=1e-14)
    assert_allclose(res.h, np.diag([2.0, 3.0]), atol=1e-14)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_polar_factorization_identity(field):
    rng = np.random.default_rng(3)
    a = random_matrix(rng, 8, 5, field)
    res = polar_factor(a)
    norm_a = np.linalg.norm(a)
    assert np.linalg.norm(res.q @ res.h - a) <= 1e-12 * norm_a
    assert orthonormality_defect(res.q) <= 1e-13
    # h is Hermitian positive semidefinite
    assert_allclose(res.h, res.h.conj().T, atol=1e-12 * norm_a)
    assert np.linalg.eigvalsh(res.h).min() >= -1e-12 * norm_a


def test_polar_fixed_point_on_orthonormal_input():
    rng = np.random.default_rng(4)
    q0 = random_orthonormal(6, 3, rng, "real")
    res = polar_factor(q0)
    assert_allclose(res.q, q0, atol=1e-12)
    assert_allclose(res.h, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_polar_maximizes_trace_inner_product(field):
    rng = np.random.default_rng(5)
    a = random_matrix(rng, 7, 4, field)
    q = polar_factor(a).q
    best = float(np.real(np.trace(q.conj().T @ a)))
    assert_allclose(best, trace_norm(a), atol=1e-10)
    norm_a = np.linalg.norm(a)
    for _ in range(200):
        x = random_orthonormal(7, 4, rng, field)
        val = float(np.real(np.trace(x.conj().T @ a)))
        assert val <= best + 1e-10 * norm_a


def test_polar_rejects_wide_input():
    with pytest.raises(ValueError):
        polar_factor(np.zeros((2, 3)))


# -------------------------------------------------------------- trace_norm


def test_trace_norm_frozen():
    assert_allclose(trace_norm(np.diag([2.0, 3.0])), 5.0, atol=1e-14)
    assert_allclose(trace_norm(np.zeros((3, 2))), 0.0, atol=0)


def test_trace_norm_of_orthonormal_columns_counts_them():
    rng = np.random.default_rng(6)
    q = random_orthonormal(9, 4, rng, "complex")
    assert_allclose(trace_norm(q), 4.0, atol=1e-12)


def test_trace_norm_duality_bound():
    rng = np.random.default_rng(7)
    a = random_matrix(rng, 6, 4, "real")
    tn = trace_norm(a)
    for _ in range(100):
        p = random_orthonormal(6, 4, rng, "real")
        assert abs(np.real(np.trace(p.T @ a))) <= tn + 1e-10


# --------------------------------------------------------------------- sym


def test_sym_frozen_and_properties():
    assert_array_equal(
        sym(np.array([[1.0, 2.0], [0.0, 1.0]])),
        np.array([[1.0, 1.0], [1.0, 1.0]]),
    )
    h = np.array([[2.0, 1 + 1j], [1 - 1j, 3.0]])
    assert_allclose(sym(h), h, atol=0)
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert_array_equal(sym(skew), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        sym(np.zeros((2, 3)))


# --------------------------------------------------- orth_complement_extend


def test_extend_frozen_elementary_vectors():
    p = np.array([[1.0], [0.0], [0.0]])
    s = np.array([[0.0], [1.0], [0.0]])
    out = orth_complement_extend(p, s)
    assert_array_equal(out, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))


def test_extend_keeps_original_columns_bitwise():
    rng = np.random.default_rng(8)
    p = random_orthonormal(10, 3, rng, "real")
    s = rng.standard_normal((10, 4))
    out = orth_complement_extend(p, s)
    assert out[:, :3] is not p  # no aliasing surprises
    assert_array_equal(out[:, :3], p)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_extend_output_orthonormal_and_spanning(field):
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = random_orthonormal(12, 4, rng, field)
        s = random_matrix(rng, 12, 5, field)
        out = orth_complement_extend(p, s)
        assert 4 <= out.shape[1] <= 9
        assert orthonormality_defect(out) <= 1e-12
        # every column of s must lie in range(out)
        resid = s - out @ (out.conj().T @ s)
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(s))


def test_extend_no_new_directions_returns_copy():
    rng = np.random.default_rng(10)
    p = random_orthonormal(8, 3, rng, "real")
    s = p @ rng.standard_normal((3, 2))  # inside range(p)
    out = orth_complement_extend(p, s)
    assert out.shape == p.shape
    assert_array_equal(out, p)
    assert out is not p


# --------------------------------------------------- spectral_norm_estimate


def test_spectral_norm_frozen_cases():
    assert_allclose(spectral_norm_estimate(np.eye(5)), 1.0, rtol=1e-6)
    assert_allclose(spectral_norm_estimate(np.diag([3.0, 4.0])), 4.0, rtol=1e-6)
    assert spectral_norm_estimate(np.zeros((3, 4))) == 0.0


def test_spectral_norm_estimate_bracketed():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n, k = rng.integers(2, 12, size=2)
        a = random_matrix(rng, int(n), int(k), "real")
        est = spectral_norm_estimate(a)
        true = np.linalg.norm(a, 2)
        upper = np.sqrt(
            np.linalg.norm(a, 1) * np.linalg.norm(a, np.inf)
        )
        assert est <= upper * (1 + 1e-12)
        assert est >= true * (1 - 1e-3)


# ----------------------------------------------------------- sin_theta_frob


def test_sin_theta_frozen_angles():
    e1 = np.array([[1.0], [0.0], [0.0]])
    e2 = np.array([[0.0], [1.0], [0.0]])
    mix = (e1 + e2) / np.sqrt(2.0)
    assert_allclose(sin_theta_frob(e1, e1), 0.0, atol=1e-15)
    assert_allclose(sin_theta_frob(e1, e2), 1.0, atol=1e-15)
    assert_allclose(sin_theta_frob(e1, mix), np.sqrt(0.5), atol=1e-12)


def test_sin_theta_symmetric_and_rotation_invariant():
    rng = np.random.default_rng(12)
    p1 = random_orthonormal(9, 3, rng, "complex")
    p2 = random_orthonormal(9, 3, rng, "complex")
    d12 = sin_theta_frob(p1, p2)
    assert_allclose(d12, sin_theta_frob(p2, p1), rtol=1e-12)
    u = random_orthonormal(3, 3, rng, "complex")
    assert_allclose(sin_theta_frob(p1 @ u, p2), d12, rtol=1e-10)
    with pytest.raises(ValueError):
        sin_theta_frob(p1, random_orthonormal(9, 4, rng, "complex"))


# ---------------------------------------------------- orthonormality_defect


def test_orthonormality_defect_values():
    rng = np.random.default_rng(13)
    q = random_orthonormal(7, 3, rng, "real")
    assert orthonormality_defect(q) <= 1e-14
    # (2I)^H (2I) - I = 3I, so the defect of 2*eye(2) is 3*sqrt(2)
    assert_allclose(orthonormality_defect(2.0 * np.eye(2)), 3.0 * np.sqrt(2.0), atol=1e-12)


# ------------------------------------------------------- random_orthonormal


def test_random_orthonormal_deterministic_and_typed():
    a = random_orthonormal(6, 2, np.random.default_rng(14), "real")
    b = random_orthonormal(6, 2, np.random.default_rng(14), "real")
    assert_array_equal(a, b)
    assert a.dtype == np.float64
    c = random_orthonormal(6, 2, np.random.default_rng(14), "complex")
    assert c.dtype == np.complex128
    assert orthonormality_defect(c) <= 1e-13
    with pytest.raises(ValueError):
        random_orthonormal(6, 2, np.random.default_rng(14), "quaternion")
