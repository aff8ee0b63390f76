import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from goldprod.geometry import (
    CovariantTwoTensorField,
    DegenerateMetricError,
    EndomorphismField,
    ManifoldSpec,
    VectorFieldSpec,
    christoffel_at,
    covariant_derivative_endo_at,
    covariant_derivative_vector_at,
    divergence_endo_at,
    inner,
    lie_bracket_at,
    metric_at,
    orthonormal_frame_at,
    random_affine_field,
    rotate_frame,
    signature_at,
)


def man(catalog, name):
    return catalog.manifolds[name]


def test_euclidean_metric_is_identity(catalog):
    h, hinv = metric_at(man(catalog, "euclid2"), [0.3, -0.7])
    np.testing.assert_array_equal(h, np.eye(2))
    np.testing.assert_array_equal(hinv, np.eye(2))


def test_hyperbolic_plane_metric_is_its_own_inverse(catalog):
    h, hinv = metric_at(man(catalog, "hyper2"), [0.1, 0.2])
    np.testing.assert_allclose(hinv, h, atol=1e-15)


def test_warped_metric_values(catalog):
    h, hinv = metric_at(man(catalog, "warped2"), [0.5, 0.0])
    assert h[1, 1] == pytest.approx(math.e, rel=1e-14)
    assert hinv[1, 1] == pytest.approx(1 / math.e, rel=1e-14)


def test_degenerate_metric_raises():
    M = ManifoldSpec.from_strings("bad", ["x", "y"], [[-1, 1], [-1, 1]], [["x", "0"], ["0", "1"]])
    with pytest.raises(DegenerateMetricError):
        metric_at(M, [0.0, 0.3])


def test_flat_christoffels_vanish(catalog):
    for name in ("euclid2", "hyper2"):
        assert not christoffel_at(man(catalog, name), [0.2, 0.4]).any()


def test_warped_christoffels_at_origin(catalog):
    G = christoffel_at(man(catalog, "warped2"), [0.0, 0.0])
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -1.0
    expected[1, 0, 1] = expected[1, 1, 0] = 1.0
    np.testing.assert_allclose(G, expected, atol=1e-15)


def _fd_christoffel(M, p, h=1e-5):
    """Christoffel symbols from finite differences of the metric."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    dh = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dh[:, :, l] = (metric_at(M, p + e)[0] - metric_at(M, p - e)[0]) / (2 * h)
    hinv = metric_at(M, p)[1]
    low = 0.5 * (np.einsum("jli->ijl", dh) + np.einsum("ilj->ijl", dh) - np.einsum("ijl->ijl", dh))
    return np.einsum("kl,ijl->kij", hinv, low)


@pytest.mark.parametrize("name", ["warped2", "heisen4", "conf2", "conf4"])
def test_christoffels_match_finite_differences(catalog, name):
    M = man(catalog, name)
    for p in M.sample_points(5, 3):
        np.testing.assert_allclose(christoffel_at(M, p), _fd_christoffel(M, p), atol=1e-7)


def test_lie_bracket_examples():
    names = ["x1", "x2", "x3", "x4"]
    d1 = VectorFieldSpec.from_strings(["1", "0", "0", "0"], names)
    d2 = VectorFieldSpec.from_strings(["0", "1", "0", "0"], names)
    Y = VectorFieldSpec.from_strings(["0", "1", "x1", "0"], names)
    p = [0.3, -0.1, 0.2, 0.9]
    assert not lie_bracket_at(d1, d2, p).any()
    np.testing.assert_array_equal(lie_bracket_at(d1, Y, p), [0, 0, 1, 0])
    assert not lie_bracket_at(Y, Y, p).any()


def test_covariant_derivative_examples(catalog):
    E = man(catalog, "euclid2")
    X = VectorFieldSpec.from_strings(["0", "1"], ["s", "t"])
    Y = VectorFieldSpec.from_strings(["0", "exp(t)"], ["s", "t"])
    np.testing.assert_allclose(covariant_derivative_vector_at(E, X, Y, [0.2, 0.4]), [0, math.exp(0.4)], rtol=1e-15)
    W = man(catalog, "warped2")
    e2 = VectorFieldSpec.from_strings(["0", "exp(-x1)"], ["x1", "x2"])
    P = EndomorphismField.from_strings([["1", "0"], ["0", "-1"]], ["x1", "x2"])
    for p in W.sample_points(5, 1):
        np.testing.assert_allclose(covariant_derivative_vector_at(W, e2, e2, p), [-1, 0], atol=1e-14)
        np.testing.assert_allclose(covariant_derivative_endo_at(W, P, e2, e2, p), [2, 0], atol=1e-14)
        np.testing.assert_allclose(divergence_endo_at(W, P, p), [2, 0], atol=1e-13)


def test_identity_endomorphism_is_parallel(catalog, rng):
    for M in catalog.manifolds.values():
        n = M.dim
        I = EndomorphismField.from_strings([["1" if i == j else "0" for j in range(n)] for i in range(n)],
                                           M.coordinate_names)
        p = M.sample_points(1, 9)[0]
        X, Y = random_affine_field(n, rng), random_affine_field(n, rng)
        assert np.max(np.abs(covariant_derivative_endo_at(M, I, X, Y, p))) < 1e-12


def test_frames_and_signatures(catalog):
    f = orthonormal_frame_at(man(catalog, "euclid2"), [0.0, 0.0])
    np.testing.assert_array_equal(f.vectors, np.eye(2))
    assert f.signs == (1, 1)
    f = orthonormal_frame_at(man(catalog, "hyper2"), [0.0, 0.0])
    assert f.signs == (1, -1)
    f = orthonormal_frame_at(man(catalog, "warped2"), [0.5, 0.0])
    np.testing.assert_allclose(f.vectors, [[1, 0], [0, math.exp(-0.5)]], atol=1e-15)
    assert signature_at(man(catalog, "euclid2"), [0, 0]) == (2, 0)
    assert signature_at(man(catalog, "hyper2"), [0, 0]) == (1, 1)
    assert signature_at(man(catalog, "heisen4"), [0.1, 0.2, 0.3, 0.4]) == (2, 2)


@pytest.mark.parametrize("name", ["euclid2", "hyper2", "warped2", "heisen4", "conf2", "conf4"])
def test_frames_are_orthonormal_and_signature_constant(catalog, name):
    M = man(catalog, name)
    sigs = set()
    for p in M.sample_points(20, 5):
        f = orthonormal_frame_at(M, p)
        h, _ = metric_at(M, p)
        np.testing.assert_allclose(f.vectors @ h @ f.vectors.T, np.diag(f.signs), atol=1e-9)
        assert list(f.signs) == sorted(f.signs, reverse=True)
        sigs.add(signature_at(M, p))
    assert len(sigs) == 1


# --------------------------------------------------------------------------
# Properties at random points and random affine fields

catalog_manifolds = st.sampled_from(["euclid2", "hyper2", "warped2", "heisen4", "conf2", "conf4"])
seeds = st.integers(0, 2**32 - 1)


@given(catalog_manifolds, seeds)
def test_metric_compatibility(name, seed):
    from goldprod.config import builtin_catalog

    M = builtin_catalog().manifolds[name]
    rng = np.random.default_rng(seed)
    p = M.sample_points(1, seed)[0]
    X, Y, Z = (random_affine_field(M.dim, rng) for _ in range(3))
    x = X.jet(p).value
    eps = 1e-5
    # directional derivative of h(Y, Z) along X by central differences
    lhs = (inner(M, p + eps * x, Y.jet(p + eps * x).value, Z.jet(p + eps * x).value)
           - inner(M, p - eps * x, Y.jet(p - eps * x).value, Z.jet(p - eps * x).value)) / (2 * eps)
    rhs = inner(M, p, covariant_derivative_vector_at(M, X, Y, p), Z) + inner(M, p, Y, covariant_derivative_vector_at(M, X, Z, p))
    assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(lhs))


@given(catalog_manifolds, seeds)
def test_torsion_free(name, seed):
    from goldprod.config import builtin_catalog

    M = builtin_catalog().manifolds[name]
    rng = np.random.default_rng(seed)
    p = M.sample_points(1, seed)[0]
    X, Y = random_affine_field(M.dim, rng), random_affine_field(M.dim, rng)
    T = covariant_derivative_vector_at(M, X, Y, p) - covariant_derivative_vector_at(M, Y, X, p) - lie_bracket_at(X, Y, p)
    assert np.max(np.abs(T)) < 1e-9
    np.testing.assert_allclose(lie_bracket_at(X, Y, p), -lie_bracket_at(Y, X, p), atol=1e-15)


@given(catalog_manifolds, seeds)
def test_christoffels_symmetric_and_compatible(name, seed):
    from goldprod.config import builtin_catalog
    from goldprod.geometry import metric_derivatives_at

    M = builtin_catalog().manifolds[name]
    p = M.sample_points(1, seed)[0]
    G = christoffel_at(M, p)
    h, _ = metric_at(M, p)
    dh = metric_derivatives_at(M, p)  # dh[i, j, k] = d_k h_ij
    np.testing.assert_allclose(G, np.einsum("kij->kji", G), atol=1e-12)
    rhs = np.einsum("lki,lj->ijk", G, h) + np.einsum("lkj,il->ijk", G, h)
    np.testing.assert_allclose(dh, rhs, atol=1e-9)


@given(st.sampled_from(["hyper2", "warped2", "heisen4", "conf4"]), seeds)
def test_divergence_is_frame_independent(name, seed):
    from goldprod.config import builtin_catalog

    cat = builtin_catalog()
    M = cat.manifolds[name]
    S = cat.entries[f"{name}-P"].structure
    p = M.sample_points(1, seed)[0]
    frame = orthonormal_frame_at(M, p)
    rotated = rotate_frame(frame, np.random.default_rng(seed))
    h, _ = metric_at(M, p)
    np.testing.assert_allclose(rotated.vectors @ h @ rotated.vectors.T, np.diag(rotated.signs), atol=1e-9)
    a = divergence_endo_at(M, S, p, frame)
    b = divergence_endo_at(M, S, p, rotated)
    assert np.max(np.abs(a - b)) < 1e-8


def test_covariant_two_tensor_from_metric(catalog):
    M = man(catalog, "warped2")
    u = CovariantTwoTensorField.from_metric(M)
    np.testing.assert_allclose(u.jet([0.5, 0.0]).value, metric_at(M, [0.5, 0.0])[0])
