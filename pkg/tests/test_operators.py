import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from goldprod.config import builtin_catalog
from goldprod.geometry import (
    CovariantTwoTensorField,
    EndomorphismField,
    VectorFieldSpec,
    covariant_derivative_endo_at,
    inner,
    metric_at,
    random_affine_field,
)
from goldprod.operators import (
    d_omega_at,
    d_omega_coordinate_at,
    d_omega_tensor_at,
    lie_derivative_endo_at,
    nijenhuis_at,
    nijenhuis_connection_at,
    nijenhuis_tensor_at,
    psi_at,
    s_operator_at,
    star_condition_residual_at,
    tachibana_at,
    tachibana_on_fields_at,
    tachibana_tensor_at,
)
from goldprod.structures import (
    CompatibilityWarning,
    StructureField,
    compatibility_over,
    conjugate_of,
    eigenprojectors_at,
    product_twin,
    twin_of,
)
from goldprod.suites import kaehler_form_residual_at

SQRT5 = math.sqrt(5.0)
H4 = ["x1", "x2", "x3", "x4"]
ENTRIES = ["euclid2-P", "euclid2-G", "hyper2-P", "warped2-P", "heisen4-P", "conf2-P", "conf4-P"]


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompatibilityWarning)
        yield


def coord(i, n=4):
    return np.eye(n)[i]


# --------------------------------------------------------------------------
# Finite-difference oracles, independent of the jet machinery


def fd_jac(f, p, h=1e-5):
    p = np.asarray(p, dtype=float)
    cols = [(f(p + h * e) - f(p - h * e)) / (2 * h) for e in np.eye(len(p))]
    return np.array(cols).T


def fd_bracket(f, g, p):
    return fd_jac(g, p) @ f(p) - fd_jac(f, p) @ g(p)


def field(X):
    return lambda q: X.jet(q).value


def oracle_nijenhuis(S, X, Y, p):
    A = S.matrix_at
    x, y = field(X), field(Y)
    ax = lambda q: A(q) @ x(q)
    ay = lambda q: A(q) @ y(q)
    Ap = A(p)
    return Ap @ Ap @ fd_bracket(x, y, p) + fd_bracket(ax, ay, p) - Ap @ fd_bracket(ax, y, p) - Ap @ fd_bracket(x, ay, p)


def oracle_tachibana(S, u, X, Y, Z, p):
    A = S.matrix_at
    U = lambda q: u.jet(q).value
    x, y, z = field(X), field(Y), field(Z)
    ax = lambda q: A(q) @ x(q)
    uyz = lambda q: y(q) @ U(q) @ z(q)
    uayz = lambda q: (A(q) @ y(q)) @ U(q) @ z(q)
    grad = lambda f: fd_jac(lambda q: np.array([f(q)]), p)[0]
    Ly = fd_bracket(y, ax, p) - A(p) @ fd_bracket(y, x, p)
    Lz = fd_bracket(z, ax, p) - A(p) @ fd_bracket(z, x, p)
    Up = U(p)
    return grad(uyz) @ ax(p) - grad(uayz) @ x(p) + Ly @ Up @ z(p) + y(p) @ Up @ Lz


def oracle_d_omega(M, P, x, y, z, p):
    """Coordinate exterior derivative of Omega_ab = h(P d_a, d_b), differentiated numerically."""
    omega = lambda q: (P.matrix_at(q).T @ metric_at(M, q)[0]).ravel()
    n = M.dim
    dW = fd_jac(omega, p).reshape(n, n, n)  # dW[a, b, i] = d_i Omega_ab
    return (np.einsum("jki,i,j,k->", dW, x, y, z) + np.einsum("kij,i,j,k->", dW, x, y, z)
            + np.einsum("ijk,i,j,k->", dW, x, y, z))


# --------------------------------------------------------------------------
# Worked examples


def test_heisen4_nijenhuis(catalog):
    e = catalog.entries["heisen4-P"]
    p = [0.3, -0.2, 0.5, 0.1]
    np.testing.assert_allclose(nijenhuis_at(e.structure, coord(0), coord(1), p), [0, 0, 4, 0], atol=1e-12)
    np.testing.assert_allclose(nijenhuis_connection_at(e.manifold, e.structure, coord(0), coord(1), p),
                               [0, 0, 4, 0], atol=1e-12)
    assert not nijenhuis_at(e.structure, coord(0), coord(0), p).any()


def test_constant_structures_have_no_torsion(catalog):
    for name in ("euclid2-P", "euclid2-G", "hyper2-P"):
        e = catalog.entries[name]
        assert not nijenhuis_at(e.structure, coord(0, 2), coord(1, 2), [0.1, 0.2]).any()
        P = product_twin(e.structure)
        assert np.max(np.abs(nijenhuis_connection_at(e.manifold, P, coord(0, 2), coord(1, 2), [0.1, 0.2]))) < 1e-14


def test_line_fields_in_the_plane_are_integrable(catalog, rng):
    e = catalog.entries["warped2-P"]
    for p in e.manifold.sample_points(10):
        X, Y = random_affine_field(2, rng), random_affine_field(2, rng)
        assert np.max(np.abs(nijenhuis_connection_at(e.manifold, e.structure, X, Y, p))) < 1e-12


def test_lie_derivative_examples(catalog):
    P = catalog.entries["heisen4-P"].structure
    np.testing.assert_allclose(lie_derivative_endo_at(P, coord(0), coord(1), [0.2, 0.0, 0.0, 0.0]), [0, 0, 2, 0],
                               atol=1e-14)
    I = EndomorphismField.from_strings([["1" if i == j else "0" for j in range(4)] for i in range(4)], H4)
    rng = np.random.default_rng(1)
    X, Y = random_affine_field(4, rng), random_affine_field(4, rng)
    assert np.max(np.abs(lie_derivative_endo_at(I, Y, X, [0.1, 0.2, 0.3, 0.4]))) < 1e-14


def test_tachibana_examples(catalog, rng):
    e = catalog.entries["euclid2-P"]
    h = CovariantTwoTensorField.from_metric(e.manifold)
    for _ in range(5):
        X, Y, Z = (random_affine_field(2, rng) for _ in range(3))
        assert abs(tachibana_at(e.manifold, e.structure, h, X, Y, Z, [0.3, 0.4])) < 1e-14
    zero = CovariantTwoTensorField.from_strings([["0", "0"], ["0", "0"]], ["s", "t"])
    X, Y, Z = (random_affine_field(2, rng) for _ in range(3))
    assert tachibana_at(e.manifold, e.structure, zero, X, Y, Z, [0.3, 0.4]) == 0.0


def test_tachibana_matches_connection_form_on_warped_plane(catalog):
    e = catalog.entries["warped2-P"]
    M, P = e.manifold, e.structure
    h = CovariantTwoTensorField.from_metric(M)
    d2 = coord(1, 2)
    for p in M.sample_points(10):
        lhs = tachibana_at(M, P, h, d2, d2, d2, p)
        nab = lambda a, b: covariant_derivative_endo_at(M, P, a, b, p)
        rhs = -inner(M, p, nab(d2, d2), d2) + inner(M, p, nab(d2, d2), d2) + inner(M, p, nab(d2, d2), d2)
        assert abs(lhs - rhs) < 1e-12
        psi = psi_at(M, P, h, d2, d2, d2, p)
        assert abs(psi - 2 * inner(M, p, nab(d2, d2), d2)) < 1e-12


def test_star_condition_discriminates(catalog, rng):
    for name in ("euclid2-P", "euclid2-G"):
        e = catalog.entries[name]
        X, Y, Z = (random_affine_field(2, rng) for _ in range(3))
        assert star_condition_residual_at(e.manifold, e.structure, X, Y, Z, [0.1, -0.4]) < 1e-14
    e = catalog.entries["warped2-P"]
    worst = max(
        star_condition_residual_at(e.manifold, e.structure, *(random_affine_field(2, rng) for _ in range(3)), p)
        for p in e.manifold.sample_points(10)
    )
    assert worst > 1e-3


def test_star_condition_warns_for_non_pure_metric(catalog):
    e = catalog.entries["hyper2-P"]
    with warnings.catch_warnings():
        warnings.simplefilter("error", CompatibilityWarning)
        with pytest.raises(CompatibilityWarning):
            star_condition_residual_at(e.manifold, e.structure, coord(0, 2), coord(1, 2), coord(0, 2), [0, 0])


def test_d_omega_examples(catalog, rng):
    e = catalog.entries["hyper2-P"]
    for _ in range(5):
        X, Y, Z = (random_affine_field(2, rng) for _ in range(3))
        assert abs(d_omega_at(e.manifold, e.structure, X, Y, Z, [0.2, 0.7])) < 1e-14
    e = catalog.entries["heisen4-P"]
    p = np.array([0.3, -0.6, 0.2, 0.5])
    value = d_omega_at(e.manifold, e.structure, coord(0), coord(1), coord(2), p)
    oracle = oracle_d_omega(e.manifold, e.structure, coord(0), coord(1), coord(2), p)
    assert value == pytest.approx(oracle, abs=1e-8)
    assert value == pytest.approx(d_omega_coordinate_at(e.manifold, e.structure, coord(0), coord(1), coord(2), p),
                                  abs=1e-12)


def test_s_operator_examples(catalog, rng):
    e = catalog.entries["euclid2-P"]
    assert not s_operator_at(e.manifold, e.structure, [1.0, 2.0], [0.5, -1.0], [0.1, 0.1]).any()
    e = catalog.entries["warped2-P"]
    M, P = e.manifold, e.structure
    for p in M.sample_points(10):
        for pi in eigenprojectors_at(P, p):
            x, y = pi @ rng.normal(size=2), pi @ rng.normal(size=2)
            assert np.max(np.abs(s_operator_at(M, P, x, y, p))) < 1e-12
        A = P.matrix_at(p)
        x, y = rng.normal(size=2), rng.normal(size=2)
        s = s_operator_at(M, P, x, y, p)
        np.testing.assert_allclose(A @ s, -s_operator_at(M, P, x, A @ y, p), atol=1e-12)
        np.testing.assert_allclose(A @ s, s_operator_at(M, P, A @ x, y, p), atol=1e-12)


# --------------------------------------------------------------------------
# Cross-checks over the catalog

entry_names = st.sampled_from(ENTRIES)
seeds = st.integers(0, 2**32 - 1)


def setup(name, seed, k):
    e = builtin_catalog().entries[name]
    rng = np.random.default_rng(seed)
    p = e.manifold.sample_points(1, seed)[0]
    return e.manifold, e.structure, p, [random_affine_field(e.manifold.dim, rng) for _ in range(k)]


@given(entry_names, seeds)
def test_nijenhuis_formulas_agree(name, seed):
    M, S, p, (X, Y) = setup(name, seed, 2)
    P = product_twin(S)
    a = nijenhuis_at(P, X, Y, p)
    assert np.max(np.abs(a - nijenhuis_connection_at(M, P, X, Y, p))) < 1e-8
    assert np.max(np.abs(a - oracle_nijenhuis(P, X, Y, p))) < 1e-6
    np.testing.assert_allclose(a, -nijenhuis_at(P, Y, X, p), atol=1e-12)
    T = nijenhuis_tensor_at(P, p)
    np.testing.assert_allclose(np.einsum("kab,a,b->k", T, X.jet(p).value, Y.jet(p).value), a, atol=1e-10)


@given(entry_names, seeds)
def test_twin_scaling_of_torsion_and_derivative(name, seed):
    M, S, p, (X, Y) = setup(name, seed, 2)
    P = product_twin(S)
    G = twin_of(P)
    assert np.max(np.abs(5 * nijenhuis_at(P, X, Y, p) - 4 * nijenhuis_at(G, X, Y, p))) < 1e-8
    d = SQRT5 * covariant_derivative_endo_at(M, P, X, Y, p) - 2 * covariant_derivative_endo_at(M, G, X, Y, p)
    assert np.max(np.abs(d)) < 1e-8


@given(entry_names, seeds)
def test_tachibana_matches_finite_difference_oracle(name, seed):
    M, S, p, (X, Y, Z) = setup(name, seed, 3)
    n = M.dim
    rng = np.random.default_rng(seed + 1)
    # an arbitrary, non-symmetric covariant tensor with affine entries
    C = rng.uniform(-1, 1, (n, n))
    L = rng.uniform(-1, 1, (n, n, n))
    names = M.coordinate_names
    comps = [[" + ".join([repr(float(C[a, b]))] + [f"({float(L[a, b, i])!r})*{names[i]}" for i in range(n)]) for b in range(n)]
             for a in range(n)]
    for u in (CovariantTwoTensorField.from_metric(M), CovariantTwoTensorField.from_strings(comps, names)):
        value = tachibana_at(M, S, u, X, Y, Z, p)
        assert value == pytest.approx(oracle_tachibana(S, u, X, Y, Z, p), abs=1e-6 * max(1.0, abs(value)))
        xs, ys, zs = (np.array([V.jet(p).value]) for V in (X, Y, Z))
        dz = np.array([Z.jet(p).jac])
        assert tachibana_on_fields_at(M, S, u, p, xs, ys, zs, dz)[0] == pytest.approx(value, abs=1e-10)


def test_tachibana_tensor_form_needs_a_pure_tensor(catalog):
    """For a non-pure u the Tachibana operator depends on derivatives of Z,
    so the bare tensor contraction misses a correction term."""
    e = catalog.entries["heisen4-P"]
    M, S = e.manifold, e.structure
    h = CovariantTwoTensorField.from_metric(M)
    rng = np.random.default_rng(5)
    p = M.sample_points(1)[0]
    X, Y, Z = (random_affine_field(4, rng) for _ in range(3))
    T = tachibana_tensor_at(M, S, h, p)
    bare = np.einsum("abc,a,b,c->", T, X.jet(p).value, Y.jet(p).value, Z.jet(p).value)
    assert abs(bare - tachibana_at(M, S, h, X, Y, Z, p)) > 1e-3


@given(st.sampled_from(["euclid2-P", "euclid2-G", "warped2-P"]), seeds)
def test_psi_identities_for_pure_metrics(name, seed):
    M, S, p, (X, Y, Z) = setup(name, seed, 3)
    h = CovariantTwoTensorField.from_metric(M)
    T = tachibana_tensor_at(M, S, h, p)
    vals = [V.jet(p).value for V in (X, Y, Z)]
    bare = np.einsum("abc,a,b,c->", T, *vals)
    assert bare == pytest.approx(tachibana_at(M, S, h, X, Y, Z, p), abs=1e-10)
    psi = psi_at(M, S, h, X, Y, Z, p)
    assert psi == pytest.approx(psi_at(M, S, h, Z, Y, X, p), abs=1e-12)
    assert psi == pytest.approx(2 * inner(M, p, covariant_derivative_endo_at(M, S, Y, X, p), Z), abs=1e-8)


@given(st.sampled_from(["hyper2-P", "heisen4-P", "conf2-P", "conf4-P"]), seeds)
def test_kaehler_form_identity(name, seed):
    M, P, p, (X, Y, Z) = setup(name, seed, 3)
    assert abs(kaehler_form_residual_at(M, P, X, Y, Z, p)) < 1e-7
    d = d_omega_at(M, P, X, Y, Z, p)
    vals = [V.jet(p).value for V in (X, Y, Z)]
    assert d == pytest.approx(oracle_d_omega(M, P, *vals, p), abs=1e-6 * max(1.0, abs(d)))
    assert d == pytest.approx(-d_omega_at(M, P, Y, X, Z, p), abs=1e-10)
    assert d == pytest.approx(-d_omega_at(M, P, X, Z, Y, p), abs=1e-10)
    assert d == pytest.approx(np.einsum("abc,a,b,c->", d_omega_tensor_at(M, P, p), *vals), abs=1e-10)


def _literal_coefficient_form(M, P, X, Y, Z, p):
    """The identity with coefficients +3, +3 in front of the dOmega terms."""
    A = P.matrix_at(p)
    x, y, z = (V.jet(p).value for V in (X, Y, Z))
    E = P.jet(p)
    py, pz = E.apply(Y.jet(p)), E.apply(Z.jet(p))
    return (2 * inner(M, p, covariant_derivative_endo_at(M, P, X, Y, p), z)
            + 3 * d_omega_at(M, P, X, Y, Z, p) + 3 * d_omega_at(M, P, X, py, pz, p)
            + inner(M, p, nijenhuis_at(P, Y, Z, p), A @ x))


def test_literal_coefficients_only_hold_for_closed_forms(catalog, rng):
    for name in ("hyper2-P", "heisen4-P"):
        e = catalog.entries[name]
        for p in e.manifold.sample_points(10):
            X, Y, Z = (random_affine_field(e.manifold.dim, rng) for _ in range(3))
            assert abs(_literal_coefficient_form(e.manifold, e.structure, X, Y, Z, p)) < 1e-7
    e = catalog.entries["conf4-P"]
    worst = max(
        abs(_literal_coefficient_form(e.manifold, e.structure, *(random_affine_field(4, rng) for _ in range(3)), p))
        for p in e.manifold.sample_points(10)
    )
    assert worst > 1e-2


@given(entry_names, seeds)
def test_s_operator_forms(name, seed):
    M, S, p, (X, Y) = setup(name, seed, 2)
    P = product_twin(S)
    G = twin_of(P)
    A, B = P.matrix_at(p), G.matrix_at(p)
    x, y = X.jet(p).value, Y.jet(p).value
    nab = lambda phi, a, b: covariant_derivative_endo_at(M, phi, a, b, p)
    sp = s_operator_at(M, P, x, y, p)
    np.testing.assert_allclose(sp, nab(P, x, y) - nab(P, A @ x, A @ y), atol=1e-9)
    sg = s_operator_at(M, G, x, y, p)
    np.testing.assert_allclose(sg, nab(G, x, y) - nab(G, B @ x, B @ y) + nab(G, B @ x, y), atol=1e-9)
    np.testing.assert_allclose(A @ sp, -s_operator_at(M, P, x, A @ y, p), atol=1e-9)
    np.testing.assert_allclose(A @ sp, s_operator_at(M, P, A @ x, y, p), atol=1e-9)


def test_s_operator_diagonal_equivalence(catalog, rng):
    for e in catalog.entries.values():
        M, P = e.manifold, product_twin(e.structure)
        pts = M.sample_points(20)
        if not compatibility_over(M, P, pts).hyperbolic:
            continue
        diag = max(np.max(np.abs(s_operator_at(M, P, x, x, p)))
                   for p in pts for x in rng.normal(size=(5, M.dim)))
        full = max(np.max(np.abs(s_operator_at(M, P, x, y, p)))
                   for p in pts for x, y in rng.normal(size=(5, 2, M.dim)))
        assert (diag < 1e-9) == (full < 1e-9)


def test_conjugate_flips_nabla_sign(catalog, rng):
    e = catalog.entries["heisen4-P"]
    M, P = e.manifold, e.structure
    p = M.sample_points(1)[0]
    x, y = rng.normal(size=4), rng.normal(size=4)
    np.testing.assert_allclose(covariant_derivative_endo_at(M, conjugate_of(P), x, y, p),
                               -covariant_derivative_endo_at(M, P, x, y, p), atol=1e-12)
