"""Tensor operators built from a structure and the Levi-Civita connection:
Nijenhuis tensor, Lie derivative of the structure, Tachibana operator and its
symmetrization, the star condition, the S operator and dOmega.

Field arguments accept anything with ``jet(p)`` (specs, affine fields, jets)
or a plain vector, which is read as a constant-coefficient field.  Tensorial
operators only use field values at ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    DEFAULT_SEED,
    EndoJet,
    ManifoldSpec,
    VecJet,
    as_jet,
    christoffel_at,
    lie_bracket_at,
    metric_at,
    metric_derivatives_at,
    nabla_endo_apply,
    nabla_endo_at,
    random_affine_field,
    value_at,
)
from .structures import Kind, StructureField, compatibility_at, product_twin, warn_unless


@dataclass(frozen=True)
class OperatorResidualReport:
    operator: str
    max_abs: float
    samples: int


def sample_residual(name: str, M: ManifoldSpec, fn: Callable, points, fields: int = 20,
                    arity: int = 3, seed: int = DEFAULT_SEED) -> OperatorResidualReport:
    """Max of |fn(p, *random_fields)| over points and random affine fields."""
    rng = np.random.default_rng(seed)
    worst, count = 0.0, 0
    for p in points:
        for _ in range(fields):
            args = [random_affine_field(M.dim, rng) for _ in range(arity)]
            worst = max(worst, float(np.max(np.abs(fn(p, *args)))))
            count += 1
    return OperatorResidualReport(name, worst, count)


# --------------------------------------------------------------------------
# Nijenhuis tensor and Lie derivative


def nijenhuis_at(S: StructureField, X, Y, p) -> np.ndarray:
    """phi^2[X,Y] + [phiX, phiY] - phi[phiX, Y] - phi[X, phiY]."""
    E = S.jet(p)
    x, y = as_jet(X, p), as_jet(Y, p)
    fx, fy = E.apply(x), E.apply(y)
    A = E.value
    return (
        A @ A @ lie_bracket_at(x, y, p)
        + lie_bracket_at(fx, fy, p)
        - A @ lie_bracket_at(fx, y, p)
        - A @ lie_bracket_at(x, fy, p)
    )


def nijenhuis_connection_at(M: ManifoldSpec, S: StructureField, X, Y, p) -> np.ndarray:
    """Nijenhuis tensor of a product structure written with the symmetric
    connection: (nabla_{PX}P)Y - (nabla_{PY}P)X - P(nabla_X P)Y + P(nabla_Y P)X."""
    if S.kind is not Kind.PRODUCT:
        raise ValueError("connection form of the Nijenhuis tensor is defined for product structures")
    D = nabla_endo_at(M, S, p)
    A = S.matrix_at(p)
    x, y = value_at(X, p), value_at(Y, p)
    return (
        nabla_endo_apply(D, A @ x, y)
        - nabla_endo_apply(D, A @ y, x)
        - A @ nabla_endo_apply(D, x, y)
        + A @ nabla_endo_apply(D, y, x)
    )


def lie_derivative_endo_at(S, Y, X, p) -> np.ndarray:
    """(L_Y phi)X = [Y, phiX] - phi[Y, X]."""
    E = S.jet(p)
    y, x = as_jet(Y, p), as_jet(X, p)
    return lie_bracket_at(y, E.apply(x), p) - E.value @ lie_bracket_at(y, x, p)


# --------------------------------------------------------------------------
# Tachibana operator family


def _pair(U: EndoJet, a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ U.value @ b)


def _directional(U: EndoJet, y: VecJet, z: VecJet, v: np.ndarray) -> float:
    """v(u(Y, Z)) from the jets of u, Y and Z."""
    du = np.einsum("abi,a,b->i", U.deriv, y.value, z.value)
    dy = y.jac.T @ U.value @ z.value
    dz = z.jac.T @ U.value.T @ y.value
    return float((du + dy + dz) @ v)


def tachibana_at(M: ManifoldSpec, S, u, X, Y, Z, p) -> float:
    """(phiX)(u(Y,Z)) - X(u(phiY,Z)) + u((L_Y phi)X, Z) + u(Y, (L_Z phi)X)."""
    E = S.jet(p)
    U = u.jet(p)
    x, y, z = as_jet(X, p), as_jet(Y, p), as_jet(Z, p)
    return (
        _directional(U, y, z, E.value @ x.value)
        - _directional(U, E.apply(y), z, x.value)
        + _pair(U, lie_derivative_endo_at(S, y, x, p), z.value)
        + _pair(U, y.value, lie_derivative_endo_at(S, z, x, p))
    )


def psi_at(M: ManifoldSpec, S, u, X, Y, Z, p) -> float:
    """Tachibana operator symmetrized in its outer arguments."""
    return tachibana_at(M, S, u, X, Y, Z, p) + tachibana_at(M, S, u, Z, Y, X, p)


def star_condition_residual_at(M: ManifoldSpec, S: StructureField, X, Y, Z, p) -> float:
    """|Psi(X,Y,Z) - Psi(Y,X,Z) - Psi(phiY, phiX, Z)| with u = h."""
    warn_unless(compatibility_at(M, S, p).pure, "star condition evaluated with a metric that is not pure")
    from .geometry import CovariantTwoTensorField

    h = CovariantTwoTensorField.from_metric(M)
    E = S.jet(p)
    x, y, z = as_jet(X, p), as_jet(Y, p), as_jet(Z, p)
    lhs = psi_at(M, S, h, x, y, z, p)
    rhs = psi_at(M, S, h, y, x, z, p) + psi_at(M, S, h, E.apply(y), E.apply(x), z, p)
    return abs(lhs - rhs)


# --------------------------------------------------------------------------
# S operator


def s_operator_at(M: ManifoldSpec, S: StructureField, X, Y, p) -> np.ndarray:
    """(nabla_X phi)Y + phi (nabla_{phiX} phi) Y."""
    D = nabla_endo_at(M, S, p)
    A = S.matrix_at(p)
    x, y = value_at(X, p), value_at(Y, p)
    return nabla_endo_apply(D, x, y) + A @ nabla_endo_apply(D, A @ x, y)


# --------------------------------------------------------------------------
# Fundamental form and its exterior derivative


def _omega_jet(M: ManifoldSpec, P: StructureField, p) -> EndoJet:
    """Jet of Omega_ab = h(P d_a, d_b) = (P^T h)_ab."""
    h, _ = metric_at(M, p)
    dh = metric_derivatives_at(M, p)
    E = P.jet(p)
    value = E.value.T @ h
    deriv = np.einsum("lai,lb->abi", E.deriv, h) + np.einsum("la,lbi->abi", E.value, dh)
    return EndoJet(value, deriv)


def _nabla_omega(M, W: EndoJet, gamma, x: VecJet, y: VecJet, z: VecJet) -> float:
    def nab(a, b):
        return b.jac @ a.value + np.einsum("kij,i,j->k", gamma, a.value, b.value)

    return (
        _directional(W, y, z, x.value)
        - _pair(W, nab(x, y), z.value)
        - _pair(W, y.value, nab(x, z))
    )


def d_omega_at(M: ManifoldSpec, S: StructureField, X, Y, Z, p) -> float:
    """dOmega(X,Y,Z) = (nabla_X Omega)(Y,Z) - (nabla_Y Omega)(X,Z) + (nabla_Z Omega)(X,Y).

    Golden structures use the form of their product twin.
    """
    P = product_twin(S)
    warn_unless(compatibility_at(M, P, p).hyperbolic,
                "fundamental form differentiated with a metric that is not hyperbolic")
    W = _omega_jet(M, P, p)
    gamma = christoffel_at(M, p)
    x, y, z = as_jet(X, p), as_jet(Y, p), as_jet(Z, p)
    return (
        _nabla_omega(M, W, gamma, x, y, z)
        - _nabla_omega(M, W, gamma, y, x, z)
        + _nabla_omega(M, W, gamma, z, x, y)
    )


def d_omega_coordinate_at(M: ManifoldSpec, S: StructureField, X, Y, Z, p) -> float:
    """Same cyclic sum from partial derivatives alone: d_i W_jk + d_j W_ki + d_k W_ij.

    Independent of the Christoffel symbols; used as a cross-check.
    """
    W = _omega_jet(M, product_twin(S), p)
    T = (
        np.einsum("jki->ijk", W.deriv)
        + np.einsum("kij->ijk", W.deriv)
        + np.einsum("ijk->ijk", W.deriv)
    )
    return float(np.einsum("ijk,i,j,k->", T, value_at(X, p), value_at(Y, p), value_at(Z, p)))


# --------------------------------------------------------------------------
# Component tensors at a point
#
# The Nijenhuis tensor and dOmega are tensorial, so they are fixed by their
# values on coordinate vectors.  The Tachibana operator is tensorial only
# when u is pure: a rescaling Z -> fZ adds (Xf)(u(Y, phiZ) - u(phiY, Z)).
# These closed forms are used for bulk sampling and are cross-checked
# against the field-based versions in the tests.


def nijenhuis_tensor_at(S, p) -> np.ndarray:
    """Components ``N[k, a, b]`` of N_phi(d_a, d_b)."""
    E = S.jet(p)
    A, dA = E.value, E.deriv  # dA[k, j, i] = d_i A^k_j
    bracket = np.einsum("ia,kbi->kab", A, dA) - np.einsum("ib,kai->kab", A, dA)
    return (
        bracket
        + np.einsum("kl,lab->kab", A, dA)
        - np.einsum("kl,lba->kab", A, dA)
    )


def tachibana_tensor_at(M: ManifoldSpec, S, u, p) -> np.ndarray:
    """Components ``T[a, b, c]`` of the Tachibana operator on coordinate fields.

    Agrees with ``tachibana_at`` for arbitrary fields only when u is pure.
    """
    E, U = S.jet(p), u.jet(p)
    A, dA = E.value, E.deriv
    W, dW = U.value, U.deriv  # dW[b, c, i] = d_i u_bc
    return (
        np.einsum("ia,bci->abc", A, dW)
        - np.einsum("lba,lc->abc", dA, W)
        - np.einsum("lb,lca->abc", A, dW)
        + np.einsum("kab,kc->abc", dA, W)
        + np.einsum("bk,kac->abc", W, dA)
    )


def d_omega_tensor_at(M: ManifoldSpec, S: StructureField, p) -> np.ndarray:
    """Components of dOmega from the covariant cyclic formula."""
    W = _omega_jet(M, product_twin(S), p)
    gamma = christoffel_at(M, p)
    # nW[i, j, k] = (nabla_i Omega)_jk
    nW = (
        np.einsum("jki->ijk", W.deriv)
        - np.einsum("lij,lk->ijk", gamma, W.value)
        - np.einsum("lik,jl->ijk", gamma, W.value)
    )
    return nW - np.einsum("jik->ijk", nW) + np.einsum("kij->ijk", nW)


def psi_tensor_at(M: ManifoldSpec, S, u, p) -> np.ndarray:
    T = tachibana_tensor_at(M, S, u, p)
    return T + np.einsum("abc->cba", T)


def star_tensor_at(M: ManifoldSpec, S: StructureField, p) -> np.ndarray:
    """Components of Psi(X,Y,Z) - Psi(Y,X,Z) - Psi(phiY, phiX, Z) with u = h (pure metrics)."""
    from .geometry import CovariantTwoTensorField

    Psi = psi_tensor_at(M, S, CovariantTwoTensorField.from_metric(M), p)
    A = S.matrix_at(p)
    return Psi - np.einsum("bac->abc", Psi) - np.einsum("ib,ja,ijc->abc", A, A, Psi)


def tachibana_on_fields_at(M: ManifoldSpec, S, u, p, xs, ys, zs, dzs) -> np.ndarray:
    """Tachibana operator on many field triples at once.

    ``xs, ys, zs`` hold field values at p (one row per triple) and ``dzs``
    the Jacobians of the Z fields.  The closed form on coordinate fields is
    corrected by the Z-derivative term y^T (u phi - phi^T u) X(Z), which
    vanishes when u is pure.
    """
    T = tachibana_tensor_at(M, S, u, p)
    A, U = S.matrix_at(p), u.jet(p).value
    base = np.einsum("abc,fa,fb,fc->f", T, xs, ys, zs)
    xz = np.einsum("fci,fi->fc", dzs, xs)
    return base + np.einsum("fb,bc,fc->f", ys, U @ A - A.T @ U, xz)
