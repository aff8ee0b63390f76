"""Almost product (P^2 = I) and almost golden (G^2 = G + I) structures.

A product structure P and a golden structure G are twins when
G = (I + sqrt5 P)/2, equivalently P = (2G - I)/sqrt5.  The conjugate of P is
-P and the conjugate of G is I - G.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .expr import (
    SIGBAR,
    SIGMA,
    SQRT5,
    BinOp,
    Const,
    Expr,
    Neg,
    Num,
    const,
    constant_value,
    is_constant,
)
from .geometry import (
    EndomorphismField,
    ManifoldSpec,
    metric_at,
    value_at,
)

COMPAT_TOL = 1e-9
POLY_TOL = 1e-9
RANK_TOL = 1e-9


class Kind(str, enum.Enum):
    PRODUCT = "product"
    GOLDEN = "golden"


EIGENVALUES = {Kind.PRODUCT: (1.0, -1.0), Kind.GOLDEN: (SIGMA, SIGBAR)}


def _self_check() -> None:
    for root in (SIGMA, SIGBAR):
        if abs(root * root - root - 1.0) > 1e-12:
            raise RuntimeError("golden-ratio arithmetic failed its startup check")
    if abs(SIGMA * SIGBAR + 1.0) > 1e-12:
        raise RuntimeError("golden-ratio arithmetic failed its startup check")


_self_check()


class InvalidStructureError(ValueError):
    pass


class CompatibilityWarning(UserWarning):
    """Raised (as a warning) when an operator is evaluated outside the
    compatibility regime it is defined for."""


@dataclass(frozen=True, eq=False)
class StructureField:
    kind: Kind
    endo: EndomorphismField
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))

    @classmethod
    def from_strings(cls, kind, components, coordinate_names, name: str = "") -> "StructureField":
        return cls(Kind(kind), EndomorphismField.from_strings(components, coordinate_names), name)

    @property
    def eigenvalues(self) -> tuple[float, float]:
        return EIGENVALUES[self.kind]

    @property
    def dim(self) -> int:
        return self.endo.dim

    def jet(self, p):
        return self.endo.jet(p)

    def matrix_at(self, p) -> np.ndarray:
        return self.endo.jet(p).value


def polynomial_residual_at(S: StructureField, p) -> float:
    A = S.matrix_at(p)
    I = np.eye(len(A))
    R = A @ A - I if S.kind is Kind.PRODUCT else A @ A - A - I
    return float(np.max(np.abs(R)))


# --------------------------------------------------------------------------
# Twin and conjugate


_NAMED = {SIGMA: Const("sigma"), SIGBAR: Const("sigbar")}


def _fold(value: float) -> Expr:
    # snap round-off so constant round trips are exact
    for target in (SIGMA, SIGBAR, *map(float, range(-4, 5))):
        if abs(value - target) <= 4 * np.finfo(float).eps * max(1.0, abs(target)):
            value = target
            break
    if value in _NAMED:
        return _NAMED[value]
    return const(value)


def _affine_entry(e: Expr, scale: float, shift: float) -> Expr:
    """Expression for shift + scale * e, folded when e is constant."""
    if is_constant(e):
        return _fold(shift + scale * constant_value(e))
    scaled = BinOp("*", const(scale), e) if scale != 1.0 else e
    if shift == 0.0:
        return scaled
    if shift < 0:
        return BinOp("-", scaled, Num(-shift))
    return BinOp("+", Num(shift), scaled)


def _map_entries(S: StructureField, scale: float, diag_shift: float, off_shift: float = 0.0):
    n = S.dim
    rows = []
    for k in range(n):
        rows.append(tuple(
            _affine_entry(S.endo.components[k][j], scale, diag_shift if k == j else off_shift)
            for j in range(n)
        ))
    return EndomorphismField(tuple(rows))


def twin_of(S: StructureField) -> StructureField:
    """G = (I + sqrt5 P)/2 for a product structure, P = (2G - I)/sqrt5 for a golden one."""
    if S.kind is Kind.PRODUCT:
        endo = _map_entries(S, SQRT5 / 2.0, 0.5)
        return StructureField(Kind.GOLDEN, endo, S.name + "~twin" if S.name else "")
    endo = _map_entries(S, 2.0 / SQRT5, -1.0 / SQRT5)
    return StructureField(Kind.PRODUCT, endo, S.name + "~twin" if S.name else "")


def conjugate_of(S: StructureField) -> StructureField:
    """-P for a product structure, I - G for a golden one."""
    if S.kind is Kind.PRODUCT:
        endo = _map_entries(S, -1.0, 0.0)
    else:
        endo = _map_entries(S, -1.0, 1.0)
    return StructureField(S.kind, endo, S.name + "~conj" if S.name else "")


def product_twin(S: StructureField) -> StructureField:
    return S if S.kind is Kind.PRODUCT else twin_of(S)


def conjugate_matrix(S: StructureField, A: np.ndarray) -> np.ndarray:
    return -A if S.kind is Kind.PRODUCT else np.eye(len(A)) - A


# --------------------------------------------------------------------------
# Eigenprojectors


def eigenprojectors_at(S: StructureField, p) -> tuple[np.ndarray, np.ndarray]:
    """(pi_k, pi_kbar) with pi_k = (phi - kbar I)/(k - kbar)."""
    res = polynomial_residual_at(S, p)
    if res > POLY_TOL:
        raise InvalidStructureError(f"structure polynomial residual {res:.3g} at {tuple(p)}")
    A = S.matrix_at(p)
    k, kbar = S.eigenvalues
    I = np.eye(len(A))
    pk = (A - kbar * I) / (k - kbar)
    return pk, I - pk


def eigen_ranks_at(S: StructureField, p) -> tuple[int, int]:
    return tuple(
        int(np.sum(np.linalg.svd(pi, compute_uv=False) > RANK_TOL)) for pi in eigenprojectors_at(S, p)
    )


# --------------------------------------------------------------------------
# Metric compatibility


@dataclass(frozen=True)
class CompatibilityVerdict:
    pure: bool
    hyperbolic: bool
    max_pure_residual: float
    max_hyperbolic_residual: float

    @classmethod
    def from_residuals(cls, pure_res: float, hyp_res: float, tol: float = COMPAT_TOL):
        return cls(pure_res < tol, hyp_res < tol, pure_res, hyp_res)


def compatibility_residuals_at(M: ManifoldSpec, S: StructureField, p) -> tuple[float, float]:
    h, _ = metric_at(M, p)
    A = S.matrix_at(p)
    pure = float(np.max(np.abs(h @ A - A.T @ h)))
    hyp = float(np.max(np.abs(h @ conjugate_matrix(S, A) - A.T @ h)))
    return pure, hyp


def compatibility_at(M: ManifoldSpec, S: StructureField, p, tol: float = COMPAT_TOL) -> CompatibilityVerdict:
    return CompatibilityVerdict.from_residuals(*compatibility_residuals_at(M, S, p), tol)


def compatibility_over(M: ManifoldSpec, S: StructureField, points, tol: float = COMPAT_TOL) -> CompatibilityVerdict:
    """Conjunction over a sample set, reporting the worst residuals."""
    pure_res, hyp_res = 0.0, 0.0
    for p in points:
        a, b = compatibility_residuals_at(M, S, p)
        pure_res, hyp_res = max(pure_res, a), max(hyp_res, b)
    return CompatibilityVerdict.from_residuals(pure_res, hyp_res, tol)


def warn_unless(condition: bool, message: str) -> None:
    if not condition:
        warnings.warn(message, CompatibilityWarning, stacklevel=3)


def fundamental_form_at(M: ManifoldSpec, S: StructureField, X, Y, p) -> float:
    """Omega(X, Y) = h(PX, Y); golden structures use their product twin."""
    P = product_twin(S)
    verdict = compatibility_at(M, P, p)
    warn_unless(verdict.pure or verdict.hyperbolic,
                "metric is neither pure nor hyperbolic for this structure; form may not be antisymmetric")
    h, _ = metric_at(M, p)
    return float((P.matrix_at(p) @ value_at(X, p)) @ h @ value_at(Y, p))
