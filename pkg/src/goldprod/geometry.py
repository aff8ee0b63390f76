"""Coordinate charts with a (pseudo-)Riemannian metric and the Levi-Civita
calculus needed by the structure operators.

Fields are evaluated pointwise as first-order jets: a vector field becomes
``VecJet(value, jac)`` with ``jac[k, i] = d_i X^k`` and an endomorphism field
becomes ``EndoJet(value, deriv)`` with ``deriv[k, j, i] = d_i phi^k_j``.
Anything exposing ``jet(p)`` can be passed where a field is expected; plain
arrays are treated as constant-coefficient fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .expr import Expr, jet_matrix, max_var_index, parse_expression

DEFAULT_SEED = 0x5EED
DEGENERACY_TOL = 1e-10
DROP_TOL = 1e-9


class DegenerateMetricError(ValueError):
    pass


class DegenerateFrameError(ValueError):
    pass


# --------------------------------------------------------------------------
# Jets of fields at a point


@dataclass(frozen=True)
class VecJet:
    value: np.ndarray
    jac: np.ndarray

    def jet(self, p):
        return self


@dataclass(frozen=True)
class EndoJet:
    value: np.ndarray
    deriv: np.ndarray

    def apply(self, X: VecJet) -> VecJet:
        """Jet of the composite field phi(X)."""
        return VecJet(
            self.value @ X.value,
            np.einsum("kji,j->ki", self.deriv, X.value) + self.value @ X.jac,
        )


def as_jet(X, p) -> VecJet:
    if hasattr(X, "jet"):
        return X.jet(p)
    v = np.asarray(X, dtype=float)
    return VecJet(v, np.zeros((len(v), len(v))))


def value_at(X, p) -> np.ndarray:
    if hasattr(X, "jet"):
        return X.jet(p).value
    return np.asarray(X, dtype=float)


def _key(p) -> tuple:
    return tuple(float(x) for x in np.asarray(p, dtype=float))


def _parse_matrix(rows, names) -> tuple:
    return tuple(tuple(e if not isinstance(e, str) else parse_expression(e, names) for e in row) for row in rows)


def _parse_vector(items, names) -> tuple:
    return tuple(e if not isinstance(e, str) else parse_expression(e, names) for e in items)


# --------------------------------------------------------------------------
# Manifolds and fields


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    """A single global chart with metric components ``metric[i][j] = h_ij``."""

    name: str
    coordinate_names: tuple
    sample_box: tuple
    metric: tuple

    def __post_init__(self):
        n = len(self.coordinate_names)
        if n == 0:
            raise ValueError("manifold needs at least one coordinate")
        if len(self.sample_box) != n:
            raise ValueError(f"{self.name}: sample_box has {len(self.sample_box)} intervals, expected {n}")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ValueError(f"{self.name}: metric must be {n}x{n}")
        for row in self.metric:
            for e in row:
                if max_var_index(e) >= n:
                    raise ValueError(f"{self.name}: metric uses a coordinate index beyond dimension {n}")

    @classmethod
    def from_strings(cls, name, coordinate_names, sample_box, metric) -> "ManifoldSpec":
        names = tuple(coordinate_names)
        box = tuple((float(lo), float(hi)) for lo, hi in sample_box)
        return cls(name, names, box, _parse_matrix(metric, names))

    @property
    def dim(self) -> int:
        return len(self.coordinate_names)

    def sample_points(self, count: int = 100, seed: int = DEFAULT_SEED) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.sample_box])
        hi = np.array([b[1] for b in self.sample_box])
        return lo + (hi - lo) * rng.random((count, self.dim))

    def validate(self, points=None) -> None:
        """Check symmetry and nondegeneracy of the metric at sample points."""
        if points is None:
            points = self.sample_points()
        for p in points:
            h, _, _ = jet_matrix(self.metric, p)
            if np.max(np.abs(h - h.T)) > 1e-12:
                raise ValueError(f"{self.name}: metric not symmetric at {tuple(p)}")
            metric_at(self, p)


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    components: tuple

    @classmethod
    def from_strings(cls, components, coordinate_names) -> "VectorFieldSpec":
        return cls(_parse_vector(components, tuple(coordinate_names)))

    def jet(self, p) -> VecJet:
        return _vector_jet(self, _key(p))


@lru_cache(maxsize=16384)
def _vector_jet(X: VectorFieldSpec, key: tuple) -> VecJet:
    if len(X.components) != len(key):
        raise ValueError(f"vector field has {len(X.components)} components, point has {len(key)}")
    v, g, _ = jet_matrix(X.components, key)
    return VecJet(v, g)


@dataclass(frozen=True, eq=False)
class AffineField:
    """X^k = offset^k + linear[k, i] x^i; jets without expression evaluation."""

    offset: np.ndarray
    linear: np.ndarray

    def jet(self, p) -> VecJet:
        p = np.asarray(p, dtype=float)
        return VecJet(self.offset + self.linear @ p, self.linear)

    def as_spec(self, coordinate_names) -> VectorFieldSpec:
        n = len(self.offset)
        comps = []
        for k in range(n):
            terms = [repr(float(self.offset[k]))] + [
                f"{float(self.linear[k, i])!r}*{coordinate_names[i]}" for i in range(n)
            ]
            comps.append(" + ".join(f"({t})" for t in terms))
        return VectorFieldSpec.from_strings(comps, coordinate_names)


def random_affine_field(n: int, rng: np.random.Generator) -> AffineField:
    return AffineField(rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, (n, n)))


@dataclass(frozen=True, eq=False)
class EndomorphismField:
    """(1,1)-tensor with ``components[k][j] = phi^k_j`` (column j is phi(d_j))."""

    components: tuple

    def __post_init__(self):
        n = len(self.components)
        if any(len(row) != n for row in self.components):
            raise ValueError("endomorphism components must be square")

    @classmethod
    def from_strings(cls, components, coordinate_names) -> "EndomorphismField":
        return cls(_parse_matrix(components, tuple(coordinate_names)))

    @property
    def dim(self) -> int:
        return len(self.components)

    def jet(self, p) -> EndoJet:
        return _endo_jet(self, _key(p))

    def matrix_at(self, p) -> np.ndarray:
        return self.jet(p).value


@lru_cache(maxsize=16384)
def _endo_jet(phi: EndomorphismField, key: tuple) -> EndoJet:
    if phi.dim != len(key):
        raise ValueError(f"endomorphism is {phi.dim}x{phi.dim}, point has dimension {len(key)}")
    v, g, _ = jet_matrix(phi.components, key)
    return EndoJet(v, g)


@dataclass(frozen=True, eq=False)
class CovariantTwoTensorField:
    """(0,2)-tensor with ``components[a][b] = u(d_a, d_b)``."""

    components: tuple

    @classmethod
    def from_strings(cls, components, coordinate_names) -> "CovariantTwoTensorField":
        return cls(_parse_matrix(components, tuple(coordinate_names)))

    @classmethod
    def from_metric(cls, M: ManifoldSpec) -> "CovariantTwoTensorField":
        return cls(M.metric)

    def jet(self, p) -> EndoJet:
        return _endo_jet_2tensor(self, _key(p))


@lru_cache(maxsize=16384)
def _endo_jet_2tensor(u: CovariantTwoTensorField, key: tuple) -> EndoJet:
    v, g, _ = jet_matrix(u.components, key)
    return EndoJet(v, g)


@dataclass(frozen=True)
class FrameAt:
    point: np.ndarray
    vectors: np.ndarray  # rows are frame vectors
    signs: tuple


# --------------------------------------------------------------------------
# Metric and connection


@lru_cache(maxsize=16384)
def _metric_data(M: ManifoldSpec, key: tuple):
    h, dh, _ = jet_matrix(M.metric, key)
    det = np.linalg.det(h)
    if abs(det) <= DEGENERACY_TOL:
        raise DegenerateMetricError(f"{M.name}: metric degenerate at {key} (det={det:.3g})")
    hinv = np.linalg.inv(h)
    # dh[i, j, k] = d_k h_ij
    lowered = 0.5 * (np.einsum("jli->ijl", dh) + np.einsum("ilj->ijl", dh) - np.einsum("ijl->ijl", dh))
    gamma = np.einsum("kl,ijl->kij", hinv, lowered)
    for arr in (h, hinv, dh, gamma):
        arr.setflags(write=False)
    return h, hinv, dh, gamma


def metric_at(M: ManifoldSpec, p) -> tuple[np.ndarray, np.ndarray]:
    """Metric components h_ij and their inverse h^ij at ``p``."""
    h, hinv, _, _ = _metric_data(M, _key(p))
    return h, hinv


def metric_derivatives_at(M: ManifoldSpec, p) -> np.ndarray:
    """Array ``dh[i, j, k] = d_k h_ij``."""
    return _metric_data(M, _key(p))[2]


def christoffel_at(M: ManifoldSpec, p) -> np.ndarray:
    """Levi-Civita symbols ``gamma[k, i, j] = Gamma^k_ij``."""
    return _metric_data(M, _key(p))[3]


def inner(M: ManifoldSpec, p, X, Y) -> float:
    h, _ = metric_at(M, p)
    return float(value_at(X, p) @ h @ value_at(Y, p))


def lie_bracket_at(X, Y, p) -> np.ndarray:
    """[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k."""
    x, y = as_jet(X, p), as_jet(Y, p)
    return y.jac @ x.value - x.jac @ y.value


def _nabla(gamma: np.ndarray, x: VecJet, y: VecJet) -> np.ndarray:
    return y.jac @ x.value + np.einsum("kij,i,j->k", gamma, x.value, y.value)


def covariant_derivative_vector_at(M: ManifoldSpec, X, Y, p) -> np.ndarray:
    """(nabla_X Y)^k = X^i (d_i Y^k + Gamma^k_ij Y^j)."""
    return _nabla(christoffel_at(M, p), as_jet(X, p), as_jet(Y, p))


def covariant_derivative_endo_at(M: ManifoldSpec, phi, X, Y, p) -> np.ndarray:
    """(nabla_X phi) Y computed as nabla_X(phi Y) - phi(nabla_X Y)."""
    gamma = christoffel_at(M, p)
    E = phi.jet(p)
    x, y = as_jet(X, p), as_jet(Y, p)
    return _nabla(gamma, x, E.apply(y)) - E.value @ _nabla(gamma, x, y)


def nabla_endo_at(M: ManifoldSpec, phi, p) -> np.ndarray:
    """Tensor ``D[k, j, i]`` with ((nabla_X phi) Y)^k = D[k, j, i] X^i Y^j."""
    gamma = christoffel_at(M, p)
    E = phi.jet(p)
    return (
        E.deriv
        + np.einsum("kil,lj->kji", gamma, E.value)
        - np.einsum("kl,lij->kji", E.value, gamma)
    )


def nabla_endo_apply(D: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("kji,i,j->k", D, X, Y)


# --------------------------------------------------------------------------
# Frames and signature


def orthonormalize(h: np.ndarray, vectors: Sequence, pivot_tol: float = DEGENERACY_TOL,
                   drop_tol: float = DROP_TOL) -> tuple[np.ndarray, tuple]:
    """Indefinite Gram-Schmidt with greedy pivoting on |h(v, v)|.

    Vectors whose projection vanishes (Euclidean norm below ``drop_tol``) are
    dropped, so the result spans the span of ``vectors``.  When every
    remaining direction is individually null, the pair with the largest
    mutual pairing is combined into a non-null vector; if no pair couples
    either, the restricted metric is null there and DegenerateFrameError is
    raised.  Frame vectors are returned as rows, +1 signs first.
    """
    remaining = [np.array(v, dtype=float) for v in vectors]
    frame, signs = [], []
    while True:
        remaining = [v for v in remaining if np.linalg.norm(v) > drop_tol]
        if not remaining:
            break
        norms = [float(v @ h @ v) for v in remaining]
        best = int(np.argmax(np.abs(norms)))
        if abs(norms[best]) > pivot_tol:
            v = remaining.pop(best)
        else:
            V = np.array(remaining)
            gram = V @ h @ V.T
            np.fill_diagonal(gram, 0.0)
            a, b = np.unravel_index(int(np.argmax(np.abs(gram))), gram.shape)
            if abs(gram[a, b]) <= pivot_tol:
                raise DegenerateFrameError("metric is numerically null on the remaining directions")
            v = remaining[a] + np.sign(gram[a, b]) * remaining[b]
            remaining.pop(a)
        q = float(v @ h @ v)
        e = v / np.sqrt(abs(q))
        s = 1 if q > 0 else -1
        frame.append(e)
        signs.append(s)
        remaining = [w - s * float(e @ h @ w) * e for w in remaining]
    for i, e in enumerate(frame):
        lead = np.flatnonzero(np.abs(e) > 1e-12)
        if len(lead) and e[lead[0]] < 0:
            frame[i] = -e
    # +1 block first; within a block, order by dominant coordinate
    order = sorted(range(len(signs)), key=lambda i: (-signs[i], int(np.argmax(np.abs(frame[i]) > 0.5 * np.max(np.abs(frame[i]))))))
    return np.array([frame[i] for i in order]).reshape(len(order), len(h)), tuple(signs[i] for i in order)


def orthonormal_frame_at(M: ManifoldSpec, p) -> FrameAt:
    h, _ = metric_at(M, p)
    vectors, signs = orthonormalize(h, np.eye(M.dim))
    if len(signs) != M.dim:
        raise DegenerateFrameError(f"{M.name}: frame has {len(signs)} vectors, expected {M.dim}")
    return FrameAt(np.asarray(p, dtype=float), vectors, signs)


def rotate_frame(frame: FrameAt, rng: np.random.Generator) -> FrameAt:
    """Random orthogonal mixing within each block of equal signs."""
    vectors = frame.vectors.copy()
    signs = np.array(frame.signs)
    for s in (1, -1):
        idx = np.flatnonzero(signs == s)
        if len(idx) > 1:
            q, r = np.linalg.qr(rng.normal(size=(len(idx), len(idx))))
            q = q * np.sign(np.diag(r))
            vectors[idx] = q.T @ vectors[idx]
    return FrameAt(frame.point, vectors, frame.signs)


def signature_at(M: ManifoldSpec, p) -> tuple[int, int]:
    h, _ = metric_at(M, p)
    eig = np.linalg.eigvalsh(h)
    if np.min(np.abs(eig)) <= DEGENERACY_TOL:
        raise DegenerateMetricError(f"{M.name}: zero eigenvalue at {tuple(p)}")
    return int(np.sum(eig > 0)), int(np.sum(eig < 0))


def divergence_endo_at(M: ManifoldSpec, phi, p, frame: FrameAt | None = None) -> np.ndarray:
    """div phi = sum_i h(e_i, e_i) (nabla_{e_i} phi) e_i over an orthonormal frame."""
    if frame is None:
        frame = orthonormal_frame_at(M, p)
    D = nabla_endo_at(M, phi, p)
    return sum(s * nabla_endo_apply(D, e, e) for e, s in zip(frame.vectors, frame.signs))
