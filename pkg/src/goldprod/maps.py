"""Smooth maps between charts: pushforward, intertwining with structures,
second fundamental form, tension fields and harmonicity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .classifier import FLAG_TOL, vidal_check
from .expr import max_var_index
from .geometry import (
    DEFAULT_SEED,
    DegenerateFrameError,
    FrameAt,
    ManifoldSpec,
    _key,
    _parse_vector,
    christoffel_at,
    divergence_endo_at,
    metric_at,
    nabla_endo_apply,
    nabla_endo_at,
    orthonormal_frame_at,
    orthonormalize,
    value_at,
)
from .operators import s_operator_at
from .structures import (
    StructureField,
    compatibility_over,
    conjugate_of,
    eigenprojectors_at,
    product_twin,
    twin_of,
)


@dataclass(frozen=True, eq=False)
class SmoothMapSpec:
    """F: source -> target with ``components[gamma]`` in source coordinates."""

    name: str
    source: ManifoldSpec
    target: ManifoldSpec
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.target.dim:
            raise ValueError(
                f"{self.name}: {len(self.components)} components for a {self.target.dim}-dimensional target"
            )
        for e in self.components:
            if max_var_index(e) >= self.source.dim:
                raise ValueError(f"{self.name}: component uses a coordinate beyond the source dimension")

    @classmethod
    def from_strings(cls, name, source: ManifoldSpec, target: ManifoldSpec, components) -> "SmoothMapSpec":
        return cls(name, source, target, _parse_vector(components, source.coordinate_names))

    def jets_at(self, p):
        """(F(p), J[gamma, i], H[gamma, i, j])."""
        return _map_jets(self, _key(p))

    def validate(self, points) -> None:
        """Image of the sample points must be admissible for the target metric."""
        for p in points:
            metric_at(self.target, self.jets_at(p)[0])


@lru_cache(maxsize=16384)
def _map_jets(F: SmoothMapSpec, key: tuple):
    from .expr import jet_matrix

    return jet_matrix(F.components, key)


def pushforward_at(F: SmoothMapSpec, X, p) -> np.ndarray:
    return F.jets_at(p)[1] @ value_at(X, p)


# --------------------------------------------------------------------------
# Intertwining


JACOBIAN_TOL = 1e-9
MAIN_RELATIONS = ("paraholomorphic", "anti_paraholomorphic", "golden", "antigolden")
# (source operator, target operator) for F_* o A = B o F_*; hats denote conjugates.
CROSS_RELATIONS = (
    ("P", "G"),
    ("G", "P"),
    ("P", "Ghat"),
    ("Phat", "Ghat"),
    ("Phat", "G"),
    ("G", "Phat"),
    ("Ghat", "Phat"),
    ("Ghat", "P"),
)


def cross_relation_name(a: str, b: str) -> str:
    return f"{a}->{b}"


@dataclass
class IntertwiningClass:
    residuals: dict
    flags: dict
    lam: int | None
    tol: float
    diagnostics: list = field(default_factory=list)

    @property
    def paraholomorphic(self) -> bool:
        return self.flags["paraholomorphic"]

    @property
    def anti_paraholomorphic(self) -> bool:
        return self.flags["anti_paraholomorphic"]

    @property
    def golden(self) -> bool:
        return self.flags["golden"]

    @property
    def antigolden(self) -> bool:
        return self.flags["antigolden"]

    def cross_flags(self) -> dict:
        return {k: v for k, v in self.flags.items() if k not in MAIN_RELATIONS}

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "tol": self.tol,
            "relations": {k: {"residual": self.residuals[k], "holds": self.flags[k]} for k in self.residuals},
            "diagnostics": list(self.diagnostics),
        }


def _operators(S: StructureField) -> dict:
    P = product_twin(S)
    G = twin_of(P)
    return {"P": P, "Phat": conjugate_of(P), "G": G, "Ghat": conjugate_of(G)}


def relation_residual(J: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
    """Largest Euclidean norm of (F_* A - B F_*) applied to a basis vector."""
    D = J @ A - B @ J
    return float(np.max(np.linalg.norm(D, axis=0))) if D.size else 0.0


def intertwining_class(F: SmoothMapSpec, S_M: StructureField, S_N: StructureField, sample,
                       tol: float = FLAG_TOL) -> IntertwiningClass:
    ops_m, ops_n = _operators(S_M), _operators(S_N)
    pairs = {
        "paraholomorphic": ("P", "P"),
        "anti_paraholomorphic": ("P", "Phat"),
        "golden": ("G", "G"),
        "antigolden": ("G", "Ghat"),
    }
    for a, b in CROSS_RELATIONS:
        pairs[cross_relation_name(a, b)] = (a, b)
    residuals = {name: 0.0 for name in pairs}
    for p in sample:
        q, J, _ = F.jets_at(p)
        mats_m = {k: S.matrix_at(p) for k, S in ops_m.items()}
        mats_n = {k: S.matrix_at(q) for k, S in ops_n.items()}
        for name, (a, b) in pairs.items():
            residuals[name] = max(residuals[name], relation_residual(J, mats_m[a], mats_n[b]))
    flags = {name: bool(r < tol) for name, r in residuals.items()}
    lam = 1 if flags["paraholomorphic"] else (-1 if flags["anti_paraholomorphic"] else None)
    result = IntertwiningClass(residuals, flags, lam, tol)
    if flags["paraholomorphic"] and flags["anti_paraholomorphic"] and max_jacobian_norm(F, sample) > JACOBIAN_TOL:
        result.diagnostics.append("both paraholomorphic and anti-paraholomorphic with nonzero differential")
    return result


def max_jacobian_norm(F: SmoothMapSpec, sample) -> float:
    return max((float(np.max(np.abs(F.jets_at(p)[1]))) for p in sample), default=0.0)


def constancy_diagnostic(F: SmoothMapSpec, S_M: StructureField, S_N: StructureField, sample,
                         tol: float = FLAG_TOL, jacobian_tol: float = JACOBIAN_TOL) -> list[str]:
    """Cross relations force constant maps; flag any that hold for a map
    whose differential is not zero."""
    cls = intertwining_class(F, S_M, S_N, sample, tol)
    jac = max_jacobian_norm(F, sample)
    if jac <= jacobian_tol:
        return []
    return [
        f"cross relation {name} holds (residual {cls.residuals[name]:.3e}) "
        f"but the differential is nonzero (max {jac:.3e}): tolerance too loose or authoring error"
        for name, holds in cls.cross_flags().items()
        if holds
    ]


# --------------------------------------------------------------------------
# Second fundamental form and tension


def second_fundamental_tensor_at(F: SmoothMapSpec, p) -> np.ndarray:
    """B[gamma, i, j] = (nabla F_*)(d_i, d_j)^gamma."""
    q, J, H = F.jets_at(p)
    gm = christoffel_at(F.source, p)
    gn = christoffel_at(F.target, q)
    return (
        H
        - np.einsum("kij,gk->gij", gm, J)
        + np.einsum("gab,ai,bj->gij", gn, J, J)
    )


def second_fundamental_form_at(F: SmoothMapSpec, X, Y, p) -> np.ndarray:
    B = second_fundamental_tensor_at(F, p)
    return np.einsum("gij,i,j->g", B, value_at(X, p), value_at(Y, p))


def _frame_trace(B: np.ndarray, vectors, signs) -> np.ndarray:
    out = np.zeros(B.shape[0])
    for v, s in zip(vectors, signs):
        out += s * np.einsum("gij,i,j->g", B, v, v)
    return out


@dataclass(frozen=True)
class TensionResult:
    point: np.ndarray
    tension: np.ndarray
    d_tension_plus: np.ndarray | None
    d_tension_minus: np.ndarray | None
    split_mode: str | None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tension))

    @property
    def norm_plus(self) -> float | None:
        return None if self.d_tension_plus is None else float(np.linalg.norm(self.d_tension_plus))

    @property
    def norm_minus(self) -> float | None:
        return None if self.d_tension_minus is None else float(np.linalg.norm(self.d_tension_minus))


def tension_at(F: SmoothMapSpec, p, structure: StructureField | None = None,
               target_structure: StructureField | None = None, frame: FrameAt | None = None,
               lam: int = 1) -> TensionResult:
    """Tension field and, given a source structure, its eigendistribution split.

    The split traces the second fundamental form over orthonormal frames of
    each eigendistribution.  When the metric is null on an eigendistribution
    (hyperbolic case) those frames do not exist; the split is then taken as
    the target-side projections of the tension, plus part onto the lam
    eigendistribution of the target structure.
    """
    p = np.asarray(p, dtype=float)
    B = second_fundamental_tensor_at(F, p)
    if frame is None:
        frame = orthonormal_frame_at(F.source, p)
    tension = _frame_trace(B, frame.vectors, frame.signs)
    if structure is None:
        return TensionResult(p, tension, None, None, None)
    h, _ = metric_at(F.source, p)
    try:
        parts = []
        for pi in eigenprojectors_at(structure, p):
            vectors, signs = orthonormalize(h, pi.T)
            parts.append(_frame_trace(B, vectors, signs))
        return TensionResult(p, tension, parts[0], parts[1], "frame")
    except DegenerateFrameError:
        if target_structure is None:
            return TensionResult(p, tension, None, None, None)
        q = F.jets_at(p)[0]
        pk, pkbar = eigenprojectors_at(target_structure, q)
        if lam < 0:
            pk, pkbar = pkbar, pk
        return TensionResult(p, tension, pk @ tension, pkbar @ tension, "target-projection")


# --------------------------------------------------------------------------
# Second fundamental form under paraholomorphic maps


@dataclass(frozen=True)
class SffIdentityResidual:
    general: float
    diagonal: float
    diagonal_factored: float

    @property
    def max(self) -> float:
        return max(self.general, self.diagonal, self.diagonal_factored)


def paraholomorphic_sff_residual_at(F: SmoothMapSpec, S_M: StructureField, S_N: StructureField,
                                    X, Y, p, lam: int = 1) -> SffIdentityResidual:
    """Residuals of the correction formula relating (nabla F_*)(PX, PY) to
    (nabla F_*)(X, Y) for a map with F_* P = lam Q F_*, plus its diagonal
    specialisations written with the S operators."""
    P, Q = product_twin(S_M), product_twin(S_N)
    p = np.asarray(p, dtype=float)
    q, J, _ = F.jets_at(p)
    A, C = P.matrix_at(p), Q.matrix_at(q)
    Dm, Dn = nabla_endo_at(F.source, P, p), nabla_endo_at(F.target, Q, q)
    B = second_fundamental_tensor_at(F, p)
    x, y = value_at(X, p), value_at(Y, p)
    xp, yp = J @ x, J @ y

    def sff(u, v):
        return np.einsum("gij,i,j->g", B, u, v)

    general = (
        sff(A @ x, A @ y)
        - sff(x, y)
        - nabla_endo_apply(Dn, C @ xp, yp)
        + nabla_endo_apply(Dn, yp, C @ xp)
        + J @ (nabla_endo_apply(Dm, A @ x, y) - nabla_endo_apply(Dm, y, A @ x))
    )
    lhs = sff(A @ x, A @ x) - sff(x, x)
    diag = lhs - s_operator_at(F.target, Q, C @ xp, xp, q) + J @ s_operator_at(F.source, P, A @ x, x, p)
    factored = lhs - C @ (s_operator_at(F.target, Q, xp, xp, q) - lam * J @ s_operator_at(F.source, P, x, x, p))
    return SffIdentityResidual(
        float(np.linalg.norm(general)), float(np.linalg.norm(diag)), float(np.linalg.norm(factored))
    )


# --------------------------------------------------------------------------
# Harmonicity


@dataclass
class TheoremNote:
    name: str
    applicable: bool
    conclusion_holds: bool | None
    detail: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "applicable": self.applicable,
            "conclusion_holds": self.conclusion_holds,
            "detail": self.detail,
        }


@dataclass
class HarmonicityReport:
    max_tension: float
    max_plus: float | None
    max_minus: float | None
    max_split_defect: float | None
    harmonic: bool
    plus_harmonic: bool | None
    minus_harmonic: bool | None
    split_mode: str | None
    tol: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_tension": self.max_tension,
            "max_plus": self.max_plus,
            "max_minus": self.max_minus,
            "max_split_defect": self.max_split_defect,
            "harmonic": self.harmonic,
            "plus_harmonic": self.plus_harmonic,
            "minus_harmonic": self.minus_harmonic,
            "split_mode": self.split_mode,
            "tol": self.tol,
            "notes": [n.to_dict() for n in self.notes],
        }


def _max_over(values):
    values = list(values)
    if any(v is None for v in values):
        return None
    return max(values, default=0.0)


def harmonicity_report(F: SmoothMapSpec, S_M: StructureField | None, S_N: StructureField | None, sample,
                       tol: float = FLAG_TOL, fields: int = 20, seed: int = DEFAULT_SEED,
                       intertwining: IntertwiningClass | None = None) -> HarmonicityReport:
    sample = np.asarray(sample, dtype=float)
    lam = None
    if S_M is not None and S_N is not None:
        if intertwining is None:
            intertwining = intertwining_class(F, S_M, S_N, sample, tol)
        lam = intertwining.lam
    P = product_twin(S_M) if S_M is not None else None
    Q = product_twin(S_N) if S_N is not None else None
    results = [tension_at(F, p, P, Q, lam=lam or 1) for p in sample]
    max_t = max(r.norm for r in results)
    max_plus = _max_over(r.norm_plus for r in results)
    max_minus = _max_over(r.norm_minus for r in results)
    split_defect = None
    if max_plus is not None:
        split_defect = max(
            float(np.linalg.norm(r.tension - r.d_tension_plus - r.d_tension_minus)) for r in results
        )
    modes = {r.split_mode for r in results}
    report = HarmonicityReport(
        max_tension=max_t,
        max_plus=max_plus,
        max_minus=max_minus,
        max_split_defect=split_defect,
        harmonic=max_t < tol,
        plus_harmonic=None if max_plus is None else max_plus < tol,
        minus_harmonic=None if max_minus is None else max_minus < tol,
        split_mode=modes.pop() if len(modes) == 1 else None,
        tol=tol,
    )
    if lam is not None:
        report.notes = _theorem_notes(F, P, Q, sample, report, tol, fields, seed)
    return report


def _div_max(M, S, sample) -> float:
    return max(float(np.linalg.norm(divergence_endo_at(M, S, p))) for p in sample)


def _s_max(M, S, sample, fields, seed) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in sample:
        for _ in range(fields):
            x, y = rng.uniform(-1, 1, (2, M.dim))
            worst = max(worst, float(np.linalg.norm(s_operator_at(M, S, x, y, p))))
    return worst


def _theorem_notes(F, P, Q, sample, report, tol, fields, seed) -> list:
    M, N = F.source, F.target
    target_sample = np.array([F.jets_at(p)[0] for p in sample])
    src = compatibility_over(M, P, sample)
    tgt = compatibility_over(N, Q, target_sample)
    div_ok = _div_max(M, P, sample) < tol
    notes = []

    vidal = max(vidal_check(N, Q, 1, target_sample, fields, seed), vidal_check(N, Q, -1, target_sample, fields, seed))
    applicable = src.pure and div_ok and (tgt.pure or tgt.hyperbolic) and vidal < tol
    holds = None
    if applicable and report.plus_harmonic is not None:
        holds = report.harmonic == (report.plus_harmonic and report.minus_harmonic)
    notes.append(TheoremNote(
        "eigen-split equivalence",
        applicable,
        holds,
        "pure source with div P = 0, target eigendistributions Vidal: harmonic iff plus- and minus-eigen harmonic",
    ))

    parallel_n = max(float(np.max(np.abs(nabla_endo_at(N, Q, q)))) for q in target_sample) < tol
    quasi_n = _s_max(N, Q, target_sample, fields, seed) < tol
    target_ok = (tgt.hyperbolic and quasi_n) or (tgt.pure and parallel_n)
    applicable = src.hyperbolic and div_ok and target_ok
    notes.append(TheoremNote(
        "hyperbolic sufficient condition",
        applicable,
        report.harmonic if applicable else None,
        "hyperbolic source with div P = 0, target with S_Q = 0 or parallel pure Q: harmonic",
    ))
    return notes
