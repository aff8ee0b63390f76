"""Sampled classification of (M, h, phi) into named structure classes.

Every flag is a claim about residuals at sample points and random affine
test fields only.  A flag's verdict is ``residual < tol``; when a residual
cannot be computed (degenerate frames and the like) the entry is marked
``not_evaluable`` and the verdict is false.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import ExpressionError
from .geometry import (
    DEFAULT_SEED,
    CovariantTwoTensorField,
    DegenerateFrameError,
    DegenerateMetricError,
    EndoJet,
    ManifoldSpec,
    VecJet,
    covariant_derivative_vector_at,
    divergence_endo_at,
    metric_at,
    nabla_endo_at,
    orthonormalize,
    random_affine_field,
)
from .operators import (
    d_omega_tensor_at,
    nijenhuis_tensor_at,
    star_tensor_at,
    tachibana_on_fields_at,
)
from .structures import (
    COMPAT_TOL,
    CompatibilityWarning,
    Kind,
    StructureField,
    compatibility_residuals_at,
    eigenprojectors_at,
    product_twin,
)

FLAG_TOL = 1e-8
REPORT_HEADER = "sampled verification, not proof"

OK = "ok"
NOT_APPLICABLE = "not_applicable"
NOT_EVALUABLE = "not_evaluable"

DESCRIPTIONS = {
    "pure": "h(phi X, Y) = h(X, phi Y)",
    "hyperbolic": "h(phi X, Y) = h(X, conj(phi) Y)",
    "integrable": "Nijenhuis tensor N_phi = 0",
    "parallel": "nabla phi = 0",
    "star_condition": "Psi(X,Y,Z) = Psi(Y,X,Z) + Psi(RY,RX,Z), R the product twin",
    "almost_para_kaehler": "hyperbolic and dOmega = 0, Omega(X,Y) = h(RX,Y)",
    "para_kaehler": "almost para-Kaehler and integrable",
    "nearly": "(nabla_X phi) X = 0",
    "quasi": "S = 0 (S of the product twin for hyperbolic golden structures)",
    "semi": "div phi = 0",
    "psi_vanishes": "Psi_phi h = 0",
    "tachibana_vanishes": "Tachibana operator of h vanishes",
    "locally_product": "pure and integrable",
    "almost_decomposable": "pure and star condition",
    "locally_decomposable": "pure, integrable and star condition",
    "semi_decomposable": "pure and div phi = 0",
    "vidal_plus": "nabla_X X stays in the k-eigendistribution",
    "vidal_minus": "nabla_X X stays in the kbar-eigendistribution",
    "minimal_plus": "frame trace of nabla on the k-eigendistribution stays in it (definite restriction)",
    "minimal_minus": "frame trace of nabla on the kbar-eigendistribution stays in it (definite restriction)",
}

FLAG_ORDER = tuple(DESCRIPTIONS)


@dataclass(frozen=True)
class FlagEntry:
    name: str
    residual: float | None
    verdict: bool
    description: str
    status: str = OK

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "verdict": self.verdict,
            "description": self.description,
            "status": self.status,
        }


@dataclass
class ClassificationReport:
    manifold: str
    structure: str
    kind: str
    tol: float
    points: int
    fields: int
    seed: int
    flags: list = field(default_factory=list)
    coherence_violations: list = field(default_factory=list)

    header = REPORT_HEADER

    def flag(self, name: str) -> FlagEntry:
        for f in self.flags:
            if f.name == name:
                return f
        raise KeyError(name)

    def verdict(self, name: str) -> bool:
        return self.flag(name).verdict

    @property
    def evaluable(self) -> bool:
        return all(f.status != NOT_EVALUABLE for f in self.flags)

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "manifold": self.manifold,
            "structure": self.structure,
            "kind": self.kind,
            "tol": self.tol,
            "points": self.points,
            "fields": self.fields,
            "seed": self.seed,
            "flags": [f.to_dict() for f in self.flags],
            "coherence_violations": list(self.coherence_violations),
        }

    def to_text(self) -> str:
        lines = [
            f"classification of {self.structure} ({self.kind}) on {self.manifold}: {self.header}",
            f"  {self.points} points, {self.fields} fields per point, seed {self.seed}, tol {self.tol:g}",
        ]
        for f in self.flags:
            res = "n/a" if f.residual is None else f"{f.residual:.3e}"
            mark = "yes" if f.verdict else "no"
            extra = "" if f.status == OK else f" [{f.status}]"
            lines.append(f"  {f.name:<22} {mark:<4} residual {res}{extra}  ({f.description})")
        for v in self.coherence_violations:
            lines.append(f"  coherence violation: {v}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Distribution checks


def _projector_jet(S: StructureField, p, eigen_sign: int) -> tuple[EndoJet, np.ndarray]:
    """Jet of the projector onto the chosen eigendistribution, plus the
    complementary projector value."""
    pk, pkbar = eigenprojectors_at(S, p)
    k, kbar = S.eigenvalues
    dA = S.jet(p).deriv / (k - kbar)
    if eigen_sign > 0:
        return EndoJet(pk, dA), pkbar
    return EndoJet(pkbar, -dA), pk


def vidal_residual_at(M: ManifoldSpec, S: StructureField, eigen_sign: int, X, p) -> float:
    """|pi_perp(nabla_X X)| with X = pi_D(Y) for the given field Y."""
    Pi, perp = _projector_jet(S, p, eigen_sign)
    x = Pi.apply(X.jet(p) if hasattr(X, "jet") else VecJet(np.asarray(X, float), np.zeros((M.dim, M.dim))))
    return float(np.linalg.norm(perp @ covariant_derivative_vector_at(M, x, x, p)))


def vidal_check(M: ManifoldSpec, S: StructureField, eigen_sign: int, samples, fields: int = 20,
                seed: int = DEFAULT_SEED) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in samples:
        for _ in range(fields):
            worst = max(worst, vidal_residual_at(M, S, eigen_sign, random_affine_field(M.dim, rng), p))
    return worst


@dataclass(frozen=True)
class CriticalResult:
    residual: float
    definite: bool


def critical_residual_at(M: ManifoldSpec, S: StructureField, eigen_sign: int, p) -> tuple[float, bool]:
    """|pi_perp(sum_i s_i nabla_{v_i} v_i)| over an orthonormal frame of D.

    Frame vectors are extended as pi_D applied to constant fields; the
    normal component does not depend on the extension.
    """
    Pi, perp = _projector_jet(S, p, eigen_sign)
    h, _ = metric_at(M, p)
    vectors, signs = orthonormalize(h, Pi.value.T)
    total = np.zeros(M.dim)
    zero = np.zeros((M.dim, M.dim))
    for v, s in zip(vectors, signs):
        # v is already in D; its projector extension has value v
        ext = Pi.apply(VecJet(v, zero))
        total += s * covariant_derivative_vector_at(M, ext, ext, p)
    definite = len(set(signs)) <= 1
    return float(np.linalg.norm(perp @ total)), definite


def critical_check(M: ManifoldSpec, S: StructureField, eigen_sign: int, samples) -> CriticalResult:
    worst, definite = 0.0, True
    for p in samples:
        r, d = critical_residual_at(M, S, eigen_sign, p)
        worst, definite = max(worst, r), definite and d
    return CriticalResult(worst, definite)


# --------------------------------------------------------------------------
# Classification


def _fields(M, fields, rng, arity):
    return [[random_affine_field(M.dim, rng) for _ in range(arity)] for _ in range(fields)]


def classify(M: ManifoldSpec, S: StructureField, samples, fields: int = 20, tol: float = FLAG_TOL,
             seed: int = DEFAULT_SEED) -> ClassificationReport:
    """Evaluate every flag on the sample points.

    Tensorial operators are evaluated as component tensors contracted with
    the values of the random fields.  The Tachibana family is tensorial only
    for pure metrics; its extra Z-derivative term is added from the field
    Jacobians.
    """
    samples = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    field_sets = [_fields(M, fields, rng, 3) for _ in samples]
    value_sets, jac_sets = [], []
    for p, triples in zip(samples, field_sets):
        jets = [[F.jet(p) for F in triple] for triple in triples]
        value_sets.append(np.array([[j.value for j in t] for t in jets]).reshape(fields, 3, M.dim))
        jac_sets.append(np.array([[j.jac for j in t] for t in jets]).reshape(fields, 3, M.dim, M.dim))
    R = product_twin(S)
    h_tensor = CovariantTwoTensorField.from_metric(M)

    def contracted(tensor_at: Callable, subscripts: str) -> float:
        # subscripts contract the tensor with (x, y, z) stacked over the fields
        worst = 0.0
        for p, vals in zip(samples, value_sets):
            out = np.einsum(subscripts, tensor_at(p), vals[:, 0], vals[:, 1], vals[:, 2])
            worst = max(worst, float(np.max(np.abs(out))))
        return worst

    def pointwise(fn: Callable) -> float:
        return max(float(np.max(np.abs(fn(p)))) for p in samples)

    def pure_everywhere() -> bool:
        try:
            return max(compatibility_residuals_at(M, S, p)[0] for p in samples) < COMPAT_TOL
        except DegenerateMetricError:
            return False

    def nabla_s(p):
        return nabla_endo_at(M, S, p)

    def s_tensor(T):
        def at(p):
            D = nabla_endo_at(M, T, p)
            A = T.matrix_at(p)
            # (nabla_X phi)Y + phi (nabla_{phi X} phi)Y as [k, y, x]
            return D + np.einsum("kl,lji,im->kjm", A, D, A)
        return at

    def tachibana_family(symmetrize: bool) -> float:
        worst = 0.0
        for p, vals, jacs in zip(samples, value_sets, jac_sets):
            x, y, z = vals[:, 0], vals[:, 1], vals[:, 2]
            out = tachibana_on_fields_at(M, S, h_tensor, p, x, y, z, jacs[:, 2])
            if symmetrize:
                out = out + tachibana_on_fields_at(M, S, h_tensor, p, z, y, x, jacs[:, 0])
            worst = max(worst, float(np.max(np.abs(out))))
        return worst

    tensor_form = pure_everywhere()
    if tensor_form:
        star = lambda: contracted(lambda p: star_tensor_at(M, R, p), "abc,fa,fb,fc->f")
    else:
        # the star condition is only defined for pure metrics
        star = lambda: None

    raw: dict[str, Callable[[], float]] = {
        "pure": lambda: pointwise(lambda p: compatibility_residuals_at(M, S, p)[0]),
        "hyperbolic": lambda: pointwise(lambda p: compatibility_residuals_at(M, S, p)[1]),
        "integrable": lambda: contracted(lambda p: nijenhuis_tensor_at(S, p), "kab,fa,fb,fc->fk"),
        "parallel": lambda: pointwise(nabla_s),
        "star": star,
        "domega": lambda: contracted(lambda p: d_omega_tensor_at(M, R, p), "abc,fa,fb,fc->f"),
        "nearly": lambda: contracted(nabla_s, "kji,fi,fj,fc->fk"),
        "quasi_self": lambda: contracted(s_tensor(S), "kji,fi,fj,fc->fk"),
        "quasi_twin": lambda: contracted(s_tensor(R), "kji,fi,fj,fc->fk"),
        "semi": lambda: pointwise(lambda p: divergence_endo_at(M, S, p)),
        "psi": lambda: tachibana_family(True),
        "tachibana": lambda: tachibana_family(False),
    }
    values: dict[str, float | None] = {}
    failed: set = set()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompatibilityWarning)
        for key, fn in raw.items():
            try:
                values[key] = fn()
            except (DegenerateMetricError, DegenerateFrameError, ExpressionError, ValueError):
                values[key] = None
                failed.add(key)

    def combine(*keys):
        if not tensor_form:
            # without purity the star condition drops out and the class fails on purity
            keys = tuple(k for k in keys if k != "star")
        if any(values[k] is None for k in keys):
            return None
        return max(values[k] for k in keys)

    is_pure = values["pure"] is not None and values["pure"] < tol
    is_hyp = values["hyperbolic"] is not None and values["hyperbolic"] < tol
    quasi_key = "quasi_twin" if (S.kind is Kind.GOLDEN and is_hyp) else "quasi_self"

    entries: list[tuple[str, float | None, str]] = [
        ("pure", values["pure"], OK),
        ("hyperbolic", values["hyperbolic"], OK),
        ("integrable", values["integrable"], OK),
        ("parallel", values["parallel"], OK),
        ("star_condition", values["star"], OK if tensor_form else NOT_APPLICABLE),
        ("almost_para_kaehler", combine("hyperbolic", "domega"), OK),
        ("para_kaehler", combine("hyperbolic", "domega", "integrable"), OK),
        ("nearly", values["nearly"], OK),
        ("quasi", values[quasi_key], OK),
        ("semi", values["semi"], OK),
        ("psi_vanishes", values["psi"], OK),
        ("tachibana_vanishes", values["tachibana"], OK),
        ("locally_product", combine("pure", "integrable"), OK),
        ("almost_decomposable", combine("pure", "star"), OK),
        ("locally_decomposable", combine("pure", "integrable", "star"), OK),
        ("semi_decomposable", combine("pure", "semi"), OK),
    ]

    for sign, suffix in ((1, "plus"), (-1, "minus")):
        try:
            entries.append((f"vidal_{suffix}", vidal_check(M, S, sign, samples, fields, seed), OK))
        except (DegenerateMetricError, ValueError):
            entries.append((f"vidal_{suffix}", None, OK))
        try:
            crit = critical_check(M, S, sign, samples)
            entries.append((f"minimal_{suffix}", crit.residual, OK if crit.definite else NOT_APPLICABLE))
        except DegenerateFrameError:
            # the metric is null on this eigendistribution (hyperbolic case)
            entries.append((f"minimal_{suffix}", None, NOT_APPLICABLE))
        except (DegenerateMetricError, ValueError):
            entries.append((f"minimal_{suffix}", None, OK))

    flags = []
    for name, residual, status in entries:
        if residual is None and status == OK:
            status = NOT_EVALUABLE
        verdict = residual is not None and residual < tol
        flags.append(FlagEntry(name, residual, bool(verdict), DESCRIPTIONS[name], status))

    report = ClassificationReport(
        manifold=M.name,
        structure=S.name or "structure",
        kind=S.kind.value,
        tol=tol,
        points=len(samples),
        fields=fields,
        seed=seed,
        flags=flags,
    )
    report.coherence_violations = coherence_violations(report)
    return report


def coherence_violations(report: ClassificationReport) -> list[str]:
    """Implications between flags that must hold on any correct input."""
    v = report.verdict
    out = []

    def need(cond: bool, text: str):
        if not cond:
            out.append(text)

    need(not v("parallel") or v("integrable"), "parallel but not integrable")
    if v("pure"):
        need(v("parallel") == (v("integrable") and v("star_condition")),
             "parallel differs from (integrable and star condition)")
        need(v("parallel") == v("quasi") == v("psi_vanishes") == v("tachibana_vanishes"),
             "parallel, quasi, psi and tachibana flags disagree")
    if v("hyperbolic"):
        need(v("parallel") == (v("integrable") and v("para_kaehler")),
             "parallel differs from (integrable and para-Kaehler)")
        need(not v("parallel") or v("quasi"), "parallel but not quasi")
        need(not v("quasi") or v("semi"), "quasi but not semi")
    need(not v("locally_decomposable") or v("semi_decomposable"),
         "locally decomposable but not semi decomposable")
    return out
