"""Named verification suites over a workspace.

Each suite checks identities that must hold on every valid input at the
sample points and random affine fields of the workspace, and yields one
``Check`` per identity aggregated over the entries it applies to.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .classifier import classify
from .config import CatalogEntry, MapEntry, Workspace
from .geometry import (
    CovariantTwoTensorField,
    as_jet,
    covariant_derivative_vector_at,
    divergence_endo_at,
    inner,
    lie_bracket_at,
    metric_at,
    metric_derivatives_at,
    nabla_endo_apply,
    nabla_endo_at,
    orthonormal_frame_at,
    random_affine_field,
    rotate_frame,
    signature_at,
)
from .maps import (
    constancy_diagnostic,
    harmonicity_report,
    intertwining_class,
    paraholomorphic_sff_residual_at,
    second_fundamental_tensor_at,
    tension_at,
)
from .operators import (
    d_omega_at,
    d_omega_coordinate_at,
    nijenhuis_at,
    nijenhuis_connection_at,
    psi_at,
    s_operator_at,
    tachibana_at,
)
from .structures import (
    SQRT5,
    CompatibilityWarning,
    StructureField,
    compatibility_over,
    conjugate_of,
    eigen_ranks_at,
    eigenprojectors_at,
    polynomial_residual_at,
    product_twin,
    twin_of,
)

EXACT_TOL = 1e-12
ALGEBRAIC_TOL = 1e-9
FORM_IDENTITY_TOL = 1e-7
SFF_SYMMETRY_TOL = 1e-10


@dataclass
class Check:
    suite: str
    label: str
    passed: bool
    residual: float | None = None
    tol: float | None = None
    entries: list = field(default_factory=list)
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if self.residual is not None:
            body = f"max residual {self.residual:.3e} (tol {self.tol:g})"
        else:
            body = self.detail
        where = f" over {len(self.entries)} entries" if self.entries else ""
        return f"{self.suite} {self.label}{where}: {body} {verdict}"

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "label": self.label,
            "passed": self.passed,
            "residual": self.residual,
            "tol": self.tol,
            "entries": list(self.entries),
            "detail": self.detail,
        }


class _Max:
    """Running max of a residual with the entries that contributed."""

    def __init__(self):
        self.value = 0.0
        self.entries: list[str] = []

    def add(self, name: str, value: float) -> None:
        self.value = max(self.value, float(value))
        if name not in self.entries:
            self.entries.append(name)

    def check(self, suite: str, label: str, tol: float) -> Check:
        if not self.entries:
            return Check(suite, label, True, detail="no applicable entries")
        return Check(suite, label, self.value < tol, self.value, tol, list(self.entries))


def _family(S: StructureField) -> dict:
    P = product_twin(S)
    G = twin_of(P)
    return {"P": P, "Phat": conjugate_of(P), "G": G, "Ghat": conjugate_of(G)}


def _rng(ws: Workspace, name: str) -> np.random.Generator:
    # per-entry streams keep results independent of which entries are selected
    return np.random.default_rng([ws.sampling.seed, *name.encode()])


def _field_sets(ws: Workspace, M, name: str, arity: int):
    rng = _rng(ws, name)
    for p in ws.sample(M):
        for _ in range(ws.sampling.fields):
            yield p, [random_affine_field(M.dim, rng) for _ in range(arity)]


def _vector_sets(ws: Workspace, M, name: str, arity: int):
    rng = _rng(ws, name)
    for p in ws.sample(M):
        for _ in range(ws.sampling.fields):
            yield p, rng.uniform(-1.0, 1.0, (arity, M.dim))


def _is_hyperbolic(ws: Workspace, e: CatalogEntry) -> bool:
    return compatibility_over(e.manifold, product_twin(e.structure), ws.sample(e.manifold)).hyperbolic


def _is_pure(ws: Workspace, e: CatalogEntry) -> bool:
    return compatibility_over(e.manifold, product_twin(e.structure), ws.sample(e.manifold)).pure


# --------------------------------------------------------------------------
# Structures


def twin_algebra(ws: Workspace) -> Iterator[Check]:
    trip, comm, poly = _Max(), _Max(), _Max()
    for name, e in ws.entries.items():
        S = e.structure
        back = twin_of(twin_of(S))
        P = product_twin(S)
        for p in ws.sample(e.manifold):
            trip.add(name, np.max(np.abs(back.matrix_at(p) - S.matrix_at(p))))
            comm.add(name, np.max(np.abs(twin_of(conjugate_of(P)).matrix_at(p)
                                         - conjugate_of(twin_of(P)).matrix_at(p))))
            poly.add(name, polynomial_residual_at(twin_of(S), p))
    yield trip.check("twin-algebra", "twin of twin returns the structure", EXACT_TOL)
    yield comm.check("twin-algebra", "twin commutes with conjugation", EXACT_TOL)
    yield poly.check("twin-algebra", "twin satisfies its structure polynomial", EXACT_TOL)


def compatibility_equivalence(ws: Workspace) -> Iterator[Check]:
    bad_pure, bad_hyp, names = [], [], []
    for name, e in ws.entries.items():
        pts = ws.sample(e.manifold)
        verdicts = [compatibility_over(e.manifold, T, pts) for T in _family(e.structure).values()]
        names.append(name)
        if len({v.pure for v in verdicts}) > 1:
            bad_pure.append(name)
        if len({v.hyperbolic for v in verdicts}) > 1:
            bad_hyp.append(name)
    for label, bad in (("pure", bad_pure), ("hyperbolic", bad_hyp)):
        detail = "verdicts agree for P, conj P, G, conj G" if not bad else f"verdicts differ on {', '.join(bad)}"
        yield Check("compatibility-equivalence", f"{label} verdict across the structure family",
                    not bad, entries=names, detail=detail)


def hyperbolic_nullity(ws: Workspace) -> Iterator[Check]:
    omega, golden, null = _Max(), _Max(), _Max()
    for name, e in ws.entries.items():
        if not _is_hyperbolic(ws, e):
            continue
        M = e.manifold
        fam = _family(e.structure)
        for p, (x, y) in _vector_sets(ws, M, name, 2):
            A, Gm = fam["P"].matrix_at(p), fam["G"].matrix_at(p)
            omega.add(name, abs(inner(M, p, A @ x, x)))
            golden.add(name, abs(2 * inner(M, p, Gm @ x, x) - inner(M, p, x, x)))
            for pi in eigenprojectors_at(fam["P"], p):
                null.add(name, abs(inner(M, p, pi @ x, pi @ y)))
    yield omega.check("hyperbolic-nullity", "h(PX, X) = 0", ALGEBRAIC_TOL)
    yield golden.check("hyperbolic-nullity", "2h(GX, X) = h(X, X)", ALGEBRAIC_TOL)
    yield null.check("hyperbolic-nullity", "h vanishes on each eigendistribution", ALGEBRAIC_TOL)


def signature_rank(ws: Workspace) -> Iterator[Check]:
    const_bad, split_bad, names, hyp_names = [], [], [], []
    for name, e in ws.entries.items():
        M = e.manifold
        pts = ws.sample(M)
        sigs = {signature_at(M, p) for p in pts}
        names.append(name)
        if len(sigs) > 1:
            const_bad.append(name)
        if _is_hyperbolic(ws, e):
            hyp_names.append(name)
            m = M.dim // 2
            ranks = {eigen_ranks_at(e.structure, p) for p in pts}
            if M.dim % 2 or sigs != {(m, m)} or ranks != {(m, m)}:
                split_bad.append(f"{name} signature {sorted(sigs)} ranks {sorted(ranks)}")
    yield Check("signature-rank", "signature constant on the sample box", not const_bad, entries=names,
                detail="constant" if not const_bad else f"varies on {', '.join(const_bad)}")
    yield Check("signature-rank", "hyperbolic entries have signature and ranks (m, m)", not split_bad,
                entries=hyp_names, detail="all (m, m)" if not split_bad else "; ".join(split_bad))


# --------------------------------------------------------------------------
# Operators


def twin_nijenhuis(ws: Workspace) -> Iterator[Check]:
    nij, nab = _Max(), _Max()
    tol = ws.tolerances.cross_check
    for name, e in ws.entries.items():
        M = e.manifold
        fam = _family(e.structure)
        P, G = fam["P"], fam["G"]
        for p, (X, Y) in _field_sets(ws, M, name, 2):
            nij.add(name, np.linalg.norm(5 * nijenhuis_at(P, X, Y, p) - 4 * nijenhuis_at(G, X, Y, p)))
            x, y = X.jet(p).value, Y.jet(p).value
            dP, dG = nabla_endo_at(M, P, p), nabla_endo_at(M, G, p)
            nab.add(name, np.linalg.norm(SQRT5 * nabla_endo_apply(dP, x, y) - 2 * nabla_endo_apply(dG, x, y)))
    yield nij.check("twin-nijenhuis", "5 N_P = 4 N_G", tol)
    yield nab.check("twin-nijenhuis", "sqrt5 nabla P = 2 nabla G", tol)


def nijenhuis_cross_check(ws: Workspace) -> Iterator[Check]:
    agree = _Max()
    for name, e in ws.entries.items():
        P = product_twin(e.structure)
        for p, (X, Y) in _field_sets(ws, e.manifold, name, 2):
            agree.add(name, np.linalg.norm(nijenhuis_at(P, X, Y, p) - nijenhuis_connection_at(e.manifold, P, X, Y, p)))
    yield agree.check("nijenhuis-cross-check", "bracket and connection forms agree", ws.tolerances.cross_check)


def kaehler_form_residual_at(M, P: StructureField, X, Y, Z, p) -> float:
    """2h((nabla_X P)Y, Z) - dOmega(X,Y,Z) - dOmega(X,PY,PZ) + h(N(Y,Z), PX)
    with dOmega the cyclic sum of covariant derivatives of Omega."""
    A = P.matrix_at(p)
    x, y, z = (as_jet(V, p) for V in (X, Y, Z))
    E = P.jet(p)
    py, pz = E.apply(y), E.apply(z)
    D = nabla_endo_at(M, P, p)
    return (
        2 * inner(M, p, nabla_endo_apply(D, x.value, y.value), z.value)
        - d_omega_at(M, P, x, y, z, p)
        - d_omega_at(M, P, x, py, pz, p)
        + inner(M, p, nijenhuis_at(P, y, z, p), A @ x.value)
    )


def kaehler_form_identity(ws: Workspace) -> Iterator[Check]:
    ident, oracle, anti = _Max(), _Max(), _Max()
    tol = ws.tolerances.cross_check
    for name, e in ws.entries.items():
        if not _is_hyperbolic(ws, e):
            continue
        M, P = e.manifold, product_twin(e.structure)
        for p, (X, Y, Z) in _field_sets(ws, M, name, 3):
            ident.add(name, abs(kaehler_form_residual_at(M, P, X, Y, Z, p)))
            d = d_omega_at(M, P, X, Y, Z, p)
            oracle.add(name, abs(d - d_omega_coordinate_at(M, P, X, Y, Z, p)))
            anti.add(name, max(abs(d + d_omega_at(M, P, Y, X, Z, p)), abs(d + d_omega_at(M, P, X, Z, Y, p))))
    yield ident.check("kaehler-form-identity", "nabla P recovered from dOmega and N", FORM_IDENTITY_TOL)
    yield oracle.check("kaehler-form-identity", "dOmega matches the coordinate exterior derivative", tol)
    yield anti.check("kaehler-form-identity", "dOmega is antisymmetric", tol)


def psi_identity(ws: Workspace) -> Iterator[Check]:
    psi, tach, par = _Max(), _Max(), _Max()
    tol = ws.tolerances.cross_check
    for name, e in ws.entries.items():
        if not _is_pure(ws, e):
            continue
        M = e.manifold
        h = CovariantTwoTensorField.from_metric(M)
        fam = _family(e.structure)
        for kind in ("P", "G"):
            S = fam[kind]
            parallel = max(np.max(np.abs(nabla_endo_at(M, S, p))) for p in ws.sample(M)) < ws.tolerances.flag
            for p, (X, Y, Z) in _field_sets(ws, M, f"{name}/{kind}", 3):
                D = nabla_endo_at(M, S, p)
                x, y, z = (V.jet(p).value for V in (X, Y, Z))
                value = psi_at(M, S, h, X, Y, Z, p)
                psi.add(name, abs(value - 2 * inner(M, p, nabla_endo_apply(D, y, x), z)))
                form = (-inner(M, p, nabla_endo_apply(D, x, y), z) + inner(M, p, nabla_endo_apply(D, y, x), z)
                        + inner(M, p, nabla_endo_apply(D, z, x), y))
                tach.add(name, abs(tachibana_at(M, S, h, X, Y, Z, p) - form))
                if parallel:
                    par.add(name, abs(value))
    yield psi.check("psi-identity", "Psi h = 2h((nabla_Y phi)X, Z)", tol)
    yield tach.check("psi-identity", "Tachibana operator matches its connection form", tol)
    yield par.check("psi-identity", "parallel structures have Psi h = 0", tol)


def _s(M, S, x, y, p):
    return s_operator_at(M, S, x, y, p)


def s_operator_identities(ws: Workspace) -> Iterator[Check]:
    form_p, form_g, signs, eigen = _Max(), _Max(), _Max(), _Max()
    for name, e in ws.entries.items():
        M = e.manifold
        fam = _family(e.structure)
        P, G = fam["P"], fam["G"]
        for p, (x, y) in _vector_sets(ws, M, name, 2):
            A, Gm = P.matrix_at(p), G.matrix_at(p)
            dP, dG = nabla_endo_at(M, P, p), nabla_endo_at(M, G, p)
            sp = _s(M, P, x, y, p)
            form_p.add(name, np.linalg.norm(sp - (nabla_endo_apply(dP, x, y) - nabla_endo_apply(dP, A @ x, A @ y))))
            sg = _s(M, G, x, y, p)
            alt = nabla_endo_apply(dG, x, y) - nabla_endo_apply(dG, Gm @ x, Gm @ y) + nabla_endo_apply(dG, Gm @ x, y)
            form_g.add(name, np.linalg.norm(sg - alt))
            signs.add(name, max(np.linalg.norm(A @ sp + _s(M, P, x, A @ y, p)),
                                np.linalg.norm(A @ sp - _s(M, P, A @ x, y, p))))
            for S in (P, G):
                for pi in eigenprojectors_at(S, p):
                    eigen.add(name, np.linalg.norm(_s(M, S, pi @ x, pi @ y, p)))
    yield form_p.check("s-operator-identities", "S_P in terms of nabla P", ALGEBRAIC_TOL)
    yield form_g.check("s-operator-identities", "S_G in terms of nabla G", ALGEBRAIC_TOL)
    yield signs.check("s-operator-identities", "P S_P(X,Y) = -S_P(X,PY) = S_P(PX,Y)", ALGEBRAIC_TOL)
    yield eigen.check("s-operator-identities", "S vanishes on pairs from one eigendistribution", ALGEBRAIC_TOL)


def s_operator_diagonal(ws: Workspace) -> Iterator[Check]:
    """Vanishing of S_P(X,X), S_P(X,PX) and S_P(X,Y) must agree as thresholded verdicts."""
    tol = ws.tolerances.flag
    bad, names = [], []
    for name, e in ws.entries.items():
        if not _is_hyperbolic(ws, e) and not _is_pure(ws, e):
            continue
        M, P = e.manifold, product_twin(e.structure)
        diag = mixed = full = 0.0
        for p, (x, y) in _vector_sets(ws, M, name, 2):
            A = P.matrix_at(p)
            diag = max(diag, np.linalg.norm(_s(M, P, x, x, p)))
            mixed = max(mixed, np.linalg.norm(_s(M, P, x, A @ x, p)))
            full = max(full, np.linalg.norm(_s(M, P, x, y, p)))
        names.append(name)
        if len({diag < tol, mixed < tol, full < tol}) > 1:
            bad.append(f"{name} (S(X,X) {diag:.2e}, S(X,PX) {mixed:.2e}, S(X,Y) {full:.2e})")
    yield Check("s-operator-diagonal", "S(X,X) = 0, S(X,PX) = 0 and S = 0 agree", not bad, entries=names,
                detail="verdicts agree" if not bad else "verdicts differ on " + "; ".join(bad))


# --------------------------------------------------------------------------
# Connection and classification


def connection_identities(ws: Workspace) -> Iterator[Check]:
    metric, torsion, div = _Max(), _Max(), _Max()
    tol = ws.tolerances.cross_check
    seen = set()
    for name, e in ws.entries.items():
        M = e.manifold
        if M.name not in seen:
            seen.add(M.name)
            for p, (X, Y, Z) in _field_sets(ws, M, M.name, 3):
                x, y, z = (V.jet(p) for V in (X, Y, Z))
                h, _ = metric_at(M, p)
                dh = metric_derivatives_at(M, p)
                lhs = (np.einsum("abi,a,b,i->", dh, y.value, z.value, x.value)
                       + (y.jac @ x.value) @ h @ z.value + y.value @ h @ (z.jac @ x.value))
                rhs = (inner(M, p, covariant_derivative_vector_at(M, x, y, p), z.value)
                       + inner(M, p, y.value, covariant_derivative_vector_at(M, x, z, p)))
                metric.add(M.name, abs(lhs - rhs))
                torsion.add(M.name, np.linalg.norm(covariant_derivative_vector_at(M, x, y, p)
                                                   - covariant_derivative_vector_at(M, y, x, p)
                                                   - lie_bracket_at(x, y, p)))
        rng = _rng(ws, name + "/frames")
        for p in ws.sample(M):
            frame = orthonormal_frame_at(M, p)
            base = divergence_endo_at(M, e.structure, p, frame)
            div.add(name, np.linalg.norm(base - divergence_endo_at(M, e.structure, p, rotate_frame(frame, rng))))
    yield metric.check("connection-identities", "connection preserves the metric", tol)
    yield torsion.check("connection-identities", "connection is torsion free", tol)
    yield div.check("connection-identities", "divergence does not depend on the frame", tol)


def flag_coherence(ws: Workspace) -> Iterator[Check]:
    tol = ws.tolerances.flag
    s = ws.sampling
    violations, family_bad, div_bad, vidal_bad, names = [], [], [], [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompatibilityWarning)
        for name, e in ws.entries.items():
            pts = ws.sample(e.manifold)
            reports = {k: classify(e.manifold, T, pts, s.fields, tol, s.seed) for k, T in _family(e.structure).items()}
            names.append(name)
            for k, r in reports.items():
                violations.extend(f"{name}/{k}: {v}" for v in r.coherence_violations)
                if r.verdict("parallel") and not (r.verdict("vidal_plus") and r.verdict("vidal_minus")):
                    vidal_bad.append(f"{name}/{k}")
            for flag in ("integrable", "parallel"):
                if len({r.verdict(flag) for r in reports.values()}) > 1:
                    family_bad.append(f"{name} {flag}")
            if reports["P"].verdict("semi") != reports["G"].verdict("semi"):
                div_bad.append(name)
    yield Check("flag-coherence", "implications between classification flags", not violations, entries=names,
                detail="no violations" if not violations else "; ".join(violations))
    yield Check("flag-coherence", "integrable and parallel agree across P, conj P, G, conj G", not family_bad,
                entries=names, detail="agree" if not family_bad else "differ: " + "; ".join(family_bad))
    yield Check("flag-coherence", "div P = 0 exactly when div G = 0", not div_bad, entries=names,
                detail="agree" if not div_bad else "differ on " + ", ".join(div_bad))
    yield Check("flag-coherence", "parallel structures have Vidal eigendistributions", not vidal_bad,
                entries=names, detail="holds" if not vidal_bad else "fails on " + ", ".join(vidal_bad))


# --------------------------------------------------------------------------
# Maps


def _structured_maps(ws: Workspace) -> Iterator[tuple[str, MapEntry]]:
    for name, m in ws.maps.items():
        if m.source_structure is not None:
            yield name, m


def map_intertwining(ws: Workspace) -> Iterator[Check]:
    tol = ws.tolerances.flag
    ratio = _Max()
    twin_bad, diag_bad, names = [], [], []
    for name, m in _structured_maps(ws):
        F = m.map
        pts = ws.sample(F.source)
        cls = intertwining_class(F, m.source_structure, m.target_structure, pts, tol)
        names.append(name)
        if cls.paraholomorphic != cls.golden or cls.anti_paraholomorphic != cls.antigolden:
            twin_bad.append(name)
        scale = SQRT5 / 2
        ratio.add(name, max(abs(scale * cls.residuals["paraholomorphic"] - cls.residuals["golden"]),
                            abs(scale * cls.residuals["anti_paraholomorphic"] - cls.residuals["antigolden"])))
        diag = constancy_diagnostic(F, m.source_structure, m.target_structure, pts, tol) + cls.diagnostics
        if diag:
            diag_bad.append(f"{name}: {diag[0]}")
    yield Check("map-intertwining", "paraholomorphic exactly when golden", not twin_bad, entries=names,
                detail="agree" if not twin_bad else "differ on " + ", ".join(twin_bad))
    yield ratio.check("map-intertwining", "golden defect is sqrt5/2 times the product defect", SFF_SYMMETRY_TOL)
    yield Check("map-intertwining", "cross relations only hold for constant maps", not diag_bad, entries=names,
                detail="no diagnostics" if not diag_bad else "; ".join(diag_bad))


def sff_correction(ws: Workspace) -> Iterator[Check]:
    tol = ws.tolerances.cross_check
    ident, sym, flat = _Max(), _Max(), _Max()
    for name, m in ws.maps.items():
        F = m.map
        pts = ws.sample(F.source)
        for p in pts:
            B = second_fundamental_tensor_at(F, p)
            sym.add(name, np.max(np.abs(B - np.swapaxes(B, 1, 2))) if B.size else 0.0)
        if m.source_structure is None:
            continue
        cls = intertwining_class(F, m.source_structure, m.target_structure, pts, ws.tolerances.flag)
        if cls.lam is None:
            continue
        P, Q = product_twin(m.source_structure), product_twin(m.target_structure)
        parallel = (max(np.max(np.abs(nabla_endo_at(F.source, P, p))) for p in pts) < ws.tolerances.flag
                    and max(np.max(np.abs(nabla_endo_at(F.target, Q, F.jets_at(p)[0]))) for p in pts)
                    < ws.tolerances.flag)
        for p, (x, y) in _vector_sets(ws, F.source, name, 2):
            ident.add(name, paraholomorphic_sff_residual_at(F, P, Q, x, y, p, cls.lam).max)
            if parallel and cls.lam == 1:
                B = second_fundamental_tensor_at(F, p)
                A = P.matrix_at(p)
                flat.add(name, np.linalg.norm(np.einsum("gij,i,j->g", B, A @ x, A @ y)
                                              - np.einsum("gij,i,j->g", B, x, y)))
    yield sym.check("sff-correction", "second fundamental form is symmetric", SFF_SYMMETRY_TOL)
    yield ident.check("sff-correction", "structure correction terms close the identity", tol)
    yield flat.check("sff-correction", "parallel structures give B(PX,PY) = B(X,Y)", tol)


def tension_split(ws: Workspace) -> Iterator[Check]:
    tol = ws.tolerances.flag
    split, frames = _Max(), _Max()
    bad, names = [], []
    for name, m in _structured_maps(ws):
        F = m.map
        pts = ws.sample(F.source)
        rep = harmonicity_report(F, m.source_structure, m.target_structure, pts, tol,
                                 ws.sampling.fields, ws.sampling.seed)
        if rep.max_split_defect is not None:
            split.add(name, rep.max_split_defect)
        note = next(n for n in rep.notes if n.name == "eigen-split equivalence") if rep.notes else None
        if note is not None and note.applicable:
            names.append(name)
            if not note.conclusion_holds:
                bad.append(name)
        rng = _rng(ws, name + "/frames")
        for p in pts:
            frame = orthonormal_frame_at(F.source, p)
            a = tension_at(F, p, frame=frame).tension
            b = tension_at(F, p, frame=rotate_frame(frame, rng)).tension
            frames.add(name, np.linalg.norm(a - b))
    yield split.check("tension-split", "tension is the sum of its eigendistribution parts", ws.tolerances.cross_check)
    yield Check("tension-split", "harmonic exactly when plus- and minus-eigen harmonic", not bad, entries=names,
                detail="holds where applicable" if names and not bad else
                ("no applicable entries" if not names else "fails on " + ", ".join(bad)))
    yield frames.check("tension-split", "tension does not depend on the frame", ws.tolerances.cross_check)


def harmonic_sufficient(ws: Workspace) -> Iterator[Check]:
    tol = ws.tolerances.flag
    bad, names = [], []
    for name, m in _structured_maps(ws):
        F = m.map
        rep = harmonicity_report(F, m.source_structure, m.target_structure, ws.sample(F.source), tol,
                                 ws.sampling.fields, ws.sampling.seed)
        for note in rep.notes:
            if note.name == "hyperbolic sufficient condition" and note.applicable:
                names.append(name)
                if not note.conclusion_holds:
                    bad.append(f"{name} (max tension {rep.max_tension:.3e})")
    yield Check("harmonic-sufficient", "hyperbolic source with div P = 0 and quasi or parallel target is harmonic",
                not bad, entries=names,
                detail="no applicable entries" if not names else ("holds" if not bad else "fails on " + ", ".join(bad)))


SUITES: dict[str, Callable[[Workspace], Iterator[Check]]] = {
    "compatibility-equivalence": compatibility_equivalence,
    "connection-identities": connection_identities,
    "flag-coherence": flag_coherence,
    "harmonic-sufficient": harmonic_sufficient,
    "hyperbolic-nullity": hyperbolic_nullity,
    "kaehler-form-identity": kaehler_form_identity,
    "map-intertwining": map_intertwining,
    "nijenhuis-cross-check": nijenhuis_cross_check,
    "psi-identity": psi_identity,
    "s-operator-diagonal": s_operator_diagonal,
    "s-operator-identities": s_operator_identities,
    "sff-correction": sff_correction,
    "signature-rank": signature_rank,
    "tension-split": tension_split,
    "twin-algebra": twin_algebra,
    "twin-nijenhuis": twin_nijenhuis,
}


def run_suites(ws: Workspace, names=None) -> list[Check]:
    """Run the named suites (all by default) in name order."""
    selected = sorted(SUITES) if not names else sorted(set(names))
    unknown = [n for n in selected if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite {', '.join(unknown)} (known: {', '.join(sorted(SUITES))})")
    checks: list[Check] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompatibilityWarning)
        for name in selected:
            checks.extend(SUITES[name](ws))
    return checks
