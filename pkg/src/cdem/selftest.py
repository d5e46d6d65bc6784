"""Independent numerical oracles and the randomized self-check suite.

Every objective matrix in this package is supposed to satisfy a trace
identity of the form tr(P' X Q X' P) = (some explicit sum of squared
distances).  The oracles below evaluate those sums directly with per-sample
Python loops, sharing no code with the matrix builders, so agreement between
the two is meaningful evidence and not a tautology.  The eigensolver is
checked against an independent dense reference from scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import objectives
from .eigsolve import solve_generalized
from .objectives import Hyperparams, JointLabeling


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: worst deviation {self.worst:.3e}{extra}"


# ---------------------------------------------------------------------------
# distance-sum oracles (explicit loops, no shared code with the builders)


def trace_form(matrix: np.ndarray, features: np.ndarray, projection: np.ndarray) -> float:
    z = features @ projection
    return float(np.trace(z.T @ matrix @ z))


def _mean_of(rows: list[np.ndarray]) -> np.ndarray:
    total = rows[0] * 0.0
    for row in rows:
        total = total + row
    return total / len(rows)


def oracle_within_scatter(projection, x, labels) -> float:
    """Sum over classes of squared distances to the projected class mean."""
    total = 0.0
    for cls in sorted(set(int(v) for v in labels)):
        members = [x[i] @ projection for i in range(len(labels)) if labels[i] == cls]
        center = _mean_of(members)
        for row in members:
            diff = row - center
            total += float(diff @ diff)
    return total


def oracle_center_push(projection, x, labels, cls) -> float:
    """count * squared distance between a class mean and the rest's mean."""
    members = [x[i] @ projection for i in range(len(labels)) if labels[i] == cls]
    rest = [x[i] @ projection for i in range(len(labels)) if labels[i] != cls]
    if not members or not rest:
        return 0.0
    diff = _mean_of(members) - _mean_of(rest)
    return len(members) * float(diff @ diff)


def oracle_marginal_mmd(projection, xs, xt) -> float:
    diff = _mean_of([row @ projection for row in xs]) - _mean_of(
        [row @ projection for row in xt]
    )
    return float(diff @ diff)


def oracle_conditional_mmd(projection, xs, ys, xt, yt, cls) -> float:
    src = [xs[i] @ projection for i in range(len(ys)) if ys[i] == cls]
    tgt = [xt[i] @ projection for i in range(len(yt)) if yt[i] == cls]
    if not src or not tgt:
        return 0.0
    diff = _mean_of(src) - _mean_of(tgt)
    return float(diff @ diff)


def oracle_cross_push_st(projection, xs, ys, xt, yt, cls) -> float:
    """Squared distance from the source class mean to the mean of the other
    classes' target samples (the target complement)."""
    src = [xs[i] @ projection for i in range(len(ys)) if ys[i] == cls]
    tgt_rest = [xt[i] @ projection for i in range(len(yt)) if yt[i] != cls]
    if not src or not tgt_rest:
        return 0.0
    diff = _mean_of(src) - _mean_of(tgt_rest)
    return float(diff @ diff)


def oracle_cross_push_ts(projection, xs, ys, xt, yt, cls) -> float:
    tgt = [xt[i] @ projection for i in range(len(yt)) if yt[i] == cls]
    src_rest = [xs[i] @ projection for i in range(len(ys)) if ys[i] != cls]
    if not tgt or not src_rest:
        return 0.0
    diff = _mean_of(tgt) - _mean_of(src_rest)
    return float(diff @ diff)


def oracle_pairwise_same_label(projection, x, labels) -> float:
    """Half the sum of squared projected distances over same-label pairs."""
    total = 0.0
    z = [x[i] @ projection for i in range(len(labels))]
    for i in range(len(labels)):
        for j in range(len(labels)):
            if labels[i] == labels[j]:
                diff = z[i] - z[j]
                total += float(diff @ diff)
    return 0.5 * total


def oracle_empirical_errors(projection, xs, ys, xt, yt, beta) -> float:
    """Within-class scatter in both domains minus beta times the per-domain
    center separations, every class present with a complement."""
    classes = sorted(set(int(v) for v in ys) | set(int(v) for v in yt))
    total = oracle_within_scatter(projection, xs, ys)
    total += oracle_within_scatter(projection, xt, yt)
    for cls in classes:
        total -= beta * oracle_center_push(projection, xs, ys, cls)
        total -= beta * oracle_center_push(projection, xt, yt, cls)
    return total


def oracle_cross_domain_errors(projection, xs, ys, xt, yt, beta) -> float:
    """Definitional cross-domain score, summed sample by sample: each source
    sample of class c is pulled toward the target class center and pushed
    (weight beta) away from the target complement center, and symmetrically
    for target samples.  Classes missing on either side contribute nothing."""
    total = 0.0
    classes = sorted(set(int(v) for v in ys) | set(int(v) for v in yt))
    for cls in classes:
        src = [xs[i] for i in range(len(ys)) if ys[i] == cls]
        tgt = [xt[i] for i in range(len(yt)) if yt[i] == cls]
        src_rest = [xs[i] for i in range(len(ys)) if ys[i] != cls]
        tgt_rest = [xt[i] for i in range(len(yt)) if yt[i] != cls]
        if not src or not tgt or not src_rest or not tgt_rest:
            continue
        mu_s = _mean_of([v @ projection for v in src])
        mu_t = _mean_of([v @ projection for v in tgt])
        comp_s = _mean_of([v @ projection for v in src_rest])
        comp_t = _mean_of([v @ projection for v in tgt_rest])
        for x in src:
            z = x @ projection
            total += float((z - mu_t) @ (z - mu_t))
            total -= beta * float((z - comp_t) @ (z - comp_t))
        for x in tgt:
            z = x @ projection
            total += float((z - mu_s) @ (z - mu_s))
            total -= beta * float((z - comp_s) @ (z - comp_s))
    return total


# ---------------------------------------------------------------------------
# randomized instances


@dataclass
class Instance:
    xs: np.ndarray
    ys: np.ndarray
    xt: np.ndarray
    yt: np.ndarray
    selected: np.ndarray
    projection: np.ndarray

    @property
    def labeling(self) -> JointLabeling:
        return JointLabeling(
            source=self.ys,
            target=self.yt,
            selected=self.selected,
            n_classes=int(max(self.ys.max(), self.yt.max())) + 1,
        )

    @property
    def features(self) -> np.ndarray:
        return np.vstack([self.xs, self.xt])


def random_instance(
    rng: np.random.Generator,
    full_selection: bool = False,
    max_samples: int = 30,
    max_dim: int = 16,
    max_classes: int = 4,
) -> Instance:
    n_classes = int(rng.integers(2, max_classes + 1))
    d = int(rng.integers(2, max_dim + 1))
    k = int(rng.integers(1, d + 1))
    n_s = int(rng.integers(n_classes, max_samples + 1))
    n_t = int(rng.integers(n_classes, max_samples + 1))
    # every class present on both sides, remaining labels uniform
    ys = np.concatenate(
        [np.arange(n_classes), rng.integers(0, n_classes, n_s - n_classes)]
    )
    yt = np.concatenate(
        [np.arange(n_classes), rng.integers(0, n_classes, n_t - n_classes)]
    )
    rng.shuffle(ys)
    rng.shuffle(yt)
    if full_selection:
        selected = np.ones(n_t, dtype=bool)
    else:
        selected = rng.random(n_t) < 0.7
        if not selected.any():
            selected[int(rng.integers(0, n_t))] = True
    return Instance(
        xs=rng.standard_normal((n_s, d)),
        ys=ys.astype(np.int64),
        xt=rng.standard_normal((n_t, d)),
        yt=yt.astype(np.int64),
        selected=selected,
        projection=rng.standard_normal((d, k)),
    )


def _rel_err(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)


def check_objective_terms(seed: int = 0, cases: int = 20, tol: float = 1e-8) -> list[CheckResult]:
    """Compare every term matrix against its distance-sum oracle on random
    instances, including partially selected ones."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name: str, err: float) -> None:
        worst[name] = max(worst.get(name, 0.0), err)

    for case in range(cases):
        inst = random_instance(rng, full_selection=(case % 2 == 0))
        labeling = inst.labeling
        f = inst.features
        p = inst.projection
        n_classes = labeling.n_classes
        sel = inst.selected
        xt_sel = inst.xt[sel]
        yt_sel = inst.yt[sel]

        within = objectives.within_class_projection(labeling)
        expected = oracle_within_scatter(p, inst.xs, inst.ys)
        if sel.any():
            expected += oracle_within_scatter(p, xt_sel, yt_sel)
        record("within_class", _rel_err(trace_form(within, f, p), expected))

        for cls in range(n_classes):
            mat, _ = objectives.center_push_matrix(labeling, cls)
            expected = oracle_center_push(p, inst.xs, inst.ys, cls)
            expected += oracle_center_push(p, xt_sel, yt_sel, cls)
            record("center_push", _rel_err(trace_form(mat, f, p), expected))

        marginal = objectives.marginal_mmd_matrix(labeling, include_unselected=True)
        expected = oracle_marginal_mmd(p, inst.xs, inst.xt)
        record("marginal_mmd_all", _rel_err(trace_form(marginal, f, p), expected))
        marginal_sel = objectives.marginal_mmd_matrix(labeling, include_unselected=False)
        expected = oracle_marginal_mmd(p, inst.xs, xt_sel)
        record("marginal_mmd_selected", _rel_err(trace_form(marginal_sel, f, p), expected))

        for cls in range(n_classes):
            mat = objectives.conditional_mmd_matrix(labeling, cls)
            value = 0.0 if mat is None else trace_form(mat, f, p)
            expected = oracle_conditional_mmd(p, inst.xs, inst.ys, xt_sel, yt_sel, cls)
            record("conditional_mmd", _rel_err(value, expected))

        for cls in range(n_classes):
            st, ts, _ = objectives.cross_push_matrices(labeling, cls)
            # the pull/push pair only exists for classes present on both
            # sides, so the term oracles are gated the same way
            present = bool((yt_sel == cls).any())
            value = 0.0 if st is None else trace_form(st, f, p)
            expected = (
                oracle_cross_push_st(p, inst.xs, inst.ys, xt_sel, yt_sel, cls)
                if present
                else 0.0
            )
            record("cross_push_st", _rel_err(value, expected))
            value = 0.0 if ts is None else trace_form(ts, f, p)
            expected = (
                oracle_cross_push_ts(p, inst.xs, inst.ys, xt_sel, yt_sel, cls)
                if present
                else 0.0
            )
            record("cross_push_ts", _rel_err(value, expected))

        _, lap = objectives.similarity_laplacian(labeling)
        x_labeled = np.vstack([inst.xs, xt_sel]) if sel.any() else inst.xs
        y_labeled = np.concatenate([inst.ys, yt_sel])
        expected = oracle_pairwise_same_label(p, x_labeled, y_labeled)
        record("laplacian", _rel_err(trace_form(lap, f, p), expected))

        h = objectives.centering_matrix(labeling.n_total)
        record("centering_idempotent", float(np.abs(h @ h - h).max()))
        record("centering_nullspace", float(np.abs(h @ np.ones(labeling.n_total)).max()))

        if sel.all():
            beta = float(rng.uniform(0.0, 0.9))
            push, _ = objectives.center_push_total(labeling)
            value = trace_form(within, f, p) - beta * trace_form(push, f, p)
            expected = oracle_empirical_errors(p, inst.xs, inst.ys, inst.xt, inst.yt, beta)
            record("empirical_total", _rel_err(value, expected))

            # count-weighted matrix assembly that should reproduce the
            # definitional sample-level sum exactly
            value = (1.0 - beta) * trace_form(within, f, p)
            for cls in range(n_classes):
                n_sc = int((inst.ys == cls).sum())
                n_tc = int((inst.yt == cls).sum())
                mat = objectives.conditional_mmd_matrix(labeling, cls)
                st, ts, _ = objectives.cross_push_matrices(labeling, cls)
                value += (n_sc + n_tc) * trace_form(mat, f, p)
                value -= beta * n_sc * trace_form(st, f, p)
                value -= beta * n_tc * trace_form(ts, f, p)
            expected = oracle_cross_domain_errors(p, inst.xs, inst.ys, inst.xt, inst.yt, beta)
            record("cross_domain_total", _rel_err(value, expected))

        params = Hyperparams(
            beta=float(rng.uniform(0, 1)),
            lam=float(rng.uniform(0, 2)),
            gamma=float(rng.uniform(0, 2)),
            eta=float(rng.uniform(0, 2)),
            delta=1.0,
        )
        parts = objectives.build_objective_matrices(labeling, params)
        manual = (
            parts.within_class
            - params.beta * parts.center_push
            + params.lam * parts.mmd
            + params.eta * parts.laplacian
            - params.gamma * (parts.cross_st + parts.cross_ts)
        )
        record("composition", float(np.abs(parts.combined - manual).max()))
        for name, mat in (
            ("within_class", parts.within_class),
            ("center_push", parts.center_push),
            ("mmd", parts.mmd),
            ("cross_st", parts.cross_st),
            ("cross_ts", parts.cross_ts),
            ("laplacian", parts.laplacian),
            ("combined", parts.combined),
        ):
            record(f"symmetry:{name}", float(np.abs(mat - mat.T).max()))
        record("idempotent:within_class", float(np.abs(within @ within - within).max()))
        ones = np.ones(labeling.n_total)
        record("nullspace:mmd", float(np.abs(parts.mmd @ ones).max()))
        record("nullspace:laplacian", float(np.abs(parts.laplacian @ ones).max()))
        eigs = np.linalg.eigvalsh(parts.laplacian)
        record("psd:laplacian", max(0.0, float(-eigs.min())))

    results = []
    for name in sorted(worst):
        bound = 1e-10 if ":" in name else tol
        bound = 1e-8 if name.startswith(("psd", "idempotent", "centering")) else bound
        results.append(CheckResult(name, worst[name] <= bound, worst[name]))
    return results


def check_eigensolver(seed: int = 0, cases: int = 20, tol: float = 1e-8) -> list[CheckResult]:
    """Random symmetric-definite pairs against scipy's dense reference."""
    rng = np.random.default_rng(seed)
    worst_theta = 0.0
    worst_ortho = 0.0
    worst_resid = 0.0
    for _ in range(cases):
        m = int(rng.integers(2, 33))
        k = int(rng.integers(1, m + 1))
        a = rng.standard_normal((m, m))
        a = 0.5 * (a + a.T)
        root = rng.standard_normal((m, m))
        b = root @ root.T + 0.5 * np.eye(m)
        sol = solve_generalized(a, b, k)
        reference = scipy.linalg.eigh(a, b, eigvals_only=True)
        scale = max(1.0, float(np.abs(reference).max()))
        worst_theta = max(
            worst_theta, float(np.abs(sol.eigenvalues - reference[:k]).max()) / scale
        )
        gram = sol.projection.T @ b @ sol.projection
        worst_ortho = max(worst_ortho, float(np.abs(gram - np.eye(k)).max()))
        worst_resid = max(worst_resid, sol.residual)
    return [
        CheckResult("eigen:theta_vs_reference", worst_theta <= tol, worst_theta),
        CheckResult("eigen:b_orthonormal", worst_ortho <= 1e-6, worst_ortho),
        CheckResult("eigen:residual", worst_resid <= 1e-6, worst_resid),
    ]


def run_suite(seed: int = 0, cases: int = 20) -> list[CheckResult]:
    return check_objective_terms(seed, cases) + check_eigensolver(seed, cases)
