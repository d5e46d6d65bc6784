"""Coefficient matrices whose quadratic forms drive the adaptation objective.

Every builder returns an (n, n) matrix over the stacked sample order
(source rows first, then target rows) such that for a projection P and the
stacked feature matrix X (columns are samples), tr(P' X Q X' P) equals the
corresponding sum of squared distances in the projected space.  Unselected
target samples contribute zero rows and columns to every label-dependent
matrix; they only participate in the marginal distribution term and in the
centering matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class Hyperparams:
    """Non-negative weights for the objective terms plus the ridge delta."""

    beta: float = 0.1
    lam: float = 0.1
    gamma: float = 0.1
    eta: float = 0.1
    delta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("beta", "lam", "gamma", "eta", "delta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


@dataclass(frozen=True)
class JointLabeling:
    """Source labels plus current target pseudo labels and the selection mask.

    Indices into the matrices are global: source sample i sits at row i,
    target sample j at row n_source + j.
    """

    source: np.ndarray
    target: np.ndarray
    selected: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", np.asarray(self.source, dtype=np.int64))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.int64))
        object.__setattr__(self, "selected", np.asarray(self.selected, dtype=bool))
        if self.source.ndim != 1 or self.target.ndim != 1:
            raise DataError("labels must be 1-d")
        if self.selected.shape != self.target.shape:
            raise DataError("selection mask must match target labels")
        if self.n_classes < 2:
            raise DataError("need at least two classes")
        for name, arr in (("source", self.source), ("target", self.target)):
            if arr.size and (arr.min() < 0 or arr.max() >= self.n_classes):
                raise DataError(f"{name} labels outside [0, {self.n_classes})")

    @property
    def n_source(self) -> int:
        return self.source.shape[0]

    @property
    def n_target(self) -> int:
        return self.target.shape[0]

    @property
    def n_total(self) -> int:
        return self.n_source + self.n_target

    def source_members(self, cls: int) -> np.ndarray:
        return np.flatnonzero(self.source == cls)

    def target_members(self, cls: int) -> np.ndarray:
        """Global indices of selected target samples pseudo-labeled cls."""
        local = np.flatnonzero((self.target == cls) & self.selected)
        return local + self.n_source

    def selected_targets(self) -> np.ndarray:
        return np.flatnonzero(self.selected) + self.n_source

    def all_targets(self) -> np.ndarray:
        return np.arange(self.n_target) + self.n_source


@dataclass
class ObjectiveMatrices:
    """All term matrices for one iteration plus their composition."""

    within_class: np.ndarray
    center_push: np.ndarray
    mmd: np.ndarray
    cross_st: np.ndarray
    cross_ts: np.ndarray
    similarity: np.ndarray
    laplacian: np.ndarray
    centering: np.ndarray
    combined: np.ndarray
    skipped: list[str] = field(default_factory=list)


def centering_matrix(n: int) -> np.ndarray:
    """H = I - (1/n) 11': removes the grand mean from the sample dimension."""
    if n < 1:
        raise DataError("centering matrix needs n >= 1")
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _scatter_block(out: np.ndarray, members: np.ndarray) -> None:
    # Adds the projector that maps each member onto its deviation from the
    # group mean; its quadratic form is the within-group squared scatter.
    count = members.shape[0]
    out[members, members] += 1.0
    out[np.ix_(members, members)] -= 1.0 / count


def within_class_projection(labeling: JointLabeling) -> np.ndarray:
    """Quadratic form: sum of squared distances of samples to their class mean.

    Source samples use true labels; selected target samples use pseudo
    labels.  Source and target blocks are centered independently.
    """
    out = np.zeros((labeling.n_total, labeling.n_total))
    for cls in range(labeling.n_classes):
        src = labeling.source_members(cls)
        if src.size:
            _scatter_block(out, src)
        tgt = labeling.target_members(cls)
        if tgt.size:
            _scatter_block(out, tgt)
    return out


def _push_vector(n: int, members: np.ndarray, rest: np.ndarray) -> np.ndarray:
    v = np.zeros(n)
    v[members] = 1.0 / members.shape[0]
    v[rest] = -1.0 / rest.shape[0]
    return v


def center_push_matrix(
    labeling: JointLabeling, cls: int
) -> tuple[np.ndarray, list[str]]:
    """Quadratic form: count-weighted squared distance between the class mean
    and the mean of all other samples in the same domain, summed over domains.

    Maximizing it pushes each class away from the center of everything else.
    A single-class source has no complement and is a configuration error; on
    the target side early curriculum stages can legitimately leave a class
    empty or complement-less, so those blocks are skipped and reported.
    """
    n = labeling.n_total
    out = np.zeros((n, n))
    skipped: list[str] = []
    src = labeling.source_members(cls)
    if src.size:
        src_rest = np.setdiff1d(np.arange(labeling.n_source), src)
        if src_rest.size == 0:
            raise ConfigError(f"source contains only class {cls}: empty complement")
        v = _push_vector(n, src, src_rest)
        out += src.shape[0] * np.outer(v, v)
    else:
        skipped.append(f"center-push source block: class {cls} empty")
    tgt = labeling.target_members(cls)
    sel = labeling.selected_targets()
    tgt_rest = np.setdiff1d(sel, tgt)
    if tgt.size and tgt_rest.size:
        w = _push_vector(n, tgt, tgt_rest)
        out += tgt.shape[0] * np.outer(w, w)
    elif not tgt.size:
        skipped.append(f"center-push target block: class {cls} has no selected samples")
    else:
        skipped.append(f"center-push target block: class {cls} has empty complement")
    return out, skipped


def center_push_total(labeling: JointLabeling) -> tuple[np.ndarray, list[str]]:
    out = np.zeros((labeling.n_total, labeling.n_total))
    skipped: list[str] = []
    for cls in range(labeling.n_classes):
        mat, skips = center_push_matrix(labeling, cls)
        out += mat
        skipped.extend(skips)
    return out, skipped


def marginal_mmd_matrix(
    labeling: JointLabeling, include_unselected: bool = True
) -> np.ndarray:
    """Quadratic form: squared distance between projected domain means."""
    n = labeling.n_total
    src = np.arange(labeling.n_source)
    tgt = labeling.all_targets() if include_unselected else labeling.selected_targets()
    if tgt.size == 0:
        raise DataError("marginal distribution term needs at least one target sample")
    v = _push_vector(n, src, tgt)
    return np.outer(v, v)


def conditional_mmd_matrix(labeling: JointLabeling, cls: int) -> np.ndarray | None:
    """Per-class mean-difference form, or None when either side lacks cls."""
    src = labeling.source_members(cls)
    tgt = labeling.target_members(cls)
    if src.size == 0 or tgt.size == 0:
        return None
    v = _push_vector(labeling.n_total, src, tgt)
    return np.outer(v, v)


def mmd_total(
    labeling: JointLabeling, include_unselected: bool = True
) -> tuple[np.ndarray, list[str]]:
    """Marginal plus all available conditional mean-difference matrices."""
    out = marginal_mmd_matrix(labeling, include_unselected)
    skipped: list[str] = []
    for cls in range(labeling.n_classes):
        mat = conditional_mmd_matrix(labeling, cls)
        if mat is None:
            skipped.append(f"conditional distribution term: class {cls} missing on one side")
        else:
            out += mat
    return out, skipped


def cross_push_matrices(
    labeling: JointLabeling, cls: int
) -> tuple[np.ndarray | None, np.ndarray | None, list[str]]:
    """Cross-domain push-away forms for one class.

    The first matrix measures the squared distance between the source class
    mean and the mean of the other classes' selected target samples; the
    second swaps the roles.  Maximizing both keeps a class away from the
    opposite domain's competing-class center.
    """
    n = labeling.n_total
    src = labeling.source_members(cls)
    tgt = labeling.target_members(cls)
    skipped: list[str] = []
    if src.size == 0 or tgt.size == 0:
        skipped.append(f"cross-domain push: class {cls} missing on one side")
        return None, None, skipped
    src_rest = np.setdiff1d(np.arange(labeling.n_source), src)
    tgt_rest = np.setdiff1d(labeling.selected_targets(), tgt)
    st = None
    if tgt_rest.size:
        v = _push_vector(n, src, tgt_rest)
        st = np.outer(v, v)
    else:
        skipped.append(f"cross-domain push: class {cls} has empty target complement")
    ts = None
    if src_rest.size:
        w = _push_vector(n, tgt, src_rest)
        ts = np.outer(w, w)
    else:
        raise ConfigError(f"source contains only class {cls}: empty complement")
    return st, ts, skipped


def cross_push_totals(
    labeling: JointLabeling,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    n = labeling.n_total
    st_total = np.zeros((n, n))
    ts_total = np.zeros((n, n))
    skipped: list[str] = []
    for cls in range(labeling.n_classes):
        st, ts, skips = cross_push_matrices(labeling, cls)
        if st is not None:
            st_total += st
        if ts is not None:
            ts_total += ts
        skipped.extend(skips)
    return st_total, ts_total, skipped


def similarity_laplacian(labeling: JointLabeling) -> tuple[np.ndarray, np.ndarray]:
    """Binary same-label affinity over all labeled samples and its Laplacian.

    tr(P' X L X' P) equals half the sum of squared projected distances over
    same-label pairs, so minimizing it pulls same-label samples together
    across and within domains.
    """
    n = labeling.n_total
    labeled = np.concatenate([np.arange(labeling.n_source), labeling.selected_targets()])
    labels = np.concatenate(
        [labeling.source, labeling.target[labeling.selected]]
    )
    w = np.zeros((n, n))
    w[np.ix_(labeled, labeled)] = (labels[:, None] == labels[None, :]).astype(float)
    lap = np.diag(w.sum(axis=1)) - w
    return w, lap


def compose_objective(
    parts: "ObjectiveMatrices",
    params: Hyperparams,
    components: tuple[str, ...] = ("erm", "da", "cde", "dfl"),
    legacy_beta_prefactor: bool = False,
) -> np.ndarray:
    """Weighted combination of the term matrices.

    The empirical block is within_class - beta * center_push; the historical
    variant scales that whole block by (1 - beta).  Distribution alignment
    (da), cross-domain push (cde) and the affinity Laplacian (dfl) toggle
    with the component switches used by the ablation suite.
    """
    erm = parts.within_class - params.beta * parts.center_push
    if legacy_beta_prefactor:
        erm = (1.0 - params.beta) * erm
    out = np.zeros_like(parts.within_class)
    if "erm" in components:
        out = out + erm
    if "da" in components:
        out = out + params.lam * parts.mmd
    if "dfl" in components:
        out = out + params.eta * parts.laplacian
    if "cde" in components:
        out = out - params.gamma * (parts.cross_st + parts.cross_ts)
    return out


def build_objective_matrices(
    labeling: JointLabeling,
    params: Hyperparams,
    components: tuple[str, ...] = ("erm", "da", "cde", "dfl"),
    legacy_beta_prefactor: bool = False,
    include_unselected_in_m0: bool = True,
) -> ObjectiveMatrices:
    """Build every term matrix for the current labeling and compose them."""
    if labeling.selected_targets().size == 0:
        raise DataError("no selected target samples: cannot build objective")
    within = within_class_projection(labeling)
    push, skipped = center_push_total(labeling)
    mmd, skips = mmd_total(labeling, include_unselected_in_m0)
    skipped.extend(skips)
    cross_st, cross_ts, skips = cross_push_totals(labeling)
    skipped.extend(skips)
    similarity, laplacian = similarity_laplacian(labeling)
    parts = ObjectiveMatrices(
        within_class=within,
        center_push=push,
        mmd=mmd,
        cross_st=cross_st,
        cross_ts=cross_ts,
        similarity=similarity,
        laplacian=laplacian,
        centering=centering_matrix(labeling.n_total),
        combined=np.zeros_like(within),
        skipped=skipped,
    )
    parts.combined = compose_objective(parts, params, components, legacy_beta_prefactor)
    return parts
