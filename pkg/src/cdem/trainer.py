"""Alternating optimization: solve for a projection, relabel, reselect.

One run preprocesses both domains, bootstraps pseudo labels from a
source-only prototype classifier in the preprocessed space, then alternates
for a fixed number of steps between (a) solving the generalized eigenproblem
for the current labeling and (b) refreshing pseudo labels and the curriculum
selection in the new subspace.  True target labels never enter any of these
steps; when provided they are used solely to score predictions per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import curriculum
from .eigsolve import TransformSolution, assemble_operands, solve_generalized, DEFAULT_RIDGE_SCALE
from .errors import CdemError, DataError, NumericError
from .matio import DomainPair, ExperimentConfig, write_matrix
from .objectives import (
    Hyperparams,
    JointLabeling,
    ObjectiveMatrices,
    build_objective_matrices,
)
from .preprocess import fit_pca, normalize_rows, transform
from .prototype import (
    PseudoLabelTable,
    class_probabilities,
    combined_pseudo_labels,
    fit_prototypes,
    nearest_center_labels,
    present_class_centers,
    target_kmeans,
)


@dataclass(frozen=True)
class CrossDomainErrors:
    """0/1-loss rates of the two prototype classifiers on both domains.

    The source model is fit on true source labels, the target model on the
    current pseudo labels.  Target-side rates score against true labels when
    they were provided for evaluation, otherwise against the pseudo labels.
    """

    source_model_on_source: float
    target_model_on_target: float
    target_model_on_source: float
    source_model_on_target: float


@dataclass
class IterationRecord:
    step: int
    objective: float
    selected_per_class: np.ndarray
    n_selected: int
    agreement: float
    accuracy: float | None
    errors: CrossDomainErrors
    skipped: list[str] = field(default_factory=list)


@dataclass
class AdaptationResult:
    """Final projection, per-step records, and target predictions."""

    projection: np.ndarray
    eigenvalues: np.ndarray
    records: list[IterationRecord]
    predictions: np.ndarray
    selected: np.ndarray
    source_embedding: np.ndarray
    target_embedding: np.ndarray
    source_labels: np.ndarray

    @property
    def final_accuracy(self) -> float | None:
        return self.records[-1].accuracy


def preprocess_pair(
    pair: DomainPair, config: ExperimentConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Shared PCA over the stacked domains (default) or per-domain PCA,
    followed by optional unit-length row normalization."""
    if config.joint_pca:
        model = fit_pca(np.vstack([pair.source_x, pair.target_x]), config.pca_dim)
        zs = transform(model, pair.source_x)
        zt = transform(model, pair.target_x)
    else:
        zs = transform(fit_pca(pair.source_x, config.pca_dim), pair.source_x)
        zt = transform(fit_pca(pair.target_x, config.pca_dim), pair.target_x)
    if config.normalize:
        zs = normalize_rows(zs)
        zt = normalize_rows(zt)
    return zs, zt


def evaluate_cross_domain_errors(
    z_source: np.ndarray,
    y_source: np.ndarray,
    z_target: np.ndarray,
    pseudo_labels: np.ndarray,
    n_classes: int,
    eval_labels: np.ndarray | None = None,
) -> CrossDomainErrors:
    """Fit one prototype classifier per domain and cross-score both."""
    centers_s, classes_s = present_class_centers(z_source, y_source, n_classes)
    centers_t, classes_t = present_class_centers(z_target, pseudo_labels, n_classes)
    y_target_ref = pseudo_labels if eval_labels is None else eval_labels
    pred = lambda centers, classes, z: classes[nearest_center_labels(centers, z)]
    return CrossDomainErrors(
        source_model_on_source=float(np.mean(pred(centers_s, classes_s, z_source) != y_source)),
        target_model_on_target=float(np.mean(pred(centers_t, classes_t, z_target) != y_target_ref)),
        target_model_on_source=float(np.mean(pred(centers_t, classes_t, z_source) != y_source)),
        source_model_on_target=float(np.mean(pred(centers_s, classes_s, z_target) != y_target_ref)),
    )


def _validated_eval_labels(
    eval_labels: np.ndarray | None, pair: DomainPair
) -> np.ndarray | None:
    if eval_labels is None:
        return None
    labels = np.asarray(eval_labels, dtype=np.int64)
    if labels.shape != (pair.n_target,):
        raise DataError(
            f"evaluation labels have shape {labels.shape}, expected ({pair.n_target},)"
        )
    if labels.min() < 0 or labels.max() >= pair.n_classes:
        raise DataError(f"evaluation labels outside [0, {pair.n_classes})")
    return labels


def _bootstrap_table(
    zs: np.ndarray, ys: np.ndarray, zt: np.ndarray, n_classes: int, total_steps: int
) -> PseudoLabelTable:
    # Identity projection: classify raw preprocessed targets with source
    # prototypes, treat that single distribution as both classifiers.
    protos = fit_prototypes(zs, ys, n_classes)
    p_source = class_probabilities(protos.centers, zt)
    table = combined_pseudo_labels(p_source, p_source.copy(), 1, total_steps)
    counts = np.bincount(table.label, minlength=n_classes)
    state = curriculum.select(table, counts, 1, total_steps, n_classes)
    curriculum.apply_selection(table, state)
    return table


def _dump_iteration(
    dump_dir: Path,
    step: int,
    parts: ObjectiveMatrices,
    operands: tuple[np.ndarray, np.ndarray],
    solution: TransformSolution,
) -> None:
    dump_dir.mkdir(parents=True, exist_ok=True)
    named = {
        "within_class": parts.within_class,
        "center_push": parts.center_push,
        "mmd": parts.mmd,
        "cross_st": parts.cross_st,
        "cross_ts": parts.cross_ts,
        "laplacian": parts.laplacian,
        "combined": parts.combined,
        "operand_a": operands[0],
        "operand_b": operands[1],
        "projection": solution.projection,
        "eigenvalues": solution.eigenvalues.reshape(1, -1),
    }
    for name, mat in named.items():
        write_matrix(mat, dump_dir / f"step{step:02d}_{name}.cdm")


def run_adaptation(
    pair: DomainPair,
    config: ExperimentConfig,
    eval_labels: np.ndarray | None = None,
    dump_dir: str | Path | None = None,
) -> AdaptationResult:
    """Full alternating run; returns exactly config.iterations records."""
    eval_labels = _validated_eval_labels(eval_labels, pair)
    params = Hyperparams(
        beta=config.beta,
        lam=config.lam,
        gamma=config.gamma,
        eta=config.eta,
        delta=config.delta,
    )
    total = config.iterations
    zs_raw, zt_raw = preprocess_pair(pair, config)
    features = np.vstack([zs_raw, zt_raw])
    n_source = pair.n_source

    table = _bootstrap_table(zs_raw, pair.source_y, zt_raw, pair.n_classes, total)
    prev_labels = table.label.copy()
    kmeans_centers: np.ndarray | None = None
    records: list[IterationRecord] = []
    solution: TransformSolution | None = None
    zs = zs_raw
    zt = zt_raw

    for step in range(1, total + 1):
        try:
            labeling = JointLabeling(
                source=pair.source_y,
                target=table.label,
                selected=table.selected,
                n_classes=pair.n_classes,
            )
            parts = build_objective_matrices(
                labeling,
                params,
                components=config.components,
                legacy_beta_prefactor=config.legacy_beta_prefactor,
                include_unselected_in_m0=config.include_unselected_in_m0,
            )
            operands = assemble_operands(features, parts.combined, params.delta)
            b_shift = DEFAULT_RIDGE_SCALE * float(np.trace(operands[1])) / operands[1].shape[0]
            solution = solve_generalized(
                operands[0], operands[1], config.subspace_dim, b_shift=b_shift
            )
            projected = features @ solution.projection
            zs = projected[:n_source]
            zt = projected[n_source:]

            protos = fit_prototypes(zs, pair.source_y, pair.n_classes)
            init = protos.centers
            if config.kmeans_warm_start and kmeans_centers is not None:
                init = kmeans_centers
            cluster_protos, _, _ = target_kmeans(zt, init)
            kmeans_centers = cluster_protos.centers

            p_source = class_probabilities(protos.centers, zt)
            p_target = class_probabilities(cluster_protos.centers, zt)
            table = combined_pseudo_labels(p_source, p_target, step, total)
            counts = np.bincount(table.label, minlength=pair.n_classes)
            state = curriculum.select(table, counts, step, total, pair.n_classes)
            curriculum.apply_selection(table, state)

            objective = float(np.sum(projected * (parts.combined @ projected)))
            objective += params.delta * float(np.sum(solution.projection**2))
            if not np.isfinite(objective):
                raise NumericError("objective value is not finite")
            if dump_dir is not None:
                _dump_iteration(Path(dump_dir), step, parts, operands, solution)

            agreement = float(np.mean(table.label == prev_labels))
            prev_labels = table.label.copy()
            accuracy = None
            if eval_labels is not None:
                accuracy = float(np.mean(table.label == eval_labels) * 100.0)
            errors = evaluate_cross_domain_errors(
                zs, pair.source_y, zt, table.label, pair.n_classes, eval_labels
            )
            records.append(
                IterationRecord(
                    step=step,
                    objective=objective,
                    selected_per_class=state.quotas.copy(),
                    n_selected=int(state.selected_ids.size),
                    agreement=agreement,
                    accuracy=accuracy,
                    errors=errors,
                    skipped=list(parts.skipped),
                )
            )
        except CdemError as exc:
            raise type(exc)(f"step {step}: {exc}") from exc

    assert solution is not None
    embed_cols = min(2, solution.projection.shape[1])
    return AdaptationResult(
        projection=solution.projection,
        eigenvalues=solution.eigenvalues,
        records=records,
        predictions=table.label.copy(),
        selected=table.selected.copy(),
        source_embedding=zs[:, :embed_cols].copy(),
        target_embedding=zt[:, :embed_cols].copy(),
        source_labels=pair.source_y.copy(),
    )
