"""Easy-to-hard target sample selection.

Each step admits at most ceil(count * step / total) samples per class,
clamped by how many consistently-labeled candidates exist.  The ceiling is
computed in integer arithmetic so quota sequences are exact and the final
step always admits every consistent sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .prototype import PseudoLabelTable


@dataclass(frozen=True)
class CurriculumState:
    """Outcome of one selection step.

    quotas : (C,) admitted count per class (already clamped)
    consistent_counts : (C,) available consistent candidates per class
    selected_ids : sorted target-sample indices that were admitted
    """

    step: int
    total_steps: int
    quotas: np.ndarray
    consistent_counts: np.ndarray
    selected_ids: np.ndarray


def quota(count: int, step: int, total_steps: int) -> int:
    """ceil(count * step / total_steps) without floating point."""
    if count < 0 or step < 1 or total_steps < step:
        raise ConfigError(f"bad quota arguments: count={count}, step={step}/{total_steps}")
    return (count * step + total_steps - 1) // total_steps


def select(
    table: PseudoLabelTable,
    class_counts: np.ndarray,
    step: int,
    total_steps: int,
    n_classes: int | None = None,
) -> CurriculumState:
    """Admit the most confident consistent samples per class, up to quota.

    class_counts holds the estimated per-class target population used for
    the proportional quota (in training this is the combined pseudo-label
    histogram over all target samples).  Ties in confidence break toward
    the lower sample index, which keeps selection deterministic.
    """
    counts = np.asarray(class_counts, dtype=np.int64)
    if n_classes is None:
        n_classes = counts.shape[0]
    if counts.shape != (n_classes,):
        raise DataError(f"class_counts must have shape ({n_classes},)")
    if not 1 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [1, {total_steps}]")
    quotas = np.zeros(n_classes, dtype=np.int64)
    consistent_counts = np.zeros(n_classes, dtype=np.int64)
    chosen: list[np.ndarray] = []
    for cls in range(n_classes):
        pool = np.flatnonzero(table.consistent & (table.label == cls))
        consistent_counts[cls] = pool.size
        admitted = min(quota(int(counts[cls]), step, total_steps), pool.size)
        quotas[cls] = admitted
        if admitted:
            # lexsort: last key is primary, so order by descending confidence
            # and break ties on the original index
            order = pool[np.lexsort((pool, -table.confidence[pool]))]
            chosen.append(order[:admitted])
    selected_ids = (
        np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)
    )
    return CurriculumState(
        step=step,
        total_steps=total_steps,
        quotas=quotas,
        consistent_counts=consistent_counts,
        selected_ids=selected_ids,
    )


def apply_selection(table: PseudoLabelTable, state: CurriculumState) -> None:
    """Write the admitted set back into the table's selection mask."""
    mask = np.zeros(table.n_samples, dtype=bool)
    mask[state.selected_ids] = True
    table.selected = mask
