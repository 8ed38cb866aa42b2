"""Displacement metrics over multimodal forecasts."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def _distances(preds: np.ndarray, gt: np.ndarray) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if preds.ndim != 3 or gt.ndim != 2 or preds.shape[1:] != gt.shape:
        raise ShapeError(
            f"expected (K, t_f, m) predictions against (t_f, m) truth, "
            f"got {preds.shape} vs {gt.shape}"
        )
    if preds.shape[0] < 1:
        raise ShapeError("need at least one generation")
    return np.linalg.norm(preds - gt[None], axis=2)


def min_ade_fde(preds: np.ndarray, gt: np.ndarray) -> tuple:
    """Best average and best final displacement, minimized independently.

    The two minima may come from different generations.
    """
    d = _distances(preds, gt)
    return float(d.mean(axis=1).min()), float(d[:, -1].min())


def stat_ade_fde(preds: np.ndarray, gt: np.ndarray) -> tuple:
    """(mean ADE, std ADE, mean FDE, std FDE) over the K generations.

    Standard deviations are population ones (divide by K).
    """
    d = _distances(preds, gt)
    ade = d.mean(axis=1)
    fde = d[:, -1]
    return (
        float(ade.mean()), float(ade.std()),
        float(fde.mean()), float(fde.std()),
    )
