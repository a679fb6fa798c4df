"""Post-hoc metrics over training logs: recovery error, subspace alignment,
sequential-fit detection, and held-out error for real ratings data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError
from .linalg import Matrix
from .trainer import TrajectoryLog


def recovery_error(W_hat: Matrix, M_star: Matrix) -> float:
    """Relative Frobenius error ||W - M*|| / ||M*||."""
    if W_hat.shape != M_star.shape:
        raise ContractViolationError(f"shape mismatch {W_hat.shape} vs {M_star.shape}")
    denom = float(np.linalg.norm(M_star))
    if denom == 0.0:
        raise ContractViolationError("target matrix must be nonzero")
    return float(np.linalg.norm(W_hat - M_star)) / denom


@dataclass(frozen=True)
class IncrementalConfig:
    """Tolerances for declaring component i fitted.

    The singular-value tolerance is relative by default,
    c_val_i = (c_val_rel * sigma*_i)^2; pass ``c_val`` for an absolute one.
    """

    r: int
    c_val: float | None = None
    c_val_rel: float = 1e-3
    c_vec: float = 1e-3

    def __post_init__(self):
        if self.r < 1:
            raise ContractViolationError("need r >= 1")
        if self.c_vec < 0 or (self.c_val is not None and self.c_val < 0):
            raise ContractViolationError("tolerances must be nonnegative")


@dataclass
class SpectralTrajectory:
    """Per logged iterate: singular values and per-component alignments."""

    ts: np.ndarray            # (n,)
    svals: np.ndarray         # (n, k)
    left_align: np.ndarray    # (n, r), absolute inner products
    right_align: np.ndarray   # (n, r)


def alignment(log: TrajectoryLog, U_star: Matrix, V_star: Matrix, r: int) -> SpectralTrajectory:
    """Alignment of the logged singular vectors with the target's.

    Uses the spectral snapshots stored during training; absolute inner
    products kill the sign ambiguity of singular vectors.
    """
    if not log.spectral:
        raise ContractViolationError("log has no spectral snapshots; train with track_spectral > 0")
    if U_star.shape[1] < r or V_star.shape[1] < r:
        raise ContractViolationError("target factors carry fewer than r columns")
    if min(s.s.size for s in log.spectral) < r:
        raise ContractViolationError("snapshots track fewer than r components")
    ts, svals, la, ra = [], [], [], []
    for snap in log.spectral:
        ts.append(snap.t)
        svals.append(snap.s)
        la.append([abs(float(snap.U[:, i] @ U_star[:, i])) for i in range(r)])
        ra.append([abs(float(snap.V[:, i] @ V_star[:, i])) for i in range(r)])
    return SpectralTrajectory(
        ts=np.array(ts, dtype=np.int64),
        svals=np.vstack(svals),
        left_align=np.array(la),
        right_align=np.array(ra),
    )


def subspace_distance(U_a: Matrix, U_b: Matrix, r: int) -> float:
    """r - ||U_a^T U_b||_F^2 over the leading r columns; 0 iff equal spans."""
    for name, U in (("first", U_a), ("second", U_b)):
        if U.shape[1] < r:
            raise ContractViolationError(f"{name} basis has fewer than {r} columns")
        g = U[:, :r].T @ U[:, :r]
        if np.linalg.norm(g - np.eye(r)) > 1e-8:
            raise ContractViolationError(f"{name} basis is not orthonormal")
    val = r - float(np.sum((U_a[:, :r].T @ U_b[:, :r]) ** 2))
    return max(val, 0.0)


def detect_incremental(
    st: SpectralTrajectory, sigma_star: np.ndarray, cfg: IncrementalConfig
) -> list[int | None]:
    """Fit time t_i per component: the first logged iterate after which the
    value and alignment conditions hold at every later logged iterate.

    Components that never settle come back as None.
    """
    sigma_star = np.asarray(sigma_star, dtype=np.float64).ravel()
    if sigma_star.size < cfg.r or st.svals.shape[1] < cfg.r:
        raise ContractViolationError("trajectory or targets cover fewer than r components")
    n = st.ts.size
    out: list[int | None] = []
    for i in range(cfg.r):
        c_val = cfg.c_val if cfg.c_val is not None else (cfg.c_val_rel * sigma_star[i]) ** 2
        ok = (
            ((st.svals[:, i] - sigma_star[i]) ** 2 <= c_val)
            & (st.left_align[:, i] >= 1.0 - cfg.c_vec)
            & (st.right_align[:, i] >= 1.0 - cfg.c_vec)
        )
        first = None
        for k in range(n - 1, -1, -1):
            if not ok[k]:
                break
            first = int(st.ts[k])
        out.append(first)
    return out


def holdout_rmse(W_hat: Matrix, test_entries) -> float:
    """Root mean squared error over held-out (row, col, value) triples."""
    test = np.asarray(test_entries, dtype=np.float64)
    if test.size == 0:
        raise ContractViolationError("empty test set")
    test = test.reshape(-1, 3)
    rows = test[:, 0].astype(np.int64)
    cols = test[:, 1].astype(np.int64)
    if rows.min() < 0 or rows.max() >= W_hat.shape[0] or cols.min() < 0 or cols.max() >= W_hat.shape[1]:
        raise ContractViolationError("test indices out of range")
    err = W_hat[rows, cols] - test[:, 2]
    return float(np.sqrt(np.mean(err**2)))


def holdout_relative_error(W_hat: Matrix, test_entries) -> float:
    """Relative l2 error over held-out entries (distinct from the RMSE)."""
    test = np.asarray(test_entries, dtype=np.float64).reshape(-1, 3)
    if test.size == 0:
        raise ContractViolationError("empty test set")
    rows = test[:, 0].astype(np.int64)
    cols = test[:, 1].astype(np.int64)
    denom = float(np.linalg.norm(test[:, 2]))
    if denom == 0.0:
        raise ContractViolationError("held-out values are all zero")
    err = W_hat[rows, cols] - test[:, 2]
    return float(np.linalg.norm(err)) / denom


def offdiagonal_leakage(W: Matrix, U: Matrix, V: Matrix) -> float:
    """How far W is from a diagonal form in the (U, V) frame.

    Returns the larger of the off-diagonal mass of U^T W V and the residual
    of W outside the span of the frame; exactly diagonal dynamics keep both
    at roundoff level.
    """
    C = U.T @ W @ V
    off = C - np.diag(np.diag(C))
    outside = W - U @ C @ V.T
    return max(float(np.linalg.norm(off)), float(np.linalg.norm(outside)))


def write_diagnostics_csv(
    path: str | Path,
    experiment: str,
    seed: int,
    rows: list[tuple[int, str, int | None, float]],
) -> None:
    """Tidy metric rows keyed by (experiment, seed, t, metric, component)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "seed", "t", "metric", "component", "value"])
        for t, metric, component, value in rows:
            w.writerow(
                [experiment, seed, t, metric, "" if component is None else component, repr(value)]
            )


def spectral_rows(st: SpectralTrajectory) -> list[tuple[int, str, int | None, float]]:
    """Flatten a spectral trajectory into tidy rows, including the subspace
    drift between consecutive logged iterates."""
    rows: list[tuple[int, str, int | None, float]] = []
    r = st.left_align.shape[1]
    for n, t in enumerate(st.ts):
        for i in range(st.svals.shape[1]):
            rows.append((int(t), "sval", i + 1, float(st.svals[n, i])))
        for i in range(r):
            rows.append((int(t), "left_align", i + 1, float(st.left_align[n, i])))
            rows.append((int(t), "right_align", i + 1, float(st.right_align[n, i])))
    return rows
