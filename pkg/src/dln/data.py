"""Problem generators (synthetic low-rank targets, masks, sensing operators)
and the MovieLens 100K ratings loader.

Every generator is seeded through named Philox streams, so a (seed, stream)
pair fully determines the draw; see ``linalg.make_rng``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError, ParseError, ResourceBudgetError
from .linalg import Matrix, make_rng, sample_semi_orthogonal
from .operators import CompletionMask, GaussianSensing

# hard cap on dense sensing-operator storage before we refuse to allocate
DEFAULT_SENSING_BUDGET_BYTES = 4 * 2**30

MOVIELENS_SHAPE = (943, 1682)


@dataclass(frozen=True)
class SyntheticSpec:
    """Low-rank target description: d x d, rank r, spectrum profile.

    The spectrum is either ``sigma_values`` (explicit list, kept descending)
    or r i.i.d. draws from Uniform[sigma_range], sorted descending.
    """

    d: int
    r: int
    seed: int
    sigma_range: tuple[float, float] = (1.0, 3.0)
    sigma_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.r <= self.d:
            raise ContractViolationError(f"rank {self.r} out of range 1..{self.d}")
        if self.sigma_values is not None:
            if len(self.sigma_values) != self.r:
                raise ContractViolationError("explicit spectrum length must equal r")
            if any(s <= 0 for s in self.sigma_values):
                raise ContractViolationError("singular values must be positive")
        else:
            lo, hi = self.sigma_range
            if not 0 < lo <= hi:
                raise ContractViolationError("need 0 < sigma_range[0] <= sigma_range[1]")


def gen_lowrank(spec: SyntheticSpec) -> tuple[Matrix, Matrix, np.ndarray, Matrix]:
    """Target M* = U* diag(sigma*) V*^T with Haar factors.

    Returns (M*, U*, sigma*, V*) so diagnostics can compare against the
    ground-truth spectrum and subspaces.
    """
    rng = make_rng(spec.seed, 0)
    U = sample_semi_orthogonal(spec.d, spec.r, rng)
    V = sample_semi_orthogonal(spec.d, spec.r, rng)
    if spec.sigma_values is not None:
        s = np.sort(np.asarray(spec.sigma_values, dtype=np.float64))[::-1].copy()
    else:
        lo, hi = spec.sigma_range
        s = np.sort(rng.uniform(lo, hi, size=spec.r))[::-1].copy()
    M = (U * s) @ V.T
    return M, U, s, V


def gen_mcar_mask(d: int, p: float, seed: int, n_cols: int | None = None) -> CompletionMask:
    """Each entry observed independently with probability p."""
    if not 0 < p <= 1:
        raise ContractViolationError("need p in (0, 1]")
    n_cols = n_cols or d
    rng = make_rng(seed, 1)
    keep = rng.random((d, n_cols)) < p
    rows, cols = np.nonzero(keep)
    if rows.size == 0:
        raise ContractViolationError(
            f"mask draw came up empty for d={d}, p={p}; use another seed"
        )
    return CompletionMask(rows, cols, d, n_cols)


def gen_gaussian_ops(
    d: int, m: int, seed: int, budget_bytes: int = DEFAULT_SENSING_BUDGET_BYTES
) -> GaussianSensing:
    """m dense d x d sensing matrices with i.i.d. standard normal entries."""
    if m < 1:
        raise ContractViolationError("need m >= 1")
    need = m * d * d * 8
    if need > budget_bytes:
        raise ResourceBudgetError(
            f"sensing operator needs {need} bytes > budget {budget_bytes}"
        )
    rng = make_rng(seed, 1)
    return GaussianSensing(rng.standard_normal((m, d, d)))


@dataclass
class RatingsDataset:
    users: np.ndarray       # 0-based
    items: np.ndarray       # 0-based
    ratings: np.ndarray
    timestamps: np.ndarray
    n_users: int
    n_items: int

    def __len__(self) -> int:
        return self.users.size


def load_movielens(path: str | Path, shape: tuple[int, int] = MOVIELENS_SHAPE) -> RatingsDataset:
    """Parse a `u.data`-format file: tab-separated user, item, rating, timestamp.

    IDs are 1-based in the file and mapped to 0-based indices; the canonical
    100K file has 943 users, 1682 items, and 100000 lines.
    """
    n_users, n_items = shape
    users, items, ratings, stamps = [], [], [], []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line_no)
            try:
                u, i, r, ts = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise ParseError(f"non-integer field: {exc}", line_no) from exc
            if not 1 <= u <= n_users:
                raise ParseError(f"user id {u} outside 1..{n_users}", line_no)
            if not 1 <= i <= n_items:
                raise ParseError(f"item id {i} outside 1..{n_items}", line_no)
            if not 1 <= r <= 5:
                raise ParseError(f"rating {r} outside 1..5", line_no)
            users.append(u - 1)
            items.append(i - 1)
            ratings.append(float(r))
            stamps.append(ts)
    if not users:
        raise ParseError("empty ratings file")
    users_a = np.array(users, dtype=np.int64)
    items_a = np.array(items, dtype=np.int64)
    flat = users_a * n_items + items_a
    uniq, counts = np.unique(flat, return_counts=True)
    if np.any(counts > 1):
        dup = int(uniq[np.argmax(counts > 1)])
        raise ParseError(
            f"duplicate (user, item) pair ({dup // n_items + 1}, {dup % n_items + 1})"
        )
    return RatingsDataset(
        users=users_a,
        items=items_a,
        ratings=np.array(ratings),
        timestamps=np.array(stamps, dtype=np.int64),
        n_users=n_users,
        n_items=n_items,
    )


def gen_ratings_standin(
    path: str | Path,
    n_users: int = 200,
    n_items: int = 350,
    n_ratings: int = 12000,
    rank: int = 14,
    seed: int = 0,
    noise: float = 0.5,
) -> tuple[int, int]:
    """Write a synthetic ratings file in the tab-separated `u.data` layout.

    An approximately low-rank ratings table (integer 1..5, noisy) sampled at
    random (user, item) pairs. Lets the full ratings pipeline run where the
    real dataset is not available; returns the (n_users, n_items) shape to
    pass to :func:`load_movielens`.
    """
    rng = make_rng(seed, 5)
    gu = rng.standard_normal((n_users, rank)) / np.sqrt(rank)
    gv = rng.standard_normal((n_items, rank)) / np.sqrt(rank)
    scores = 3.5 + 1.4 * (gu @ gv.T) + noise * rng.standard_normal((n_users, n_items))
    table = np.clip(np.rint(scores), 1, 5).astype(int)
    if n_ratings > n_users * n_items:
        raise ContractViolationError("more ratings than cells")
    flat = rng.choice(n_users * n_items, size=n_ratings, replace=False)
    flat.sort()
    lines = []
    for k, f in enumerate(flat):
        u, i = divmod(int(f), n_items)
        lines.append(f"{u + 1}\t{i + 1}\t{table[u, i]}\t{874000000 + k}")
    Path(path).write_text("\n".join(lines) + "\n")
    return n_users, n_items


def split_ratings(
    ds: RatingsDataset, train_frac: float, seed: int
) -> tuple[CompletionMask, np.ndarray, np.ndarray]:
    """Uniform split without replacement; train count is floor(frac * n).

    Returns the train mask with its measurement vector (ordered row-major
    over the sorted train indices) and the held-out entries as (user, item,
    rating) rows.
    """
    if not 0 < train_frac < 1:
        raise ContractViolationError("need train_frac in (0, 1)")
    n = len(ds)
    n_train = int(np.floor(train_frac * n))
    if n_train < 1 or n_train >= n:
        raise ContractViolationError("split leaves an empty train or test set")
    perm = make_rng(seed, 4).permutation(n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    mask = CompletionMask(ds.users[train_idx], ds.items[train_idx], ds.n_users, ds.n_items)
    # measurement order must follow the mask's sorted row-major layout
    full = np.full((ds.n_users, ds.n_items), np.nan)
    full[ds.users[train_idx], ds.items[train_idx]] = ds.ratings[train_idx]
    y = full[mask.rows, mask.cols]
    test = np.column_stack(
        [ds.users[test_idx], ds.items[test_idx], ds.ratings[test_idx]]
    ).astype(np.float64)
    return mask, y, test
