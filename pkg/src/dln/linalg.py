"""Dense linear algebra kernels used throughout the package.

Matrices are plain ``numpy.float64`` arrays in row-major (C) order; there is
no wrapper class. Every routine here is a pure function and is deterministic
for a fixed input, which the training loop and the experiment logs rely on
for bit-reproducible runs.

Randomness comes from numpy's Philox counter-based bit generator. Streams are
split by seeding ``SeedSequence(entropy=seed, spawn_key=(tags...))``, so a
(seed, tag) pair names an independent stream; see :func:`make_rng`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError, NumericalError

Matrix = np.ndarray

_BIN_MAGIC = b"DLNM"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Named random stream: Philox generator for (seed, *stream tags)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> Matrix:
    """Validate user input into a finite float64 row-major matrix.

    A flat sequence is reshaped to rows x cols when both are given. Non-2-D
    shapes and non-finite entries raise :class:`ContractViolationError`.
    """
    a = np.array(data, dtype=np.float64, order="C")
    if a.ndim == 1 and rows is not None and cols is not None:
        if a.size != rows * cols:
            raise ContractViolationError(
                f"flat data of length {a.size} cannot fill {rows}x{cols}"
            )
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise ContractViolationError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ContractViolationError("matrix entries must be finite")
    return a


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with an explicit conformability check."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolationError(
            f"cannot multiply shapes {a.shape} x {b.shape}"
        )
    return a @ b


def frobenius_norm_sq(a: Matrix) -> float:
    """Sum of squared entries."""
    return float(np.sum(a * a))


def frobenius_norm(a: Matrix) -> float:
    return float(np.sqrt(np.sum(a * a)))


@dataclass(frozen=True)
class SvdResult:
    """Compact SVD: ``U @ diag(s) @ V.T`` reconstructs the input.

    U is m x k and V is n x k with orthonormal columns, s is descending and
    nonnegative. Columns are sign-normalized (largest-magnitude entry of each
    U column is positive, V flipped jointly) so results are deterministic.
    """

    U: Matrix
    s: np.ndarray
    V: Matrix

    def reconstruct(self) -> Matrix:
        return (self.U * self.s) @ self.V.T

    def truncate(self, k: int) -> "SvdResult":
        if not 1 <= k <= self.s.size:
            raise ContractViolationError(f"truncation rank {k} out of range 1..{self.s.size}")
        return SvdResult(
            np.ascontiguousarray(self.U[:, :k]),
            self.s[:k].copy(),
            np.ascontiguousarray(self.V[:, :k]),
        )


def _normalize_signs(U: Matrix, V: Matrix) -> tuple[Matrix, Matrix]:
    # flip each (u_j, v_j) pair so the largest-|.| entry of u_j is positive;
    # argmax takes the first occurrence, which fixes ties deterministically
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0.0] = 1.0
    return U * signs, V * signs


def svd(a: Matrix) -> SvdResult:
    """Deterministic compact SVD with the package sign convention."""
    if a.ndim != 2:
        raise ContractViolationError("svd expects a 2-D matrix")
    try:
        U, s, Vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure is rare
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    U, V = _normalize_signs(U, Vt.T)
    return SvdResult(np.ascontiguousarray(U), s, np.ascontiguousarray(V))


def truncated_svd(a: Matrix, k: int) -> SvdResult:
    """Leading k singular triplets, same ordering and signs as :func:`svd`."""
    if not 1 <= k <= min(a.shape):
        raise ContractViolationError(
            f"truncation rank {k} out of range 1..{min(a.shape)}"
        )
    return svd(a).truncate(k)


def singular_values(a: Matrix) -> np.ndarray:
    """Descending singular values only (cheaper than a full SVD)."""
    return np.linalg.svd(a, compute_uv=False)


def sample_orthogonal(n: int, rng: np.random.Generator) -> Matrix:
    """Haar-distributed n x n orthogonal matrix.

    QR of an i.i.d. standard normal matrix with the R-diagonal sign
    correction, which makes the distribution exactly Haar.
    """
    if n < 1:
        raise ContractViolationError("need n >= 1")
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d


def sample_semi_orthogonal(rows: int, cols: int, rng: np.random.Generator) -> Matrix:
    """Haar-distributed semi-orthogonal matrix (orthonormal rows or columns)."""
    if rows < 1 or cols < 1:
        raise ContractViolationError("need rows, cols >= 1")
    if rows >= cols:
        z = rng.standard_normal((rows, cols))
        q, r = np.linalg.qr(z)
        d = np.sign(np.diag(r))
        d[d == 0.0] = 1.0
        return q * d
    return sample_semi_orthogonal(cols, rows, rng).T.copy()


def save_matrix_csv(path: str | Path, a: Matrix) -> None:
    np.savetxt(path, np.atleast_2d(a), delimiter=",", fmt="%.17g")


def load_matrix_csv(path: str | Path) -> Matrix:
    a = np.loadtxt(path, delimiter=",", ndmin=2)
    return as_matrix(a)


def save_matrix_bin(path: str | Path, a: Matrix) -> None:
    """Binary format: magic "DLNM", u64 rows, u64 cols, little-endian f64 row-major."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ContractViolationError("can only serialize 2-D matrices")
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
        fh.write(a.astype("<f8").tobytes(order="C"))


def load_matrix_bin(path: str | Path) -> Matrix:
    raw = Path(path).read_bytes()
    if raw[:4] != _BIN_MAGIC:
        raise ContractViolationError(f"{path}: bad magic bytes, not a matrix file")
    if len(raw) < 20:
        raise ContractViolationError(f"{path}: truncated header")
    rows, cols = struct.unpack("<QQ", raw[4:20])
    expected = 20 + rows * cols * 8
    if len(raw) != expected:
        raise ContractViolationError(
            f"{path}: payload size {len(raw)} != expected {expected} for {rows}x{cols}"
        )
    a = np.frombuffer(raw[20:], dtype="<f8").reshape(rows, cols)
    return as_matrix(a)
