"""Coding-rate and rate-reduction functions on representation matrices.

All rates use the natural logarithm. For a ``d x n`` matrix ``Z`` holding one
representation vector per column and a squared quantization error ``eps_sq``,
the coding rate is

    R(Z) = 1/2 * logdet(I_d + d / (n * eps_sq) * Z @ Z.T)

evaluated through the eigenvalues of a symmetric PSD Gram matrix (never a raw
determinant). When ``n < d`` the ``n x n`` Gram ``Z.T @ Z`` is used instead,
via ``det(I + a*Z@Z.T) == det(I + a*Z.T@Z)``. The class-conditional and
pairwise reductions are differences of such rates, and every function here is
pure, reentrant and has an analytic gradient counterpart.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, PartitionMismatch, ShapeMismatch

__all__ = [
    "ClassPartition",
    "coding_rate",
    "rate_reduction_classwise",
    "rate_reduction_pair",
    "classwise_upper_bound",
    "grad_coding_rate",
    "grad_rate_reduction_classwise",
    "grad_rate_reduction_pair",
]


def as_matrix(Z, name: str = "Z") -> np.ndarray:
    """Coerce to a finite 2-D float array with at least one row and column."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] < 1 or Z.shape[1] < 1:
        raise InvalidInput(f"{name} must be a 2-D matrix with >= 1 row and column, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return Z


def check_eps_sq(eps_sq) -> float:
    eps_sq = float(eps_sq)
    if not np.isfinite(eps_sq) or eps_sq <= 0.0:
        raise InvalidInput(f"eps_sq must be a positive real, got {eps_sq!r}")
    return eps_sq


@dataclass(frozen=True, eq=False)
class ClassPartition:
    """Assignment of n samples to k classes; every class must be nonempty.

    ``labels`` holds 0-based class indices, one per column of the matrix the
    partition describes.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.size == 0:
            raise InvalidInput("labels must be a nonempty 1-D integer array")
        k = int(self.k)
        if k < 1:
            raise InvalidInput(f"k must be >= 1, got {k}")
        if labels.min() < 0 or labels.max() >= k:
            raise InvalidInput(f"labels must lie in [0, {k})")
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            raise InvalidInput(f"class {empty} has no samples")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "_counts", counts)

    @classmethod
    def from_labels(cls, labels, k=None) -> "ClassPartition":
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 0
        return cls(labels, k)

    @classmethod
    def from_counts(cls, counts) -> "ClassPartition":
        """Partition for a matrix whose columns are sorted by class."""
        counts = [int(c) for c in counts]
        labels = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
        return cls(labels, len(counts))

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def class_counts(self) -> np.ndarray:
        return self._counts.copy()

    def indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)

    def check_matches(self, Z: np.ndarray):
        if Z.shape[1] != self.n:
            raise PartitionMismatch(
                f"partition covers {self.n} samples but matrix has {Z.shape[1]} columns"
            )


def _rate(Z: np.ndarray, eps_sq: float) -> float:
    # assumes Z already validated
    d, n = Z.shape
    alpha = d / (n * eps_sq)
    gram = Z @ Z.T if d <= n else Z.T @ Z
    w = np.linalg.eigvalsh(gram)
    w = np.clip(w, 0.0, None)  # PSD up to rounding
    return 0.5 * float(np.sum(np.log1p(alpha * w)))


def _grad_rate(Z: np.ndarray, eps_sq: float) -> np.ndarray:
    d, n = Z.shape
    alpha = d / (n * eps_sq)
    if d <= n:
        K = np.eye(d) + alpha * (Z @ Z.T)
        return alpha * np.linalg.solve(K, Z)
    # push-through identity: (I + a*Z@Z.T)^{-1} Z == Z (I + a*Z.T@Z)^{-1}
    K = np.eye(n) + alpha * (Z.T @ Z)
    return alpha * np.linalg.solve(K, Z.T).T


def coding_rate(Z, eps_sq=1.0) -> float:
    """Coding rate R(Z) of the columns of ``Z`` at squared distortion ``eps_sq``.

    Nonnegative; zero exactly for the zero matrix.
    """
    Z = as_matrix(Z)
    return _rate(Z, check_eps_sq(eps_sq))


def rate_reduction_classwise(Z, partition: ClassPartition, eps_sq=1.0) -> float:
    """Rate reduction of ``Z`` with respect to a class partition.

    R(Z) minus the class-count-weighted average of the per-class rates, each
    per-class rate evaluated with its own column count.
    """
    Z = as_matrix(Z)
    eps_sq = check_eps_sq(eps_sq)
    partition.check_matches(Z)
    n = Z.shape[1]
    total = _rate(Z, eps_sq)
    for j in range(partition.k):
        Zj = Z[:, partition.indices(j)]
        total -= (Zj.shape[1] / n) * _rate(Zj, eps_sq)
    return total


def rate_reduction_pair(Z1, Z2, eps_sq=1.0) -> float:
    """Rate-reduction difference measure between two equal-shape matrices.

    R of the horizontal concatenation minus the average of the individual
    rates; nonnegative, zero iff the two Gram matrices coincide.
    """
    Z1 = as_matrix(Z1, "Z1")
    Z2 = as_matrix(Z2, "Z2")
    eps_sq = check_eps_sq(eps_sq)
    if Z1.shape != Z2.shape:
        raise ShapeMismatch(f"Z1 has shape {Z1.shape} but Z2 has shape {Z2.shape}")
    both = np.concatenate([Z1, Z2], axis=1)
    return _rate(both, eps_sq) - 0.5 * _rate(Z1, eps_sq) - 0.5 * _rate(Z2, eps_sq)


def classwise_upper_bound(Z, partition: ClassPartition, eps_sq=1.0) -> float:
    """Spectral upper bound on the classwise rate reduction.

    (1/2n) * sum_j sum_p [ n*log(1 + (d/(n*eps_sq))*s_p^2)
                           - n_j*log(1 + (d/(n_j*eps_sq))*s_p^2) ]
    over the singular values s_p of each class block. Equals the rate
    reduction exactly when the class blocks are mutually column-orthogonal.
    """
    Z = as_matrix(Z)
    eps_sq = check_eps_sq(eps_sq)
    partition.check_matches(Z)
    d, n = Z.shape
    total = 0.0
    for j in range(partition.k):
        Zj = Z[:, partition.indices(j)]
        nj = Zj.shape[1]
        s2 = np.linalg.svd(Zj, compute_uv=False) ** 2
        total += float(
            np.sum(n * np.log1p((d / (n * eps_sq)) * s2) - nj * np.log1p((d / (nj * eps_sq)) * s2))
        )
    return total / (2 * n)


def grad_coding_rate(Z, eps_sq=1.0) -> np.ndarray:
    """Gradient of ``coding_rate`` in ``Z``: alpha * (I + alpha*Z@Z.T)^{-1} @ Z."""
    Z = as_matrix(Z)
    return _grad_rate(Z, check_eps_sq(eps_sq))


def grad_rate_reduction_classwise(Z, partition: ClassPartition, eps_sq=1.0) -> np.ndarray:
    """Gradient of ``rate_reduction_classwise`` in ``Z``."""
    Z = as_matrix(Z)
    eps_sq = check_eps_sq(eps_sq)
    partition.check_matches(Z)
    n = Z.shape[1]
    D = _grad_rate(Z, eps_sq)
    for j in range(partition.k):
        idx = partition.indices(j)
        Zj = Z[:, idx]
        D[:, idx] -= (Zj.shape[1] / n) * _grad_rate(Zj, eps_sq)
    return D


def grad_rate_reduction_pair(Z1, Z2, eps_sq=1.0):
    """Gradients of ``rate_reduction_pair`` in both arguments.

    Returns ``(D1, D2)`` with the same shapes as ``Z1``/``Z2``. Both vanish
    exactly when ``Z1 @ Z1.T == Z2 @ Z2.T``.
    """
    Z1 = as_matrix(Z1, "Z1")
    Z2 = as_matrix(Z2, "Z2")
    eps_sq = check_eps_sq(eps_sq)
    if Z1.shape != Z2.shape:
        raise ShapeMismatch(f"Z1 has shape {Z1.shape} but Z2 has shape {Z2.shape}")
    d, n = Z1.shape
    alpha_cat = d / (2 * n * eps_sq)
    W = np.eye(d) + alpha_cat * (Z1 @ Z1.T + Z2 @ Z2.T)
    sol = np.linalg.solve(W, np.concatenate([Z1, Z2], axis=1))
    D1 = alpha_cat * sol[:, :n] - 0.5 * _grad_rate(Z1, eps_sq)
    D2 = alpha_cat * sol[:, n:] - 0.5 * _grad_rate(Z2, eps_sq)
    return D1, D2
