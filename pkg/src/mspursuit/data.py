"""Synthetic union-of-subspaces data generation and dataset persistence.

A dataset is drawn as follows, given per-class sample counts ``n_j``, ambient
dimension ``d_x``, subspace dimensions ``d_S_j``, a coherence control ``nu``
and an ambient noise variance ``sigma_sq``:

1. Draw one matrix ``Q`` (``d_x x max_j d_S_j``) with orthonormal columns via
   the QR factorization of a standard-Gaussian matrix.
2. Per class, select ``d_S_j`` columns of ``Q`` uniformly without replacement
   (classes may share columns) to form ``Q_j``.
3. Draw ``Theta_j`` (``d_x x d_x``), ``xi_j`` (``d_S_j x n_j``) and ``tau_j``
   (``d_x x n_j``) with i.i.d. standard normal entries.
4. The perturbed basis ``Qt_j`` is ``(I + nu*Theta_j) @ Q_j`` with columns
   rescaled to unit length; the class block is
   ``X_j = Qt_j @ xi_j + sqrt(sigma_sq/d_x) * tau_j``.

Small ``nu`` gives highly coherent subspaces, large ``nu`` incoherent ones.
Everything is deterministic given the config seed: the PCG64 streams come
from ``SeedSequence(seed).spawn(2 + 3k)`` with child 0 feeding ``Q``, child 1
the column selections (in class order) and children ``2+3j .. 4+3j`` feeding
``Theta_j``, ``xi_j``, ``tau_j``.
"""

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InvalidConfig, InvalidInput, ParseError
from .matio import config_hash, read_json, read_matrix_csv, write_json, write_matrix_csv
from .ratereduction import ClassPartition

__all__ = ["GenerationConfig", "LabeledDataset", "generate", "save_dataset", "load_dataset"]

_MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class GenerationConfig:
    n_per_class: tuple
    d_x: int
    subspace_dims: tuple
    nu: float = 0.0
    sigma_sq: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_per_class", tuple(int(n) for n in self.n_per_class))
        object.__setattr__(self, "subspace_dims", tuple(int(d) for d in self.subspace_dims))
        object.__setattr__(self, "d_x", int(self.d_x))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "sigma_sq", float(self.sigma_sq))
        object.__setattr__(self, "seed", int(self.seed))
        if len(self.n_per_class) == 0:
            raise InvalidConfig("n_per_class must be nonempty")
        if len(self.subspace_dims) != len(self.n_per_class):
            raise InvalidConfig(
                f"subspace_dims has {len(self.subspace_dims)} entries but "
                f"n_per_class has {len(self.n_per_class)}"
            )
        if any(n < 1 for n in self.n_per_class):
            raise InvalidConfig("every class needs n_j >= 1")
        if self.d_x < 1:
            raise InvalidConfig("d_x must be >= 1")
        if any(d < 1 for d in self.subspace_dims):
            raise InvalidConfig("every subspace dimension must be >= 1")
        if max(self.subspace_dims) > self.d_x:
            raise InvalidConfig(
                f"subspace dimension {max(self.subspace_dims)} exceeds ambient dimension {self.d_x}"
            )
        if not math.isfinite(self.nu) or self.nu < 0:
            raise InvalidConfig("nu must be a nonnegative real")
        if not math.isfinite(self.sigma_sq) or self.sigma_sq < 0:
            raise InvalidConfig("sigma_sq must be a nonnegative real")
        if not 0 <= self.seed <= _MAX_SEED:
            raise InvalidConfig("seed must fit in an unsigned 64-bit integer")

    @property
    def k(self) -> int:
        return len(self.n_per_class)

    @property
    def n(self) -> int:
        return sum(self.n_per_class)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_per_class"] = list(self.n_per_class)
        d["subspace_dims"] = list(self.subspace_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        return cls(**d)


@dataclass
class LabeledDataset:
    """Data matrix (columns sorted by class), partition and ground-truth bases."""

    X: np.ndarray
    partition: ClassPartition
    bases: list
    config: GenerationConfig

    @property
    def d_x(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def k(self) -> int:
        return self.partition.k

    def class_block(self, j: int) -> np.ndarray:
        return self.X[:, self.partition.indices(j)]

    def class_blocks(self) -> list:
        return [self.class_block(j) for j in range(self.k)]

    def take_columns(self, indices) -> "LabeledDataset":
        """Column-subset view (class-sorted indices expected); bases/config shared."""
        indices = np.asarray(indices, dtype=np.int64)
        part = ClassPartition(self.partition.labels[indices], self.partition.k)
        return LabeledDataset(self.X[:, indices], part, self.bases, self.config)


def generate(cfg: GenerationConfig) -> LabeledDataset:
    """Draw a union-of-subspaces dataset; deterministic given ``cfg.seed``."""
    k = cfg.k
    d_x = cfg.d_x
    d_max = max(cfg.subspace_dims)
    streams = np.random.SeedSequence(cfg.seed).spawn(2 + 3 * k)
    rng_q = np.random.default_rng(streams[0])
    rng_sel = np.random.default_rng(streams[1])
    Q, _ = np.linalg.qr(rng_q.standard_normal((d_x, d_max)))
    blocks = []
    bases = []
    for j in range(k):
        dsj = cfg.subspace_dims[j]
        nj = cfg.n_per_class[j]
        cols = rng_sel.choice(d_max, size=dsj, replace=False)
        Qj = Q[:, cols]
        rng_theta = np.random.default_rng(streams[2 + 3 * j])
        rng_xi = np.random.default_rng(streams[3 + 3 * j])
        rng_tau = np.random.default_rng(streams[4 + 3 * j])
        Qt = Qj + cfg.nu * (rng_theta.standard_normal((d_x, d_x)) @ Qj)
        norms = np.linalg.norm(Qt, axis=0)
        if np.any(norms == 0.0):
            raise InvalidInput(f"class {j}: degenerate perturbed basis column (zero norm)")
        Qt = Qt / norms
        Xj = Qt @ rng_xi.standard_normal((dsj, nj))
        if cfg.sigma_sq > 0:
            Xj = Xj + math.sqrt(cfg.sigma_sq / d_x) * rng_tau.standard_normal((d_x, nj))
        blocks.append(Xj)
        bases.append(Qt)
    X = np.concatenate(blocks, axis=1)
    partition = ClassPartition.from_counts(cfg.n_per_class)
    return LabeledDataset(X, partition, bases, cfg)


def save_dataset(ds: LabeledDataset, path, config_hash_hex: str | None = None, seed: int | None = None):
    """Write ``X`` to ``path`` (matrix CSV) plus a JSON sidecar at ``path`` with suffix .json.

    Round-trip is bit-exact on all matrix entries. Provenance defaults to the
    generation config's own hash and seed.
    """
    from pathlib import Path

    path = Path(path)
    h = config_hash_hex if config_hash_hex is not None else config_hash(ds.config.to_dict())
    s = seed if seed is not None else ds.config.seed
    write_matrix_csv(path, ds.X, config_hash=h, seed=s)
    sidecar = {
        "schema": "v1",
        "config_hash": h,
        "seed": int(s),
        "labels": [int(x) for x in ds.partition.labels],
        "class_counts": [int(x) for x in ds.partition.class_counts],
        "subspace_dims": list(ds.config.subspace_dims),
        "config": ds.config.to_dict(),
        "bases": [b.tolist() for b in ds.bases],
    }
    write_json(path.with_suffix(".json"), sidecar)


def load_dataset(path) -> LabeledDataset:
    """Inverse of :func:`save_dataset`; raises ParseError on malformed files."""
    from pathlib import Path

    path = Path(path)
    X, _ = read_matrix_csv(path)
    side_path = path.with_suffix(".json")
    side = read_json(side_path)
    for key in ("schema", "labels", "class_counts", "config", "bases"):
        if key not in side:
            raise ParseError(f"{side_path}: missing key {key!r}")
    if side["schema"] != "v1":
        raise ParseError(f"{side_path}: unsupported schema {side['schema']!r}")
    try:
        cfg = GenerationConfig.from_dict(side["config"])
    except (InvalidConfig, TypeError) as exc:
        raise ParseError(f"{side_path}: bad config: {exc}") from exc
    labels = np.asarray(side["labels"], dtype=np.int64)
    if labels.size != X.shape[1]:
        raise ParseError(
            f"{side_path}: {labels.size} labels for a matrix with {X.shape[1]} columns"
        )
    if X.shape[0] != cfg.d_x:
        raise ParseError(f"{side_path}: matrix has {X.shape[0]} rows but config.d_x={cfg.d_x}")
    partition = ClassPartition(labels, cfg.k)
    if list(partition.class_counts) != list(side["class_counts"]):
        raise ParseError(f"{side_path}: class_counts disagree with labels")
    if list(partition.class_counts) != list(cfg.n_per_class):
        raise ParseError(f"{side_path}: class_counts disagree with config.n_per_class")
    bases = []
    for j, b in enumerate(side["bases"]):
        B = np.asarray(b, dtype=float)
        if B.ndim != 2 or B.shape != (cfg.d_x, cfg.subspace_dims[j]):
            raise ParseError(
                f"{side_path}: basis {j} has shape {B.shape}, "
                f"expected ({cfg.d_x}, {cfg.subspace_dims[j]})"
            )
        bases.append(B)
    if len(bases) != cfg.k:
        raise ParseError(f"{side_path}: expected {cfg.k} bases, got {len(bases)}")
    return LabeledDataset(X, partition, bases, cfg)
