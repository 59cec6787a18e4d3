"""Evaluation metrics and the Stackelberg-equilibrium verifiers.

The multi-subspace verifier checks, with stored thresholds:

(a) injective encoder: each class block of representations has exactly
    ``d_S_j`` singular values above ``rank_rel_tol * sigma_1``, and the top
    squared singular values sit on one of the two admissible spectral
    branches (all equal to ``n_j/d_S_j``, or a flat top of ``d_S_j - 1``
    values strictly between ``n_j/d_S_j`` and ``n_j/(d_S_j-1)`` with a
    positive last value);
(b) discriminative encoder: normalized cross-class Gram norms below
    ``cross_gram_tol``;
(c) consistent encoding/decoding: per-sample alignment residuals, relative
    to column norms, below ``residual_rel_tol``.

The single-subspace verifier instead checks the encoder is an isometry on the
data subspace (representation spectrum matches the data spectrum, pairwise
distance ratios near one) plus the same consistency residuals. Every report
stores the numeric evidence and thresholds it used, so each pass/fail is
recomputable from the report alone.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .ratereduction import ClassPartition, as_matrix

__all__ = [
    "VerifyThresholds",
    "EquilibriumReport",
    "cosine_heatmap",
    "class_spectra",
    "alignment_residuals",
    "isometry_ratios",
    "dominance_ratios",
    "verify_msp_equilibrium",
    "verify_ssp_equilibrium",
    "report_status",
]


@dataclass(frozen=True)
class VerifyThresholds:
    """Numeric thresholds for the verifiers; ``mode`` is consumed by the CLI.

    mode: "strict" (pass/fail only), "partial" (downgrade strict failures to
    "partial" when per-class spectra stay dominant), or "auto" (partial iff
    the generating config had ambient noise).
    """

    rank_rel_tol: float = 1e-3
    spectral_rel_tol: float = 0.2
    cross_gram_tol: float = 0.05
    residual_rel_tol: float = 0.05
    ssp_spectrum_tol: float = 0.01
    isometry_ratio_tol: float = 0.01
    min_isometry_fraction: float = 0.99
    dominance_ratio_min: float = 3.0
    mode: str = "auto"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyThresholds":
        return cls(**d)


ORACLE_THRESHOLDS = VerifyThresholds(
    rank_rel_tol=1e-3,
    spectral_rel_tol=1e-6,
    cross_gram_tol=1e-6,
    residual_rel_tol=1e-6,
    mode="strict",
)


def cosine_heatmap(Z) -> np.ndarray:
    """Pairwise absolute cosine similarities of the columns of ``Z``.

    Symmetric with entries in [0, 1]; exactly-zero columns score 0 against
    everything, including their own diagonal entry.
    """
    Z = as_matrix(Z)
    norms = np.linalg.norm(Z, axis=0)
    nonzero = norms > 0.0
    N = np.zeros_like(Z)
    N[:, nonzero] = Z[:, nonzero] / norms[nonzero]
    H = np.abs(N.T @ N)
    H = np.clip(0.5 * (H + H.T), 0.0, 1.0)
    np.fill_diagonal(H, np.where(nonzero, 1.0, 0.0))
    return H


def class_spectra(Z, partition: ClassPartition) -> list:
    """Full singular-value vector of each class block, non-increasing."""
    Z = as_matrix(Z)
    partition.check_matches(Z)
    return [np.linalg.svd(Z[:, partition.indices(j)], compute_uv=False) for j in range(partition.k)]


def alignment_residuals(Z, Zhat, partition: ClassPartition, rank_tol: float = 1e-8) -> np.ndarray:
    """Per-sample distance from each column of ``Z`` to the span of its class block of ``Zhat``.

    The span uses the left singular vectors of ``Zhat_j`` with singular value
    above ``rank_tol * sigma_1``; an all-zero block has empty span, so
    residuals equal the column norms.
    """
    Z = as_matrix(Z)
    Zhat = as_matrix(Zhat, "Zhat")
    if Z.shape != Zhat.shape:
        raise ShapeMismatch(f"Z has shape {Z.shape} but Zhat has shape {Zhat.shape}")
    partition.check_matches(Z)
    out = np.zeros(Z.shape[1])
    for j in range(partition.k):
        idx = partition.indices(j)
        Zj = Z[:, idx]
        U, s, _ = np.linalg.svd(Zhat[:, idx], full_matrices=False)
        if s.size and s[0] > 0.0:
            U = U[:, s > rank_tol * s[0]]
            resid = Zj - U @ (U.T @ Zj)
        else:
            resid = Zj
        out[idx] = np.linalg.norm(resid, axis=0)
    return out


def isometry_ratios(X, Z, min_dist: float = 1e-12) -> np.ndarray:
    """Ratios ||z_p - z_q|| / ||x_p - x_q|| over all unordered column pairs.

    Pairs closer than ``min_dist`` in the first argument are skipped.
    """
    X = as_matrix(X, "X")
    Z = as_matrix(Z)
    if X.shape[1] != Z.shape[1]:
        raise ShapeMismatch(f"X has {X.shape[1]} columns but Z has {Z.shape[1]}")
    n = X.shape[1]
    chunks = []
    for i in range(n - 1):
        dx = np.linalg.norm(X[:, i + 1 :] - X[:, i : i + 1], axis=0)
        keep = dx >= min_dist
        if not np.any(keep):
            continue
        dz = np.linalg.norm(Z[:, i + 1 :][:, keep] - Z[:, i : i + 1], axis=0)
        chunks.append(dz / dx[keep])
    return np.concatenate(chunks) if chunks else np.zeros(0)


def dominance_ratios(spectra: list, dims) -> list:
    """Per class, sigma_{d_S_j} / sigma_{d_S_j + 1} (inf when the tail is zero)."""
    out = []
    for s, d in zip(spectra, dims):
        lead = s[d - 1] if d - 1 < s.size else 0.0
        tail = s[d] if d < s.size else 0.0
        if lead == 0.0:
            out.append(0.0)
        elif tail == 0.0:
            out.append(float("inf"))
        else:
            out.append(float(lead / tail))
    return out


@dataclass
class EquilibriumReport:
    """Numeric evidence plus pass/fail for each equilibrium property."""

    game: str
    eps_sq: float
    thresholds: VerifyThresholds
    class_dims: list
    class_counts: list
    spectra: list  # sigma_p(F X_j) per class
    squared_spectra: list
    spectral_targets: list  # n_j / d_S_j per class
    rank_counts: list
    branches: list  # "equal" | "flat_top" | "none" per class (msp)
    cross_gram: list  # normalized k x k, zero diagonal (msp)
    residuals: list
    residuals_rel: list
    max_residual_rel: float
    injective_pass: bool
    discriminative_pass: bool
    consistent_pass: bool
    passed: bool
    isometry: dict | None = None  # ssp only
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = self.thresholds.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EquilibriumReport":
        d = dict(d)
        d["thresholds"] = VerifyThresholds.from_dict(d["thresholds"])
        return cls(**d)


def _rank_count(s: np.ndarray, rel_tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def _spectral_branch(s: np.ndarray, dsj: int, nj: int, rank_count: int, rel_tol: float) -> str:
    """Classify against the two admissible top-spectrum shapes (squared values)."""
    target = nj / dsj
    if dsj > s.size:
        return "none"
    top2 = s[:dsj] ** 2
    if np.all(np.abs(top2 - target) <= rel_tol * target):
        return "equal"
    # flat top of d_S_j - 1 equal values inside (n_j/d_S_j, n_j/(d_S_j - 1)), last value positive
    if rank_count < dsj:
        return "none"
    if dsj == 1:
        return "flat_top"  # no flat part to test; positivity came from the rank count
    flat = top2[: dsj - 1]
    mean = float(np.mean(flat))
    if np.any(np.abs(flat - mean) > rel_tol * mean):
        return "none"
    hi = nj / (dsj - 1)
    if target * (1.0 - rel_tol) < mean < hi * (1.0 + rel_tol):
        return "flat_top"
    return "none"


def _normalized_cross_gram(blocks: list) -> np.ndarray:
    k = len(blocks)
    out = np.zeros((k, k))
    fro = [float(np.linalg.norm(B)) for B in blocks]
    for j in range(k):
        for l in range(j + 1, k):
            num = float(np.linalg.norm(blocks[j].T @ blocks[l]))
            denom = fro[j] * fro[l]
            val = 0.0 if num == 0.0 else (num / denom if denom > 0.0 else float("inf"))
            out[j, l] = out[l, j] = val
    return out


def _relative_residuals(Z, resid) -> np.ndarray:
    norms = np.linalg.norm(Z, axis=0)
    rel = np.zeros_like(resid)
    pos = norms > 0.0
    rel[pos] = resid[pos] / norms[pos]
    return rel


def verify_msp_equilibrium(F, G, ds, eps_sq: float = 1.0, thresholds: VerifyThresholds | None = None) -> EquilibriumReport:
    """Check a trained or oracle pair against the multi-subspace equilibrium properties."""
    th = thresholds if thresholds is not None else VerifyThresholds()
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    Z = F @ ds.X
    Zhat = F @ (G @ Z)
    dims = list(ds.config.subspace_dims)
    counts = [int(c) for c in ds.partition.class_counts]
    spectra = class_spectra(Z, ds.partition)
    rep_blocks = [Z[:, ds.partition.indices(j)] for j in range(ds.k)]

    rank_counts = [_rank_count(s, th.rank_rel_tol) for s in spectra]
    branches = [
        _spectral_branch(s, d, c, r, th.spectral_rel_tol)
        for s, d, c, r in zip(spectra, dims, counts, rank_counts)
    ]
    injective = all(r == d for r, d in zip(rank_counts, dims)) and all(b != "none" for b in branches)

    cross = _normalized_cross_gram(rep_blocks)
    discriminative = bool(np.all(cross[np.triu_indices(ds.k, k=1)] < th.cross_gram_tol)) if ds.k > 1 else True

    resid = alignment_residuals(Z, Zhat, ds.partition, rank_tol=th.rank_rel_tol)
    rel = _relative_residuals(Z, resid)
    max_rel = float(np.max(rel)) if rel.size else 0.0
    consistent = max_rel < th.residual_rel_tol

    return EquilibriumReport(
        game="msp",
        eps_sq=float(eps_sq),
        thresholds=th,
        class_dims=dims,
        class_counts=counts,
        spectra=[s.tolist() for s in spectra],
        squared_spectra=[(s**2).tolist() for s in spectra],
        spectral_targets=[c / d for c, d in zip(counts, dims)],
        rank_counts=rank_counts,
        branches=branches,
        cross_gram=cross.tolist(),
        residuals=resid.tolist(),
        residuals_rel=rel.tolist(),
        max_residual_rel=max_rel,
        injective_pass=bool(injective),
        discriminative_pass=bool(discriminative),
        consistent_pass=bool(consistent),
        passed=bool(injective and discriminative and consistent),
        extras={"dominance_ratios": dominance_ratios(spectra, dims)},
    )


def verify_ssp_equilibrium(F, G, ds, eps_sq: float = 1.0, thresholds: VerifyThresholds | None = None) -> EquilibriumReport:
    """Check a pair against the single-subspace equilibrium properties (k = 1 datasets)."""
    th = thresholds if thresholds is not None else VerifyThresholds()
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    Z = F @ ds.X
    Zhat = F @ (G @ Z)
    d_s = int(ds.config.subspace_dims[0])
    n = ds.n

    s_data = np.linalg.svd(ds.X, compute_uv=False)
    spectra = class_spectra(Z, ds.partition)
    s_rep = spectra[0]
    rank_count = _rank_count(s_rep, th.rank_rel_tol)
    m = min(d_s, s_rep.size, s_data.size)
    ratios_spec = s_rep[:m] / s_data[:m]
    spectrum_ok = bool(m == d_s and np.all(np.abs(ratios_spec - 1.0) <= th.ssp_spectrum_tol))
    injective = spectrum_ok and rank_count == d_s

    ratios = isometry_ratios(ds.X, Z)
    in_band = float(np.mean(np.abs(ratios - 1.0) <= th.isometry_ratio_tol)) if ratios.size else 1.0
    isometry_ok = in_band >= th.min_isometry_fraction

    resid = alignment_residuals(Z, Zhat, ds.partition, rank_tol=th.rank_rel_tol)
    rel = _relative_residuals(Z, resid)
    max_rel = float(np.max(rel)) if rel.size else 0.0
    consistent = max_rel < th.residual_rel_tol

    return EquilibriumReport(
        game="ssp",
        eps_sq=float(eps_sq),
        thresholds=th,
        class_dims=[d_s],
        class_counts=[n],
        spectra=[s.tolist() for s in spectra],
        squared_spectra=[(s**2).tolist() for s in spectra],
        spectral_targets=[float("nan")],
        rank_counts=[rank_count],
        branches=["isometry" if spectrum_ok else "none"],
        cross_gram=[[0.0]],
        residuals=resid.tolist(),
        residuals_rel=rel.tolist(),
        max_residual_rel=max_rel,
        injective_pass=bool(injective and isometry_ok),
        discriminative_pass=True,
        consistent_pass=bool(consistent),
        passed=bool(injective and isometry_ok and consistent),
        isometry={
            "spectrum_ratios": ratios_spec.tolist(),
            "fraction_in_band": in_band,
            "band_tol": th.isometry_ratio_tol,
            "n_pairs": int(ratios.size),
        },
    )


def report_status(report: EquilibriumReport, partial_eligible: bool) -> str:
    """Fold a report into "pass" / "partial" / "fail".

    "partial" applies only when ``partial_eligible`` (noisy data under "auto"
    mode, or mode "partial") and every class keeps its d_S_j dominant
    singular values.
    """
    if report.passed:
        return "pass"
    if partial_eligible:
        ratios = report.extras.get("dominance_ratios")
        if ratios is None:
            spectra = [np.asarray(s) for s in report.spectra]
            ratios = dominance_ratios(spectra, report.class_dims)
        if all(r > report.thresholds.dominance_ratio_min for r in ratios):
            return "partial"
    return "fail"
