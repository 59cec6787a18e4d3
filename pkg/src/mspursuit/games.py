"""Sequential encoder/decoder games over linear maps.

Two instantiations of one leader-follower template. The encoder (leader)
maximizes an expressiveness term plus its separation from the closed-loop
reconstruction; the decoder (follower) maximizes compatibility, i.e. minimizes
that separation:

* multi-subspace game (``"msp"``): encoder class is all linear maps ``F``
  with ``||F @ X_j||_F^2 <= n_j`` per class, expressiveness is the classwise
  rate reduction of ``F @ X``;
* single-subspace game (``"ssp"``): encoder class is the semi-orthogonal
  maps, expressiveness is the plain coding rate of ``F @ X``.

In both games the follower's problem is solved exactly by the Moore-Penrose
pseudoinverse of the encoder, which this module exposes as the analytic best
response, together with Euclidean projections onto each encoder class and an
analytic equilibrium construction for the multi-subspace game.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionViolated,
    InvalidConfig,
    InvalidInput,
    ProjectionDidNotConverge,
    RankDeficient,
    ShapeMismatch,
)
from .matio import read_json, read_matrix_csv, write_json, write_matrix_csv
from .ratereduction import (
    as_matrix,
    check_eps_sq,
    coding_rate,
    grad_coding_rate,
    grad_rate_reduction_classwise,
    grad_rate_reduction_pair,
    rate_reduction_classwise,
    rate_reduction_pair,
)

MSP = "msp"
SSP = "ssp"

__all__ = [
    "MSP",
    "SSP",
    "GameSpec",
    "expressiveness",
    "compatibility_gap",
    "encoder_utility",
    "decoder_utility",
    "encoder_gradient",
    "decoder_gradient",
    "pseudoinverse_decoder",
    "project_encoder_msp",
    "project_encoder_ssp",
    "msp_constraint_violation",
    "oracle_msp_encoder",
    "save_linear_map",
    "load_linear_map",
]


@dataclass(frozen=True)
class GameSpec:
    """Which game is being played, its dimensions and its quantization level."""

    kind: str
    d_x: int
    d_z: int
    eps_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        if self.kind not in (MSP, SSP):
            raise InvalidConfig(f"kind must be '{MSP}' or '{SSP}', got {self.kind!r}")
        if int(self.d_x) < 1 or int(self.d_z) < 1:
            raise InvalidConfig("d_x and d_z must be positive")
        object.__setattr__(self, "d_x", int(self.d_x))
        object.__setattr__(self, "d_z", int(self.d_z))
        object.__setattr__(self, "eps_sq", check_eps_sq(self.eps_sq))

    def bind(self, ds):
        """Check the spec against a dataset; the MSP game needs k >= 2, SSP k == 1."""
        if ds.d_x != self.d_x:
            raise ShapeMismatch(f"dataset has d_x={ds.d_x} but spec declares d_x={self.d_x}")
        if self.kind == MSP and ds.k < 2:
            raise AssumptionViolated("multiple classes", f"the msp game needs k >= 2, dataset has k={ds.k}")
        if self.kind == SSP and ds.k != 1:
            raise AssumptionViolated("single class", f"the ssp game needs k == 1, dataset has k={ds.k}")


def _check_encoder(spec: GameSpec, F) -> np.ndarray:
    F = as_matrix(F, "encoder")
    if F.shape != (spec.d_z, spec.d_x):
        raise ShapeMismatch(f"encoder has shape {F.shape}, expected ({spec.d_z}, {spec.d_x})")
    return F


def _check_decoder(spec: GameSpec, G) -> np.ndarray:
    G = as_matrix(G, "decoder")
    if G.shape != (spec.d_x, spec.d_z):
        raise ShapeMismatch(f"decoder has shape {G.shape}, expected ({spec.d_x}, {spec.d_z})")
    return G


def _pair_blocks(spec: GameSpec, ds):
    """Column blocks the closed-loop pair terms run over: classes for msp, all of X for ssp."""
    if spec.kind == MSP:
        return ds.class_blocks()
    return [ds.X]


def expressiveness(spec: GameSpec, F, ds) -> float:
    """The encoder-only utility term: DR(FX | Pi) for msp, R(FX) for ssp."""
    F = _check_encoder(spec, F)
    Z = F @ ds.X
    if spec.kind == MSP:
        return rate_reduction_classwise(Z, ds.partition, spec.eps_sq)
    return coding_rate(Z, spec.eps_sq)


def compatibility_gap(spec: GameSpec, F, G, ds) -> float:
    """Sum of pairwise rate reductions between representations and their closed-loop reconstructions.

    Nonnegative; zero exactly when every block satisfies
    ``(F X_j)(F X_j)^T == (F G F X_j)(F G F X_j)^T``.
    """
    F = _check_encoder(spec, F)
    G = _check_decoder(spec, G)
    total = 0.0
    for Xj in _pair_blocks(spec, ds):
        A = F @ Xj
        B = F @ (G @ A)
        total += rate_reduction_pair(A, B, spec.eps_sq)
    return total


def encoder_utility(spec: GameSpec, F, G, ds) -> float:
    return expressiveness(spec, F, ds) + compatibility_gap(spec, F, G, ds)


def decoder_utility(spec: GameSpec, F, G, ds) -> float:
    """Always <= 0; zero exactly at a best-responding decoder."""
    return -compatibility_gap(spec, F, G, ds)


def encoder_gradient(spec: GameSpec, F, G, ds) -> np.ndarray:
    """Analytic gradient of ``encoder_utility`` in the encoder matrix."""
    F = _check_encoder(spec, F)
    G = _check_decoder(spec, G)
    Z = F @ ds.X
    if spec.kind == MSP:
        D = grad_rate_reduction_classwise(Z, ds.partition, spec.eps_sq)
    else:
        D = grad_coding_rate(Z, spec.eps_sq)
    g = D @ ds.X.T
    FG = F @ G
    for Xj in _pair_blocks(spec, ds):
        A = F @ Xj
        GA = G @ A
        B = F @ GA
        D1, D2 = grad_rate_reduction_pair(A, B, spec.eps_sq)
        # B depends on F twice: dB = dF@(G@A) + (F@G)@dF@Xj
        g += D1 @ Xj.T + D2 @ GA.T + FG.T @ (D2 @ Xj.T)
    return g


def decoder_gradient(spec: GameSpec, F, G, ds) -> np.ndarray:
    """Analytic gradient of ``decoder_utility`` in the decoder matrix."""
    F = _check_encoder(spec, F)
    G = _check_decoder(spec, G)
    g = np.zeros_like(G)
    for Xj in _pair_blocks(spec, ds):
        A = F @ Xj
        B = F @ (G @ A)
        _, D2 = grad_rate_reduction_pair(A, B, spec.eps_sq)
        g -= F.T @ (D2 @ A.T)
    return g


def pseudoinverse_decoder(F) -> np.ndarray:
    """Moore-Penrose pseudoinverse of the encoder; the follower's exact best response.

    Singular values below 1e-12 of the largest are treated as zero.
    """
    F = as_matrix(F, "encoder")
    return np.linalg.pinv(F, rcond=1e-12)


def msp_constraint_violation(F, ds) -> float:
    """Worst relative violation of ``tr(F M_j F^T) <= n_j`` over classes (<= 0 when feasible)."""
    worst = -np.inf
    for j, Xj in enumerate(ds.class_blocks()):
        nj = Xj.shape[1]
        val = float(np.sum((F @ Xj) ** 2))
        worst = max(worst, (val - nj) / nj)
    return worst


def _project_single_ellipsoid(F, mu, V, cap):
    """Euclidean projection of F onto {F: tr(F M F^T) <= cap} given M = V diag(mu) V^T.

    Closed form F' = F (I + lam*M)^{-1} with lam >= 0 from bisection on the
    monotone constraint value; the returned point sits on the feasible side.
    """
    B = F @ V
    w = mu * np.sum(B * B, axis=0)

    def value(lam):
        return float(np.sum(w / (1.0 + lam * mu) ** 2))

    if value(0.0) <= cap:
        return F
    lo, hi = 0.0, 1.0
    for _ in range(300):
        if value(hi) <= cap:
            break
        lo, hi = hi, 2.0 * hi
    else:  # pragma: no cover - cap > 0 guarantees bracketing
        raise ProjectionDidNotConverge("could not bracket the projection multiplier", value(hi) / cap - 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if value(mid) <= cap:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * (1.0 + hi):
            break
    return (B / (1.0 + hi * mu)) @ V.T


def project_encoder_msp(F, ds, tol=1e-10, max_sweeps=100) -> np.ndarray:
    """Euclidean projection of the encoder onto the msp constraint set.

    The set is the intersection over classes of ``{F : tr(F M_j F^T) <= n_j}``
    with ``M_j = X_j @ X_j.T``; Dykstra's alternating projections with the
    exact single-ellipsoid projection above. Raises ProjectionDidNotConverge
    after ``max_sweeps`` sweeps.
    """
    F = as_matrix(F, "encoder")
    blocks = ds.class_blocks()
    caps = [float(Xj.shape[1]) for Xj in blocks]
    eigs = []
    for Xj in blocks:
        mu, V = np.linalg.eigh(Xj @ Xj.T)
        eigs.append((np.clip(mu, 0.0, None), V))
    x = F.copy()
    incs = [np.zeros_like(F) for _ in blocks]
    worst = np.inf
    for _ in range(max_sweeps):
        x_prev = x
        for j, (mu, V) in enumerate(eigs):
            y = _project_single_ellipsoid(x + incs[j], mu, V, caps[j])
            incs[j] = x + incs[j] - y
            x = y
        worst = msp_constraint_violation(x, ds)
        delta = float(np.linalg.norm(x - x_prev))
        if worst <= tol and delta <= 1e-12 * (1.0 + float(np.linalg.norm(x))):
            return x
    raise ProjectionDidNotConverge(f"Dykstra did not converge in {max_sweeps} sweeps", worst)


def project_encoder_ssp(F) -> np.ndarray:
    """Polar factor of the encoder: the nearest semi-orthogonal matrix in Frobenius norm."""
    F = as_matrix(F, "encoder")
    U, s, Vt = np.linalg.svd(F, full_matrices=False)
    if s[0] == 0.0 or s[-1] < 1e-12 * s[0]:
        raise RankDeficient(
            f"encoder is rank deficient (sigma_min/sigma_max = "
            f"{0.0 if s[0] == 0.0 else s[-1] / s[0]:.3e}); polar factor is not well-defined"
        )
    return U @ Vt


def oracle_msp_encoder(ds, d_z: int, rank_rel_tol: float = 1e-8):
    """Analytic Stackelberg-equilibrium candidate for the multi-subspace game.

    Maps each class's left singular subspace onto its own orthonormal
    coordinate block of the representation space, scaled so every nonzero
    singular value of ``F @ X_j`` satisfies ``sigma^2 = n_j / d_S_j``; the
    decoder is the pseudoinverse. Checks the dataset assumptions it needs
    (informative class data, large enough representation space, incoherent
    class data) and raises AssumptionViolated naming the failing one.
    """
    d_z = int(d_z)
    dims = list(ds.config.subspace_dims)
    total_dim = sum(dims)
    if total_dim > min(ds.d_x, d_z):
        raise AssumptionViolated(
            "large enough representation space",
            f"sum of subspace dims {total_dim} exceeds min(d_x, d_z) = {min(ds.d_x, d_z)}",
        )
    U_blocks = []
    C_blocks = []
    for j in range(ds.k):
        Xj = ds.class_block(j)
        dsj = dims[j]
        nj = Xj.shape[1]
        U, s, _ = np.linalg.svd(Xj, full_matrices=False)
        if s[0] == 0.0 or dsj > s.size or s[dsj - 1] <= rank_rel_tol * s[0]:
            raise AssumptionViolated(
                "informative data", f"class {j} has rank < d_S_j = {dsj} at relative tolerance {rank_rel_tol}"
            )
        U_blocks.append(U[:, :dsj])
        C_blocks.append(np.sqrt(nj / dsj) / s[:dsj])
    U = np.concatenate(U_blocks, axis=1)
    s_u = np.linalg.svd(U, compute_uv=False)
    if s_u[-1] <= rank_rel_tol * s_u[0]:
        raise AssumptionViolated(
            "incoherent class data", "concatenated class bases are rank deficient"
        )
    T = np.zeros((d_z, total_dim))
    offset = 0
    for j in range(ds.k):
        dsj = dims[j]
        T[offset : offset + dsj, offset : offset + dsj] = np.diag(C_blocks[j])
        offset += dsj
    F = T @ np.linalg.pinv(U)
    return F, pseudoinverse_decoder(F)


def save_linear_map(path, M, meta: dict):
    """Persist an encoder/decoder matrix as CSV plus a JSON sidecar.

    ``meta`` should carry at least role, game kind, dims and eps_sq; any
    config_hash/seed entries also go into the CSV provenance line.
    """
    from pathlib import Path

    path = Path(path)
    h = str(meta.get("config_hash", ""))
    seed = int(meta.get("seed", 0))
    write_matrix_csv(path, M, config_hash=h, seed=seed)
    side = {"schema": "v1"}
    side.update(meta)
    write_json(path.with_suffix(".json"), side)


def load_linear_map(path):
    """Inverse of :func:`save_linear_map`; returns ``(matrix, sidecar_dict)``."""
    from pathlib import Path

    path = Path(path)
    M, _ = read_matrix_csv(path)
    side = read_json(path.with_suffix(".json"))
    return M, side
