"""Stochastic projected GDMax training for the sequential games.

One outer iteration is: a single encoder ascent step on a class-stratified
minibatch, an exact Euclidean projection of the encoder onto its constraint
set, then a full inner solve of the decoder's problem (``inner_iters`` ascent
steps on the full batch, early-stopped when the gradient norm falls below
1e-8). An epoch is ceil(n / batch_size) outer iterations. The decoder starts
at the pseudoinverse of the initial encoder, i.e. at its exact best response.

Everything is deterministic given the config seed; the run aborts with
``Diverged`` (carrying the last finite iterate) if any utility goes
non-finite.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import games
from .errors import Diverged, InvalidConfig
from .matio import format_float

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "AdamState",
    "adam_step",
    "inner_decoder_solve",
    "gdmax_train",
]

ADAM = "adam"
PLAIN_GD = "gd"

_INNER_GRAD_STOP = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    outer_epochs: int = 2
    lr_encoder: float = 1e-2
    lr_decoder: float = 1e-3
    inner_iters: int = 1000
    batch_size: int = 50
    seed: int = 0
    optimizer: str = ADAM
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "adam_betas", (float(self.adam_betas[0]), float(self.adam_betas[1])))
        if self.outer_epochs < 1:
            raise InvalidConfig("outer_epochs must be >= 1")
        if self.lr_encoder <= 0 or self.lr_decoder <= 0:
            raise InvalidConfig("learning rates must be positive")
        if self.inner_iters < 1:
            raise InvalidConfig("inner_iters must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must fit in an unsigned 64-bit integer")
        if self.optimizer not in (ADAM, PLAIN_GD):
            raise InvalidConfig(f"optimizer must be '{ADAM}' or '{PLAIN_GD}'")
        if not (0 <= self.adam_betas[0] < 1 and 0 <= self.adam_betas[1] < 1):
            raise InvalidConfig("adam_betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise InvalidConfig("adam_eps must be positive")

    def to_dict(self) -> dict:
        return {
            "outer_epochs": self.outer_epochs,
            "lr_encoder": self.lr_encoder,
            "lr_decoder": self.lr_decoder,
            "inner_iters": self.inner_iters,
            "batch_size": self.batch_size,
            "seed": int(self.seed),
            "optimizer": self.optimizer,
            "adam_betas": list(self.adam_betas),
            "adam_eps": self.adam_eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)


@dataclass
class TrainHistory:
    """Per outer step diagnostics; timestamps stay in memory only (CSV output is reproducible)."""

    step: list = field(default_factory=list)
    epoch: list = field(default_factory=list)
    enc_utility: list = field(default_factory=list)
    dec_utility: list = field(default_factory=list)
    worst_violation: list = field(default_factory=list)
    enc_grad_norm: list = field(default_factory=list)
    dec_grad_norm: list = field(default_factory=list)
    timestamps: list = field(default_factory=list)

    CSV_COLUMNS = ("step", "epoch", "enc_utility", "dec_utility", "worst_violation", "enc_grad_norm", "dec_grad_norm")

    def append(self, step, epoch, enc_u, dec_u, violation, enc_gn, dec_gn):
        self.step.append(int(step))
        self.epoch.append(int(epoch))
        self.enc_utility.append(float(enc_u))
        self.dec_utility.append(float(dec_u))
        self.worst_violation.append(float(violation))
        self.enc_grad_norm.append(float(enc_gn))
        self.dec_grad_norm.append(float(dec_gn))
        self.timestamps.append(time.time())

    def __len__(self):
        return len(self.step)

    def numeric_rows(self) -> list:
        rows = []
        for i in range(len(self)):
            rows.append(
                (
                    self.step[i],
                    self.epoch[i],
                    self.enc_utility[i],
                    self.dec_utility[i],
                    self.worst_violation[i],
                    self.enc_grad_norm[i],
                    self.dec_grad_norm[i],
                )
            )
        return rows

    def save_csv(self, path, config_hash: str = "", seed: int = 0):
        lines = [f"# config_hash={config_hash} seed={int(seed)}", ",".join(self.CSV_COLUMNS)]
        for row in self.numeric_rows():
            lines.append(",".join([str(row[0]), str(row[1])] + [format_float(v) for v in row[2:]]))
        from pathlib import Path

        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, M) -> "AdamState":
        return cls(np.zeros_like(M), np.zeros_like(M), 0)


def adam_step(state: AdamState, grad, lr, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam recursion; returns ``(new_state, update)``.

    The update is meant to be added to the parameter (ascent on ``grad``).
    """
    if state.m.shape != grad.shape:
        raise InvalidConfig(f"optimizer state shape {state.m.shape} does not match gradient {grad.shape}")
    b1, b2 = betas
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * (grad * grad)
    mhat = m / (1.0 - b1**t)
    vhat = v / (1.0 - b2**t)
    update = lr * mhat / (np.sqrt(vhat) + eps)
    return AdamState(m, v, t), update


def plain_gd_step(grad, lr):
    return lr * grad


class _DecoderProblem:
    """Full-batch decoder objective with per-outer-step precomputation.

    The encoder is frozen during an inner solve, so the representation blocks
    ``A_j = F @ X_j`` and their Grams are computed once. Gradients here agree
    with :func:`games.decoder_gradient` to rounding.
    """

    def __init__(self, spec, F, ds):
        self.spec = spec
        self.F = F
        self.d_z = spec.d_z
        blocks = ds.class_blocks() if spec.kind == games.MSP else [ds.X]
        self.A = [F @ Xj for Xj in blocks]
        self.S = [A @ A.T for A in self.A]
        self.alpha = [self.d_z / (A.shape[1] * spec.eps_sq) for A in self.A]
        self.eye = np.eye(self.d_z)

    def grad(self, G) -> np.ndarray:
        """Gradient of the decoder utility (ascent direction)."""
        H = self.F @ G
        g = np.zeros((self.spec.d_x, self.d_z))
        for A, S, alpha in zip(self.A, self.S, self.alpha):
            B = H @ A
            SB = B @ B.T
            half = 0.5 * alpha
            D2 = half * np.linalg.solve(self.eye + half * (S + SB), B) - half * np.linalg.solve(
                self.eye + alpha * SB, B
            )
            g -= self.F.T @ (D2 @ A.T)
        return g

    def utility(self, G) -> float:
        H = self.F @ G
        total = 0.0
        for A, S, alpha in zip(self.A, self.S, self.alpha):
            B = H @ A
            SB = B @ B.T
            half = 0.5 * alpha
            r_cat = 0.5 * float(np.sum(np.log1p(half * np.clip(np.linalg.eigvalsh(S + SB), 0.0, None))))
            r_a = 0.5 * float(np.sum(np.log1p(alpha * np.clip(np.linalg.eigvalsh(S), 0.0, None))))
            r_b = 0.5 * float(np.sum(np.log1p(alpha * np.clip(np.linalg.eigvalsh(SB), 0.0, None))))
            total -= r_cat - 0.5 * r_a - 0.5 * r_b
        return total


def inner_decoder_solve(spec, F, dec0, ds, cfg: TrainConfig) -> np.ndarray:
    """Solve the follower's problem from a warm start.

    Runs up to ``cfg.inner_iters`` full-batch ascent steps on the decoder
    utility, stopping early once the full-batch gradient norm drops below
    1e-8; returns whichever of the entry and exit iterates has the larger
    utility, so the inner solve never loses ground.
    """
    prob = _DecoderProblem(spec, F, ds)
    G = np.array(dec0, dtype=float, copy=True)
    state = AdamState.zeros_like(G)
    for _ in range(cfg.inner_iters):
        grad = prob.grad(G)
        if float(np.linalg.norm(grad)) < _INNER_GRAD_STOP:
            break
        if cfg.optimizer == ADAM:
            state, update = adam_step(state, grad, cfg.lr_decoder, cfg.adam_betas, cfg.adam_eps)
        else:
            update = plain_gd_step(grad, cfg.lr_decoder)
        G = G + update
        if not np.all(np.isfinite(G)):
            raise Diverged("decoder iterate became non-finite", decoder=np.asarray(dec0, dtype=float))
    if prob.utility(G) < prob.utility(np.asarray(dec0, dtype=float)):
        return np.array(dec0, dtype=float, copy=True)
    return G


def _stratified_batch(ds, batch_size: int, rng) -> np.ndarray:
    """Class-sorted column indices with ceil(b*n_j/n) samples per class."""
    n = ds.n
    picks = []
    for j in range(ds.k):
        idx = ds.partition.indices(j)
        m = math.ceil(batch_size * idx.size / n)
        chosen = rng.choice(idx, size=m, replace=False)
        picks.append(np.sort(chosen))
    return np.concatenate(picks)


def _project(spec, F, ds):
    if spec.kind == games.MSP:
        return games.project_encoder_msp(F, ds)
    return games.project_encoder_ssp(F)


def _violation(spec, F, ds) -> float:
    if spec.kind == games.MSP:
        return games.msp_constraint_violation(F, ds)
    side = F @ F.T if spec.d_z <= spec.d_x else F.T @ F
    return float(np.max(np.abs(side - np.eye(side.shape[0]))))


def gdmax_train(spec, ds, cfg: TrainConfig):
    """Train an encoder/decoder pair by stochastic projected GDMax.

    Per outer iteration: one encoder ascent step on a stratified minibatch,
    projection onto the game's encoder class, then an inner decoder solve on
    the full batch. Returns ``(encoder, decoder, history)``.
    """
    spec.bind(ds)
    n = ds.n
    if cfg.batch_size > n:
        raise InvalidConfig(f"batch_size {cfg.batch_size} exceeds sample count {n}")
    init_ss, batch_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    rng_init = np.random.default_rng(init_ss)
    rng_batch = np.random.default_rng(batch_ss)

    F = rng_init.standard_normal((spec.d_z, spec.d_x)) / math.sqrt(spec.d_x)
    F = _project(spec, F, ds)
    G = games.pseudoinverse_decoder(F)
    enc_state = AdamState.zeros_like(F)
    history = TrainHistory()
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    last_good = (F.copy(), G.copy())
    step = 0
    for epoch in range(cfg.outer_epochs):
        for _ in range(steps_per_epoch):
            batch = ds.take_columns(_stratified_batch(ds, cfg.batch_size, rng_batch))
            enc_grad = games.encoder_gradient(spec, F, G, batch)
            if cfg.optimizer == ADAM:
                enc_state, update = adam_step(enc_state, enc_grad, cfg.lr_encoder, cfg.adam_betas, cfg.adam_eps)
            else:
                update = plain_gd_step(enc_grad, cfg.lr_encoder)
            F = F + update
            # an exploding iterate can overflow the constraint quadratic form
            # before any utility goes NaN; both cases are divergence
            if not (np.all(np.isfinite(F)) and math.isfinite(_violation(spec, F, ds))):
                raise Diverged(
                    "encoder iterate became non-finite",
                    encoder=last_good[0],
                    decoder=last_good[1],
                    history=history,
                )
            F = _project(spec, F, ds)
            try:
                G = inner_decoder_solve(spec, F, G, ds, cfg)
            except Diverged as exc:
                raise Diverged(
                    str(exc), encoder=last_good[0], decoder=last_good[1], history=history
                ) from exc
            gap = games.compatibility_gap(spec, F, G, ds)
            enc_u = games.expressiveness(spec, F, ds) + gap
            dec_u = -gap
            if not (math.isfinite(enc_u) and math.isfinite(dec_u)):
                raise Diverged(
                    "utility became non-finite",
                    encoder=last_good[0],
                    decoder=last_good[1],
                    history=history,
                )
            history.append(
                step,
                epoch,
                enc_u,
                dec_u,
                _violation(spec, F, ds),
                float(np.linalg.norm(enc_grad)),
                float(np.linalg.norm(games.decoder_gradient(spec, F, G, ds))),
            )
            last_good = (F.copy(), G.copy())
            step += 1
    return F, G, history
