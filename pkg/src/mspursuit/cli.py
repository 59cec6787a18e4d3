"""Config-driven experiment runner.

Subcommands: ``generate``, ``train``, ``verify``, ``report``, ``all``. A single
declarative JSON config (schema "v1") drives every stage; CLI flags override
file keys. Exit codes: 0 run passed (or "partial" on noise-eligible runs),
1 verification failure, 2 config error, 3 runtime error.

Every emitted artifact names the hash of the resolved config and the master
seed that produced it, and re-running any subcommand with identical config
and inputs rewrites byte-identical files.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import games, metrics, svg
from .data import GenerationConfig, generate, load_dataset, save_dataset
from .errors import InvalidConfig, ParseError, PursuitError
from .games import GameSpec
from .matio import config_hash, format_float, write_json, read_json
from .metrics import VerifyThresholds, report_status
from .training import TrainConfig, gdmax_train

EXIT_PASS = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_GAME_KEYS = {"kind", "d_x", "d_z", "eps_sq"}
_TOP_KEYS = {"schema", "output_dir", "generation", "game", "train", "thresholds"}
_GENERATION_KEYS = {"n_per_class", "d_x", "subspace_dims", "nu", "sigma_sq", "seed"}
_TRAIN_KEYS = {
    "outer_epochs",
    "lr_encoder",
    "lr_decoder",
    "inner_iters",
    "batch_size",
    "seed",
    "optimizer",
    "adam_betas",
    "adam_eps",
}
_THRESHOLD_KEYS = {
    "rank_rel_tol",
    "spectral_rel_tol",
    "cross_gram_tol",
    "residual_rel_tol",
    "ssp_spectrum_tol",
    "isometry_ratio_tol",
    "min_isometry_fraction",
    "dominance_ratio_min",
    "mode",
}


@dataclass
class ExperimentConfig:
    generation: GenerationConfig
    game_kind: str
    d_z: int
    eps_sq: float
    train: TrainConfig
    thresholds: VerifyThresholds
    output_dir: Path
    hash: str
    seed: int

    def game_spec(self) -> GameSpec:
        return GameSpec(self.game_kind, self.generation.d_x, self.d_z, self.eps_sq)


def _reject_unknown(section: dict, allowed: set, where: str):
    for key in section:
        if key not in allowed:
            raise InvalidConfig(f"{where}.{key}: unknown key")


def load_experiment_config(path, output_dir=None, seed=None) -> ExperimentConfig:
    """Parse and validate a config file, applying flag overrides."""
    raw = read_json(path)
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{path}: config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if raw.get("schema", "v1") != "v1":
        raise InvalidConfig(f"config.schema: unsupported value {raw.get('schema')!r}")
    for required in ("generation", "game"):
        if required not in raw:
            raise InvalidConfig(f"config.{required}: missing required section")

    gen_raw = dict(raw["generation"])
    _reject_unknown(gen_raw, _GENERATION_KEYS, "generation")
    game_raw = dict(raw["game"])
    _reject_unknown(game_raw, _GAME_KEYS, "game")
    train_raw = dict(raw.get("train", {}))
    _reject_unknown(train_raw, _TRAIN_KEYS, "train")
    th_raw = dict(raw.get("thresholds", {}))
    _reject_unknown(th_raw, _THRESHOLD_KEYS, "thresholds")

    if seed is not None:
        gen_raw["seed"] = int(seed)
        train_raw["seed"] = int(seed)
    try:
        generation = GenerationConfig.from_dict(gen_raw)
    except (InvalidConfig, TypeError) as exc:
        raise InvalidConfig(f"generation: {exc}") from exc
    if "d_x" in game_raw and int(game_raw["d_x"]) != generation.d_x:
        raise InvalidConfig(
            f"game.d_x: {game_raw['d_x']} disagrees with generation.d_x = {generation.d_x}"
        )
    if "kind" not in game_raw or "d_z" not in game_raw:
        raise InvalidConfig("game: needs at least 'kind' and 'd_z'")
    try:
        train = TrainConfig.from_dict(train_raw)
    except (InvalidConfig, TypeError) as exc:
        raise InvalidConfig(f"train: {exc}") from exc
    try:
        thresholds = VerifyThresholds.from_dict(th_raw)
    except TypeError as exc:
        raise InvalidConfig(f"thresholds: {exc}") from exc
    if thresholds.mode not in ("auto", "strict", "partial"):
        raise InvalidConfig(f"thresholds.mode: must be auto/strict/partial, got {thresholds.mode!r}")

    out = Path(output_dir) if output_dir is not None else Path(raw.get("output_dir", "out"))
    resolved = {
        "schema": "v1",
        "generation": generation.to_dict(),
        "game": {
            "kind": str(game_raw["kind"]).lower(),
            "d_x": generation.d_x,
            "d_z": int(game_raw["d_z"]),
            "eps_sq": float(game_raw.get("eps_sq", 1.0)),
        },
        "train": train.to_dict(),
        "thresholds": thresholds.to_dict(),
    }
    cfg = ExperimentConfig(
        generation=generation,
        game_kind=resolved["game"]["kind"],
        d_z=resolved["game"]["d_z"],
        eps_sq=resolved["game"]["eps_sq"],
        train=train,
        thresholds=thresholds,
        output_dir=out,
        hash=config_hash(resolved),
        seed=generation.seed,
    )
    cfg.game_spec()  # validates kind/dims/eps early
    return cfg


def _say(msg: str):
    print(msg)


def _map_meta(cfg: ExperimentConfig, role: str) -> dict:
    return {
        "role": role,
        "kind": cfg.game_kind,
        "d_x": cfg.generation.d_x,
        "d_z": cfg.d_z,
        "eps_sq": cfg.eps_sq,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
    }


def cmd_generate(cfg: ExperimentConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    ds = generate(cfg.generation)
    save_dataset(ds, cfg.output_dir / "dataset.csv", config_hash_hex=cfg.hash, seed=cfg.seed)
    _say(f"wrote {cfg.output_dir / 'dataset.csv'} ({ds.d_x}x{ds.n}, k={ds.k})")
    return EXIT_PASS


def _load_run_inputs(cfg: ExperimentConfig, need_maps: bool):
    ds = load_dataset(cfg.output_dir / "dataset.csv")
    spec = cfg.game_spec()
    if not need_maps:
        return ds, spec, None, None
    F, _ = games.load_linear_map(cfg.output_dir / "encoder.csv")
    G, _ = games.load_linear_map(cfg.output_dir / "decoder.csv")
    return ds, spec, F, G


def cmd_train(cfg: ExperimentConfig) -> int:
    ds, spec, _, _ = _load_run_inputs(cfg, need_maps=False)
    F, G, history = gdmax_train(spec, ds, cfg.train)
    games.save_linear_map(cfg.output_dir / "encoder.csv", F, _map_meta(cfg, "encoder"))
    games.save_linear_map(cfg.output_dir / "decoder.csv", G, _map_meta(cfg, "decoder"))
    history.save_csv(cfg.output_dir / "history.csv", config_hash=cfg.hash, seed=cfg.seed)
    _say(
        f"trained {spec.kind} for {len(history)} outer steps; final u_enc="
        f"{history.enc_utility[-1]:.6f} u_dec={history.dec_utility[-1]:.3e}"
    )
    return EXIT_PASS


def _partial_eligible(cfg: ExperimentConfig) -> bool:
    if cfg.thresholds.mode == "partial":
        return True
    return cfg.thresholds.mode == "auto" and cfg.generation.sigma_sq > 0


def cmd_verify(cfg: ExperimentConfig) -> int:
    ds, spec, F, G = _load_run_inputs(cfg, need_maps=True)
    if spec.kind == games.MSP:
        report = metrics.verify_msp_equilibrium(F, G, ds, spec.eps_sq, cfg.thresholds)
    else:
        report = metrics.verify_ssp_equilibrium(F, G, ds, spec.eps_sq, cfg.thresholds)
    status = report_status(report, _partial_eligible(cfg))
    payload = {
        "schema": "v1",
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "status": status,
        "mode": cfg.thresholds.mode,
        "report": report.to_dict(),
    }
    write_json(cfg.output_dir / "metrics.json", payload)
    _say(f"verification: {status} (metrics.json written)")
    return EXIT_PASS if status in ("pass", "partial") else EXIT_VERIFY_FAIL


def _write_report_matrix(path, M, cfg: ExperimentConfig):
    rows, cols = M.shape
    lines = [f"# config_hash={cfg.hash} seed={cfg.seed}", f"v1,{rows},{cols}"]
    for r in range(rows):
        lines.append(",".join(format(x, ".6g") for x in M[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_table(path, header: str, rows, cfg: ExperimentConfig):
    lines = [f"# config_hash={cfg.hash} seed={cfg.seed}", header]
    lines.extend(rows)
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_report(cfg: ExperimentConfig) -> int:
    ds, spec, F, G = _load_run_inputs(cfg, need_maps=True)
    out = cfg.output_dir
    Z = F @ ds.X
    Zhat = F @ (G @ Z)

    heat_x = metrics.cosine_heatmap(ds.X)
    heat_z = metrics.cosine_heatmap(Z)
    _write_report_matrix(out / "heatmap_data.csv", heat_x, cfg)
    _write_report_matrix(out / "heatmap_repr.csv", heat_z, cfg)
    (out / "heatmap_data.svg").write_text(
        svg.heatmap_svg(heat_x, "data |cos| heatmap", cfg.hash, cfg.seed)
    )
    (out / "heatmap_repr.svg").write_text(
        svg.heatmap_svg(heat_z, "representation |cos| heatmap", cfg.hash, cfg.seed)
    )

    spectra = metrics.class_spectra(Z, ds.partition)
    rows = []
    for j, s in enumerate(spectra):
        for p, v in enumerate(s):
            rows.append(f"{j},{p},{format_float(v)}")
    _write_table(out / "class_spectra.csv", "class,index,singular_value", rows, cfg)
    (out / "class_spectra.svg").write_text(
        svg.spectra_svg(spectra, "representation class spectra", cfg.hash, cfg.seed)
    )

    resid = metrics.alignment_residuals(Z, Zhat, ds.partition, rank_tol=cfg.thresholds.rank_rel_tol)
    norms = np.linalg.norm(Z, axis=0)
    rows = []
    for i in range(ds.n):
        rel = resid[i] / norms[i] if norms[i] > 0 else 0.0
        rows.append(
            f"{i},{int(ds.partition.labels[i])},{format_float(resid[i])},"
            f"{format_float(norms[i])},{format_float(rel)}"
        )
    _write_table(
        out / "alignment_residuals.csv", "sample,class,residual,column_norm,relative", rows, cfg
    )
    (out / "alignment_residuals.svg").write_text(
        svg.histogram_svg(resid, "alignment residuals", config_hash=cfg.hash, seed=cfg.seed)
    )

    if spec.kind == games.SSP:
        ratios = metrics.isometry_ratios(ds.X, Z)
        _write_table(
            out / "isometry_ratios.csv", "ratio", [format_float(v) for v in ratios], cfg
        )
        (out / "isometry_ratios.svg").write_text(
            svg.histogram_svg(ratios, "isometry ratios", config_hash=cfg.hash, seed=cfg.seed)
        )
    _say(f"report written under {out}")
    return EXIT_PASS


def cmd_all(cfg: ExperimentConfig) -> int:
    rc = cmd_generate(cfg)
    if rc != EXIT_PASS:
        return rc
    rc = cmd_train(cfg)
    if rc != EXIT_PASS:
        return rc
    verdict = cmd_verify(cfg)
    cmd_report(cfg)
    return verdict


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "verify": cmd_verify,
    "report": cmd_report,
    "all": cmd_all,
}


def _run_single(args) -> int:
    cfg = load_experiment_config(args.config, output_dir=args.output_dir, seed=args.seed)
    return _COMMANDS[args.command](cfg)


def _run_fanout(args) -> int:
    seeds = [int(s) for s in str(args.seeds).split(",") if s.strip() != ""]
    if not seeds:
        raise InvalidConfig("--seeds: empty seed list")
    base = load_experiment_config(args.config, output_dir=args.output_dir)

    def one(seed: int) -> int:
        cfg = load_experiment_config(
            args.config, output_dir=base.output_dir / f"seed_{seed}", seed=seed
        )
        return _COMMANDS[args.command](cfg)

    workers = max(1, int(args.threads))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(one, seeds))
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mspursuit",
        description="Generate, train, verify and report subspace-pursuit experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="path to the experiment config (JSON, schema v1)")
        p.add_argument("--seed", type=int, default=None, help="override generation and training seeds")
        p.add_argument("--output-dir", default=None, help="override the config's output_dir")
        p.add_argument("--threads", type=int, default=1, help="parallel workers for --seeds fan-out")
        p.add_argument(
            "--seeds",
            default=None,
            help="comma-separated seed list; fans out one isolated run per seed under output_dir/seed_<s>",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seeds is not None:
            return _run_fanout(args)
        return _run_single(args)
    except (InvalidConfig,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        # config files vs artifact files: both parse errors carry their path
        msg = str(exc)
        print(f"parse error: {msg}", file=sys.stderr)
        return EXIT_CONFIG if str(args.config) in msg else EXIT_RUNTIME
    except PursuitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
