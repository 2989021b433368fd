"""Command-line entry point: ``layerqnn {gen-data,train,trajectory,evaluate,selftest}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .data import generate_dataset, read_dataset, to_input_state, write_dataset
from .model import NetworkConfig, ParamSet
from .mps import evolve_trajectory, build_layer_mpo
from .plotting import line_plot_svg
from .presets import HYPERPARAMS, REDUCED_I, initial_params
from .sampler import estimate_magnetization
from .tensor import NumericalError, SvdTruncation
from .training import (
    PURPOSE_EVALUATE,
    EvalConfig,
    LossConfig,
    NetworkEvaluator,
    OptimizerState,
    TrainConfig,
    UntrainedError,
    centroids,
    classify,
    load_checkpoint,
    train,
)

SCHEMA_VERSION = "layerqnn/1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_THRESHOLD = 0, 1, 2, 3

logger = logging.getLogger("layerqnn")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    dataset: str = "I"
    count: int = 300
    n_train: int = 250
    n_sites: int = 50
    n_steps: int = 10
    dt: float = 0.1
    boundary: str = "open"
    chi_mpo: int = 16
    chi_mps: int = 48
    rel_cutoff: float = 1e-12
    zip_factor: float = 2.0
    shots: int = 5000  # 0 means exact expectations
    margin: float = 0.25
    beta1: float = 0.75
    beta2: float = 0.98
    learning_rate: float = 0.05
    delta: float = 1e-7
    rounds: int = 50
    batch_size: int = 25
    eps: float = 0.1
    noise_mode: str = "fresh"
    checkpoint_every: int = 10
    seed: int = 0
    backend: str = "mpo"
    threads: int = 1

    @classmethod
    def preset(cls, name: str) -> "RunConfig":
        table = {"I": HYPERPARAMS["I"], "II": HYPERPARAMS["II"], "reduced-I": REDUCED_I}
        if name not in table:
            raise UsageError(f"unknown preset {name!r}; choose from {sorted(table)}")
        base = dict(table[name])
        base["dataset"] = "II" if name == "II" else "I"
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in base.items() if k in known})

    def update(self, pairs: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        values = asdict(self)
        for key, raw in pairs.items():
            if key not in types:
                raise UsageError(f"unknown config field {key!r}")
            kind = type(getattr(self, key))
            try:
                values[key] = kind(raw) if not isinstance(raw, kind) else raw
            except (TypeError, ValueError):
                raise UsageError(f"config field {key}: cannot parse {raw!r} as {kind.__name__}") from None
        return RunConfig(**values)

    def validated(self) -> "RunConfig":
        problems = []
        if self.dataset not in ("I", "II"):
            problems.append(f"dataset: must be I or II, got {self.dataset!r}")
        if self.backend not in ("dense", "mpo", "sweep"):
            problems.append(f"backend: must be dense, mpo or sweep, got {self.backend!r}")
        if self.backend == "dense" and self.n_sites > 6:
            problems.append(f"backend: dense requires n_sites <= 6, got {self.n_sites}")
        if self.boundary != "open":
            problems.append("boundary: only 'open' is supported")
        if self.n_sites < 2 or self.n_steps < 1:
            problems.append("n_sites must be >= 2 and n_steps >= 1")
        if not 0 <= self.margin <= 1:
            problems.append(f"margin: must lie in [0, 1], got {self.margin}")
        if self.shots < 0:
            problems.append("shots: must be >= 0 (0 selects exact expectations)")
        if not 0 < self.n_train < self.count:
            problems.append(f"n_train: must satisfy 0 < n_train < count, got {self.n_train}/{self.count}")
        if self.batch_size < 1:
            problems.append(f"batch_size: must be >= 1, got {self.batch_size}")
        if self.noise_mode not in ("fresh", "crn"):
            problems.append(f"noise_mode: must be fresh or crn, got {self.noise_mode!r}")
        if self.eps <= 0 or self.dt <= 0:
            problems.append("eps and dt must be positive")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.zip_factor < 1:
            problems.append(f"zip_factor: must be >= 1, got {self.zip_factor}")
        if problems:
            raise UsageError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    def network(self) -> NetworkConfig:
        return NetworkConfig(self.n_sites, self.n_steps, self.dt, self.boundary)

    def evaluator(self, exact: bool = False) -> NetworkEvaluator:
        tn = EvalConfig(self.chi_mpo, self.chi_mps, self.rel_cutoff, self.backend, self.threads, self.zip_factor)
        shots = None if exact or self.shots == 0 else self.shots
        return NetworkEvaluator(self.network(), LossConfig(self.margin, shots), tn, self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.preset(args.preset) if getattr(args, "preset", None) else RunConfig()
    if getattr(args, "config", None):
        try:
            cfg = cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    flags = {}
    for name in ("seed", "backend", "threads"):
        if getattr(args, name, None) is not None:
            flags[name] = getattr(args, name)
    flags.update(_parse_set(getattr(args, "set", None)))
    return cfg.update(flags).validated()


def _write_json(path: Path, obj):
    path.write_text(json.dumps({"schema": SCHEMA_VERSION, **obj}, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _load_dataset(path):
    try:
        ds = read_dataset(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from None
    if len(ds) == 0:
        raise UsageError(f"dataset {path} is empty")
    return ds


def _load_params(path, cfg: RunConfig | None = None) -> ParamSet:
    if path is None:
        return initial_params(cfg.dataset if cfg else "I")
    try:
        obj = json.loads(Path(path).read_text())
        params = ParamSet.from_json(obj)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read parameters {path}: {exc}") from None
    net = obj.get("network")
    if cfg is not None and net is not None and int(net.get("n_sites", cfg.n_sites)) != cfg.n_sites:
        raise UsageError(f"parameters were trained with n_sites={net['n_sites']}, config has {cfg.n_sites}")
    return params


def _params_json(params: ParamSet, cfg: RunConfig, **extra) -> dict:
    return {**params.to_json(), "network": {"n_sites": cfg.n_sites, "n_steps": cfg.n_steps, "dt": cfg.dt}, **extra}


def cmd_gen_data(args) -> int:
    cfg = resolve_config(args)
    overrides = {k: v for k, v in (("dataset", args.dataset), ("count", args.count), ("n_train", args.n_train)) if v is not None}
    if "count" in overrides and "n_train" not in overrides:
        overrides["n_train"] = max(1, round(overrides["count"] * cfg.n_train / cfg.count))
    cfg = cfg.update(overrides).validated()
    ds = generate_dataset(cfg.dataset, cfg.count, cfg.seed, cfg.n_train)
    path = Path(args.out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(ds, path)
        manifest = {"dataset": cfg.dataset, "seed": cfg.seed, "count": cfg.count,
                    "train": [0, cfg.n_train], "validation": [cfg.n_train, cfg.count]}
        _write_json(path.with_suffix(".split.json"), manifest)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None
    print(f"wrote {cfg.count} samples to {path} ({cfg.n_train} train / {cfg.count - cfg.n_train} validation)")
    return EXIT_OK


def _dataset_for(args, cfg):
    if args.data:
        ds = _load_dataset(args.data)
        n_train = ds.n_train if ds.n_train is not None else cfg.n_train
        return ds.split(n_train)
    return generate_dataset(cfg.dataset, cfg.count, cfg.seed, cfg.n_train)


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args)
    ds = _dataset_for(args, cfg)
    if cfg.batch_size > len(ds.train):
        raise UsageError(f"batch_size: {cfg.batch_size} exceeds the training split ({len(ds.train)} samples)")
    _write_json(out / "config.resolved.json", {"config": asdict(cfg), "data": args.data})
    evaluator = cfg.evaluator()
    init = _load_params(args.init, cfg)
    opt = OptimizerState(cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.delta)
    tcfg = TrainConfig(cfg.rounds, cfg.batch_size, cfg.eps, cfg.seed, cfg.noise_mode, cfg.checkpoint_every)
    resume = None
    if args.resume:
        try:
            resume = load_checkpoint(out / "checkpoints", args.resume)
        except FileNotFoundError as exc:
            raise UsageError(f"no checkpoint for round {args.resume} in {out / 'checkpoints'}") from exc

    def progress(r, tl, vl, _p):
        print(f"round {r:3d}  training {tl:.6f}  validation {vl:.6f}", flush=True)

    history = train(ds, init, evaluator, opt, tcfg, out / "checkpoints", resume, progress)

    with open(out / "loss_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "training_loss", "validation_loss"])
        for row in zip(history.rounds, history.training_loss, history.validation_loss):
            w.writerow(row)
    best = history.best_params
    train_out = evaluator.outputs(best, ds.train, (PURPOSE_EVALUATE, 0, 0))
    a, b = centroids(train_out, [s.label for s in ds.train])
    _write_json(out / "best_params.json", _params_json(best, cfg, best_round=history.best_round))
    _write_json(out / "centroids.json", {"a": a, "b": b, "best_round": history.best_round})
    svg = line_plot_svg(
        [("training", history.rounds, history.training_loss, None), ("validation", history.rounds, history.validation_loss, None)],
        "round", "loss", "contrastive loss",
    )
    (out / "loss.svg").write_text(svg)
    print(f"best round {history.best_round}: validation loss {min(history.validation_loss):.6f}; centroids a={a:.5f} b={b:.5f}")
    return EXIT_OK


def _state_ids(text, n):
    if not text:
        return list(range(n))
    ids = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            ids.extend(range(int(lo), int(hi) + 1))
        else:
            ids.append(int(part))
    if any(i < 0 or i >= n for i in ids):
        raise UsageError(f"state ids must lie in [0, {n})")
    return ids


def cmd_trajectory(args) -> int:
    cfg = resolve_config(args)
    if cfg.backend == "dense":
        raise UsageError("trajectory supports the mpo and sweep backends")
    out = _out_dir(args)
    ds = _dataset_for(args, cfg)
    params = _load_params(args.params, cfg)
    ids = _state_ids(args.states, len(ds))
    net = cfg.network()
    trunc = SvdTruncation(None, cfg.rel_cutoff)
    mpo = build_layer_mpo(params, net, cfg.chi_mpo, trunc) if cfg.backend == "mpo" else None
    rows, series = [], []
    for sid in ids:
        sample = ds.samples[sid]
        traj, _ = evolve_trajectory(to_input_state(sample, cfg.n_sites), params, net, cfg.chi_mpo, cfg.chi_mps,
                                    trunc, cfg.backend, mpo, zip_factor=cfg.zip_factor)
        rows.extend((sid, sample.label, layer, float(mx)) for layer, mx in enumerate(traj))
        series.append((sample.label, list(range(len(traj))), traj, "#1f77b4" if sample.label == "A" else "#d62728"))
    _write_json(out / "config.resolved.json", {"config": asdict(cfg), "data": args.data, "params": args.params})
    with open(out / "trajectories.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state_id", "label", "layer", "mx"])
        w.writerows(rows)
    (out / "trajectories.svg").write_text(line_plot_svg(series, "layer", "m^x", "output magnetization per layer"))
    print(f"wrote {len(ids)} trajectories to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    ds = _dataset_for(args, cfg)
    if not ds.validation:
        raise UsageError("dataset has no validation split to evaluate")
    params = _load_params(args.params, cfg)
    evaluator = cfg.evaluator(exact=args.exact)
    if args.centroids:
        try:
            c = json.loads(Path(args.centroids).read_text())
            cents = (float(c["a"]), float(c["b"]))
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot read centroids {args.centroids}: {exc}") from None
    else:
        if not ds.train:
            raise UsageError("no training split to compute centroids from; pass --centroids")
        cents = centroids(evaluator.outputs(params, ds.train, (PURPOSE_EVALUATE, 0, 0)), [s.label for s in ds.train])
    val = ds.validation
    ids = list(range(len(ds.train), len(ds)))
    values = evaluator.outputs(params, val, (PURPOSE_EVALUATE, 1, 0), ids)
    labels = [s.label for s in val]
    result = classify(values, labels, cents)
    report = {
        "accuracy": result.accuracy,
        "margin": result.margin,
        "centroids": {"a": cents[0], "b": cents[1]},
        "shots": evaluator.loss.shots,
        "states": [
            {"state_id": i, "m_s": float(m), "label": lab, "prediction": str(p)}
            for i, m, lab, p in zip(ids, values, labels, result.predictions)
        ],
    }
    if args.out:
        out = _out_dir(args)
        _write_json(out / "report.json", report)
        _write_json(out / "config.resolved.json", {"config": asdict(cfg), "data": args.data, "params": args.params})
        if args.raw_shots and evaluator.loss.shots:
            _write_raw_shots(out / "shots.csv", cfg, params, val, ids)
    print(json.dumps({k: report[k] for k in ("accuracy", "margin", "centroids")}))
    if args.min_accuracy is not None and result.accuracy < args.min_accuracy:
        print(f"accuracy {result.accuracy:.3f} below threshold {args.min_accuracy}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _write_raw_shots(path, cfg, params, samples, ids):
    net = cfg.network()
    trunc = SvdTruncation(None, cfg.rel_cutoff)
    mpo = build_layer_mpo(params, net, cfg.chi_mpo, trunc)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state_id", "shot", "site", "outcome"])
        for sid, sample in zip(ids, samples):
            _, state = evolve_trajectory(to_input_state(sample, cfg.n_sites), params, net, cfg.chi_mpo, cfg.chi_mps,
                                         trunc, "mpo", mpo, zip_factor=cfg.zip_factor)
            est = estimate_magnetization(state, cfg.shots, cfg.seed, (PURPOSE_EVALUATE, 1, 0, sid), keep_outcomes=True)
            for shot, row in enumerate(est.outcomes):
                w.writerows((sid, shot, site, int(o)) for site, o in enumerate(row))


def cmd_selftest(args) -> int:
    from . import selftest

    failures = selftest.run(print)
    if failures:
        print(f"{failures} self-test check(s) failed", file=sys.stderr)
        return EXIT_THRESHOLD
    print("all self-test checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="layerqnn", description="Layered dissipative quantum network classifier.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_required=True):
        p.add_argument("--preset", choices=["I", "II", "reduced-I"])
        p.add_argument("--config", help="JSON file of config overrides")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
        p.add_argument("--seed", type=int)
        p.add_argument("--backend", choices=["dense", "mpo", "sweep"])
        p.add_argument("--threads", type=int)
        p.add_argument("--out", required=out_required)

    p = sub.add_parser("gen-data", help="write a labelled dataset")
    common(p)
    p.add_argument("--dataset", choices=["I", "II"])
    p.add_argument("--count", type=int)
    p.add_argument("--n-train", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train and write history, checkpoints and best parameters")
    common(p)
    p.add_argument("--data", help="dataset file (generated from the config when omitted)")
    p.add_argument("--init", help="initial ParamSet JSON (preset initial vector when omitted)")
    p.add_argument("--resume", type=int, help="resume from the checkpoint of this round")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("trajectory", help="record per-layer m^x for selected states")
    common(p)
    p.add_argument("--params")
    p.add_argument("--data")
    p.add_argument("--states", help="comma-separated ids or ranges, e.g. 0-9,12")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("evaluate", help="nearest-centroid accuracy on the validation split")
    common(p, out_required=False)
    p.add_argument("--params")
    p.add_argument("--data")
    p.add_argument("--centroids")
    p.add_argument("--exact", action="store_true", help="use exact expectations instead of shots")
    p.add_argument("--raw-shots", action="store_true", help="also write every shot outcome (mpo backend)")
    p.add_argument("--min-accuracy", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftest", help="run the oracle-equivalence and invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UntrainedError as exc:
        print(f"untrained network: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
