"""Contrastive-loss training with finite-difference gradients and Nadam."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import dense
from .data import BlochSample, Dataset, to_dense_input, to_input_state
from .model import NetworkConfig, ParamSet, gate_superoperator
from .mps import apply_mpo, build_layer_mpo, magnetization_expectation, mps_from_dense, sweep_evolve
from .sampler import estimate_magnetization
from .tensor import NumericalError, SvdTruncation

__all__ = [
    "LossConfig",
    "OptimizerState",
    "TrainConfig",
    "EvalConfig",
    "TrainHistory",
    "Classification",
    "UntrainedError",
    "contrastive_loss",
    "finite_diff_gradient",
    "nadam_step",
    "NetworkEvaluator",
    "loss_of_params",
    "train",
    "classify",
    "centroids",
]

logger = logging.getLogger(__name__)

# leading element of every shot-stream key
PURPOSE_TRAIN, PURPOSE_VALIDATION, PURPOSE_EVALUATE = 0, 1, 2


class UntrainedError(ValueError):
    """Class centroids coincide; the network does not separate the labels."""


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.25
    shots: int | None = 5000  # None: exact expectations

    def __post_init__(self):
        if not 0 <= self.margin <= 1:
            raise ValueError(f"margin must lie in [0, 1], got {self.margin}")
        if self.shots is not None and self.shots < 1:
            raise ValueError(f"shots must be positive, got {self.shots}")


@dataclass(frozen=True)
class OptimizerState:
    beta1: float = 0.75
    beta2: float = 0.98
    learning_rate: float = 0.05
    delta: float = 1e-7
    round: int = 0  # number of completed updates
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["m"] = None if self.m is None else np.asarray(self.m).tolist()
        out["v"] = None if self.v is None else np.asarray(self.v).tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "OptimizerState":
        obj = dict(obj)
        for key in ("m", "v"):
            if obj.get(key) is not None:
                obj[key] = np.array(obj[key], dtype=float)
        return cls(**obj)


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 50
    batch_size: int = 25
    eps: float = 0.1
    seed: int = 0
    noise_mode: str = "fresh"  # or "crn": base and perturbed losses share shot streams
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.noise_mode not in ("fresh", "crn"):
            raise ValueError(f"noise_mode must be 'fresh' or 'crn', got {self.noise_mode!r}")
        if self.rounds < 1 or self.batch_size < 1:
            raise ValueError("rounds and batch_size must be positive")


@dataclass(frozen=True)
class EvalConfig:
    """How outputs are computed: tensor-network settings plus backend."""

    chi_mpo: int | None = 16
    chi_mps: int | None = 48
    rel_cutoff: float = 1e-12
    backend: str = "mpo"  # "mpo", "sweep" or "dense"
    threads: int = 1
    zip_factor: float = 2.0  # intermediate bond cap of the mpo zip-up, in units of chi_mps

    def __post_init__(self):
        if self.backend not in ("mpo", "sweep", "dense"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.zip_factor < 1:
            raise ValueError(f"zip_factor must be >= 1, got {self.zip_factor}")


@dataclass
class TrainHistory:
    rounds: list = field(default_factory=list)
    training_loss: list = field(default_factory=list)
    validation_loss: list = field(default_factory=list)
    params: list = field(default_factory=list)  # ParamSet evaluated in each round

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.validation_loss))

    @property
    def best_round(self) -> int:
        return self.rounds[self.best_index]

    @property
    def best_params(self) -> ParamSet:
        return self.params[self.best_index]

    def append(self, r, train_loss, val_loss, params):
        self.rounds.append(int(r))
        self.training_loss.append(float(train_loss))
        self.validation_loss.append(float(val_loss))
        self.params.append(params)

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "training_loss": self.training_loss,
            "validation_loss": self.validation_loss,
            "params": [p.to_json() for p in self.params],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainHistory":
        return cls(
            list(obj["rounds"]),
            list(obj["training_loss"]),
            list(obj["validation_loss"]),
            [ParamSet.from_json(p) for p in obj["params"]],
        )


def contrastive_loss(values, labels, margin: float) -> float:
    """Mean over all ordered pairs (diagonal included) of the contrastive term.

    Same-label pairs contribute ``(m_i - m_l)^2``; different-label pairs
    ``max(0, margin - |m_i - m_l|)^2``.
    """
    m = np.asarray(values, dtype=float).reshape(-1)
    lab = np.asarray(labels).reshape(-1)
    if m.size == 0:
        raise ValueError("contrastive_loss needs at least one output")
    if lab.size != m.size:
        raise ValueError("values and labels differ in length")
    diff = m[:, None] - m[None, :]
    same = lab[:, None] == lab[None, :]
    hinge = np.clip(margin - np.abs(diff), 0.0, None)
    terms = np.where(same, diff**2, hinge**2)
    return float(terms.sum() / m.size**2)


def finite_diff_gradient(loss: Callable, params: ParamSet, eps: float):
    """Forward differences over the trainable slots of ``params``.

    ``loss(p, index)`` is called once with ``index=0`` for the shared base
    point and with ``index=s+1`` for slot ``s`` perturbed by ``eps``.
    Returns ``(gradient, base_loss)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = loss(params, 0)
    grad = np.empty(len(params.mask))
    for s in range(len(params.mask)):
        grad[s] = (loss(params.perturbed(s, eps), s + 1) - base) / eps
    return grad, base


def nadam_step(state: OptimizerState, grad):
    """One Nadam update. Returns ``(new_state, f)``; parameters move by ``-lr * f``."""
    g = np.asarray(grad, dtype=float)
    m = np.zeros_like(g) if state.m is None else np.asarray(state.m, dtype=float)
    v = np.zeros_like(g) if state.v is None else np.asarray(state.v, dtype=float)
    if m.shape != g.shape:
        raise ValueError(f"gradient has shape {g.shape}, optimizer moments {m.shape}")
    b1, b2 = state.beta1, state.beta2
    r = state.round + 1
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    m_hat = m / (1 - b1**r)
    v_hat = v / (1 - b2**r)
    f = (b1 * m_hat + (1 - b1) / (1 - b1**r) * g) / (np.sqrt(v_hat) + state.delta)
    return replace(state, round=r, m=m, v=v), f


class NetworkEvaluator:
    """Maps input samples to output-layer ``m^x`` (shot estimates or exact)."""

    def __init__(self, network: NetworkConfig, loss: LossConfig, tn: EvalConfig, seed: int = 0):
        if tn.backend == "dense" and network.n_sites > dense.MAX_SITES:
            raise ValueError(f"dense backend requires N <= {dense.MAX_SITES}")
        self.network = network
        self.loss = loss
        self.tn = tn
        self.seed = seed
        self.trunc = SvdTruncation(None, tn.rel_cutoff)

    def _final_states(self, params: ParamSet, samples: Sequence[BlochSample]):
        n, steps = self.network.n_sites, self.network.n_steps
        if self.tn.backend == "dense":
            V = dense.layer_isometry(params, self.network)

            def run(sample):
                rho = to_dense_input(sample, n)
                for _ in range(steps):
                    rho = np.einsum("onb,bc,omc->nm", V, rho, V.conj(), optimize=True)
                return mps_from_dense(rho, n)

        elif self.tn.backend == "mpo":
            mpo = build_layer_mpo(params, self.network, self.tn.chi_mpo, self.trunc)

            def run(sample):
                s = to_input_state(sample, n)
                for _ in range(steps):
                    s = apply_mpo(s, mpo, self.tn.chi_mps, self.trunc, zip_factor=self.tn.zip_factor)
                return s

        else:
            ops = (gate_superoperator(params, self.network.dt), gate_superoperator(params, self.network.dt, True))

            def run(sample):
                s = to_input_state(sample, n)
                for _ in range(steps):
                    s = sweep_evolve(s, params, self.network, self.tn.chi_mps, self.trunc, superops=ops)
                return s

        return run

    def outputs(self, params: ParamSet, samples: Sequence[BlochSample], key: tuple = (), ids=None) -> np.ndarray:
        """Output magnetizations in sample order.

        ``key`` and the per-sample ``ids`` select the shot streams
        ``(seed, *key, id)``.
        """
        ids = range(len(samples)) if ids is None else ids
        run = self._final_states(params, samples)
        shots = self.loss.shots

        def one(args):
            sample, sid = args
            state = run(sample)
            if shots is None:
                return magnetization_expectation(state, "x")
            return estimate_magnetization(state, shots, self.seed, (*key, int(sid))).estimate

        jobs = list(zip(samples, ids))
        if self.tn.threads > 1:
            with ThreadPoolExecutor(self.tn.threads) as pool:
                values = list(pool.map(one, jobs))
        else:
            values = [one(j) for j in jobs]
        return np.array(values, dtype=float)


def loss_of_params(
    evaluator: NetworkEvaluator, params: ParamSet, samples: Sequence[BlochSample], key: tuple = (), ids=None
) -> float:
    values = evaluator.outputs(params, samples, key, ids)
    return contrastive_loss(values, [s.label for s in samples], evaluator.loss.margin)


def _minibatch(seed: int, r: int, n_train: int, size: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 7, int(r)])
    return np.sort(rng.choice(n_train, size=min(size, n_train), replace=False))


def train(
    dataset: Dataset,
    init: ParamSet,
    evaluator: NetworkEvaluator,
    optimizer: OptimizerState,
    cfg: TrainConfig,
    checkpoint_dir=None,
    resume: dict | None = None,
    progress: Callable | None = None,
) -> TrainHistory:
    """Run ``cfg.rounds`` rounds of minibatch training.

    Each round draws a minibatch without replacement, evaluates the shared
    base loss and one forward difference per trainable slot, records the
    minibatch loss and the validation loss of the current parameters and
    then applies a Nadam update.
    """
    train_set = dataset.train
    val_set = dataset.validation
    n_train = len(train_set)
    if n_train < 1 or not val_set:
        raise ValueError("dataset needs a non-empty training and validation split")
    if cfg.batch_size > n_train:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds training split {n_train}")
    val_ids = np.arange(n_train, len(dataset))

    params, history, start = init, TrainHistory(), 1
    if resume is not None:
        params = resume["params"]
        optimizer = resume["optimizer"]
        history = resume["history"]
        start = optimizer.round + 1
    if len(params.flat()) != len(init.mask):
        raise ValueError("resume parameters do not match the trainable mask")

    for r in range(start, cfg.rounds + 1):
        idx = _minibatch(cfg.seed, r, n_train, cfg.batch_size)
        batch = [train_set[i] for i in idx]

        def batch_loss(p, index, r=r, batch=batch, idx=idx):
            key = (PURPOSE_TRAIN, r, 0 if cfg.noise_mode == "crn" else index)
            return loss_of_params(evaluator, p, batch, key, idx)

        try:
            grad, base = finite_diff_gradient(batch_loss, params, cfg.eps)
            val = loss_of_params(evaluator, params, val_set, (PURPOSE_VALIDATION, r), val_ids)
        except NumericalError as exc:
            raise NumericalError(f"round {r}: {exc}") from exc
        history.append(r, base, val, params)
        optimizer, f = nadam_step(optimizer, grad)
        params = params.with_flat(params.flat() - optimizer.learning_rate * f)
        logger.info("round %d: train %.6f  validation %.6f", r, base, val)
        if progress is not None:
            progress(r, base, val, params)
        due = cfg.checkpoint_every and r % cfg.checkpoint_every == 0
        if checkpoint_dir is not None and (due or r == cfg.rounds):
            save_checkpoint(checkpoint_dir, r, params, optimizer, history)
    return history


def save_checkpoint(directory, r: int, params: ParamSet, optimizer: OptimizerState, history: TrainHistory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"params_r{r:04d}.json").write_text(params.dumps())
    (d / f"optimizer_r{r:04d}.json").write_text(json.dumps(optimizer.to_json(), indent=2))
    (d / f"history_r{r:04d}.json").write_text(json.dumps(history.to_json()))


def load_checkpoint(directory, r: int) -> dict:
    d = Path(directory)
    return {
        "params": ParamSet.loads((d / f"params_r{r:04d}.json").read_text()),
        "optimizer": OptimizerState.from_json(json.loads((d / f"optimizer_r{r:04d}.json").read_text())),
        "history": TrainHistory.from_json(json.loads((d / f"history_r{r:04d}.json").read_text())),
    }


@dataclass(frozen=True)
class Classification:
    centroids: tuple  # (a, b)
    predictions: np.ndarray
    accuracy: float
    margin: float


def centroids(values, labels) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    if not (np.any(labels == "A") and np.any(labels == "B")):
        raise ValueError("both classes are needed to compute centroids")
    return float(values[labels == "A"].mean()), float(values[labels == "B"].mean())


def classify(values, labels, cents, min_separation: float = 1e-6) -> Classification:
    """Nearest-centroid labels, accuracy and the worst-case margin

    ``min_i |m_i - other centroid| - |m_i - own centroid|``.
    """
    a, b = cents
    if abs(a - b) < min_separation:
        raise UntrainedError(f"degenerate centroids a={a:.6g}, b={b:.6g}")
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    da, db = np.abs(values - a), np.abs(values - b)
    pred = np.where(da <= db, "A", "B")
    own = np.where(labels == "A", da, db)
    other = np.where(labels == "A", db, da)
    margin = float(np.min(other - own)) if values.size else float("nan")
    accuracy = float(np.mean(pred == labels)) if values.size else float("nan")
    return Classification((a, b), pred, accuracy, margin)
