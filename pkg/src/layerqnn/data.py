"""Labelled Bloch-sphere product-state datasets.

Samples are stored as ``(label, theta, phi)``; magnetizations are always
re-derived from the angles:

    m^z = cos(theta) / 2,   m^x = R cos(phi),   m^y = R sin(phi),
    R = sqrt(1/4 - (m^z)^2)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dense import product_density
from .mps import LayerMps, product_state_mps

__all__ = [
    "LABELS",
    "BlochSample",
    "Dataset",
    "arctan2",
    "sample_from_magnetizations",
    "sample_dataset_I",
    "sample_dataset_II",
    "generate_dataset",
    "dataset_II_rule",
    "to_input_state",
    "to_dense_input",
    "write_dataset",
    "read_dataset",
]

LABELS = ("A", "B")
DATASET_I_RANGE = (0.15, 0.4)
INTERVAL_1 = (math.pi / 4, 3 * math.pi / 4)
INTERVAL_2 = (5 * math.pi / 4, 7 * math.pi / 4)
THETAS_II = (math.pi / 4, 3 * math.pi / 4)


def arctan2(y: float, x: float) -> float:
    """Quadrant-aware inverse tangent with codomain (-pi, pi].

    Defined case by case from ``arctan(y / x)``; the negative real axis maps
    to ``+pi``.
    """
    if x > 0:
        return math.atan(y / x)
    if x < 0:
        if y > 0:
            return math.atan(y / x) + math.pi
        if y == 0:
            return math.pi
        angle = math.atan(y / x) - math.pi
        # |y| << |x| can round onto -pi, which lies outside the codomain
        return angle if angle > -math.pi else math.pi
    if y > 0:
        return math.pi / 2
    if y < 0:
        return -math.pi / 2
    raise ValueError("arctan2 is undefined at the origin")


@dataclass(frozen=True)
class BlochSample:
    label: str
    theta: float
    phi: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be A or B, got {self.label!r}")

    @property
    def magnetizations(self) -> np.ndarray:
        mz = math.cos(self.theta) / 2
        radius = math.sqrt(max(0.25 - mz * mz, 0.0))
        return np.array([radius * math.cos(self.phi), radius * math.sin(self.phi), mz])


def sample_from_magnetizations(label: str, m) -> BlochSample:
    mx, my, mz = (float(c) for c in m)
    theta = math.acos(max(-1.0, min(1.0, 2 * mz)))
    if mx == 0 and my == 0:
        phi = 0.0
    else:
        phi = arctan2(my, mx) % (2 * math.pi)
    return BlochSample(label, theta, phi)


@dataclass(frozen=True)
class Dataset:
    samples: tuple
    tag: str
    seed: int | None = None
    n_train: int | None = None

    def __post_init__(self):
        if self.n_train is not None and not 0 <= self.n_train <= len(self.samples):
            raise ValueError(f"n_train={self.n_train} out of range for {len(self.samples)} samples")

    def __len__(self):
        return len(self.samples)

    @property
    def train(self) -> tuple:
        n = len(self.samples) if self.n_train is None else self.n_train
        return self.samples[:n]

    @property
    def validation(self) -> tuple:
        n = len(self.samples) if self.n_train is None else self.n_train
        return self.samples[n:]

    def split(self, n_train: int) -> "Dataset":
        return Dataset(self.samples, self.tag, self.seed, n_train)

    def bloch_array(self) -> np.ndarray:
        return np.array([s.magnetizations for s in self.samples]).reshape(-1, 3)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples])


def _labels(count, rng):
    return [LABELS[int(b)] for b in rng.integers(0, 2, size=count)]


def sample_dataset_I(count: int, rng: np.random.Generator) -> Dataset:
    """Class A with ``m^z ~ U[0.15, 0.4]``, class B with ``m^z ~ U[-0.4, -0.15]``,
    azimuth uniform."""
    if count < 2:
        raise ValueError("count must be >= 2")
    lo, hi = DATASET_I_RANGE
    samples = []
    for label in _labels(count, rng):
        mz = rng.uniform(lo, hi)
        if label == "B":
            mz = -mz
        alpha = rng.uniform(0.0, 2 * math.pi)
        radius = math.sqrt(0.25 - mz * mz)
        samples.append(sample_from_magnetizations(label, (radius * math.cos(alpha), radius * math.sin(alpha), mz)))
    return Dataset(tuple(samples), "I")


def dataset_II_rule(label: str, theta_branch: int) -> tuple[float, float]:
    """Azimuth interval for ``label`` on the ``theta = pi/4`` (0) or ``3pi/4`` (1) branch."""
    same = (label == "A") == (theta_branch == 0)
    return INTERVAL_1 if same else INTERVAL_2


def sample_dataset_II(count: int, rng: np.random.Generator) -> Dataset:
    """Two polar angles, two azimuth intervals; the class fixes which pairing."""
    if count < 2:
        raise ValueError("count must be >= 2")
    samples = []
    for label in _labels(count, rng):
        branch = int(rng.integers(0, 2))
        lo, hi = dataset_II_rule(label, branch)
        samples.append(BlochSample(label, THETAS_II[branch], rng.uniform(lo, hi)))
    return Dataset(tuple(samples), "II")


def generate_dataset(tag: str, count: int, seed: int, n_train: int | None = None) -> Dataset:
    rng = np.random.default_rng(seed)
    if tag == "I":
        ds = sample_dataset_I(count, rng)
    elif tag == "II":
        ds = sample_dataset_II(count, rng)
    else:
        raise ValueError(f"unknown dataset {tag!r}")
    return Dataset(ds.samples, tag, seed, n_train)


def to_input_state(sample: BlochSample, n_sites: int, chi_max: int | None = None) -> LayerMps:
    return product_state_mps(sample.magnetizations, n_sites, chi_max)


def to_dense_input(sample: BlochSample, n_sites: int) -> np.ndarray:
    return product_density(sample.magnetizations, n_sites)


def write_dataset(dataset: Dataset, path) -> None:
    """JSON lines: a header object, then one ``{label, theta, phi}`` per sample."""
    header = {"dataset": dataset.tag, "seed": dataset.seed, "count": len(dataset)}
    if dataset.n_train is not None:
        header["n_train"] = dataset.n_train
    lines = [json.dumps(header)]
    lines += [json.dumps({"label": s.label, "theta": s.theta, "phi": s.phi}) for s in dataset.samples]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path) -> Dataset:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    samples = tuple(BlochSample(o["label"], float(o["theta"]), float(o["phi"])) for o in map(json.loads, lines[1:]))
    if header.get("count", len(samples)) != len(samples):
        raise ValueError(f"{path}: header count {header['count']} but {len(samples)} samples")
    return Dataset(samples, header.get("dataset", "?"), header.get("seed"), header.get("n_train"))
