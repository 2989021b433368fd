"""Parameter masks, initial vectors and hyperparameter presets."""

from __future__ import annotations

from .model import ParamSet, Slot

# a1..a10: h_Ix, h_Iz, h_xx, h_yy, h_zz, j_Ix, j_Iy (re, im), j_Iz (re, im)
MASK_I = tuple(
    Slot.make(*s)
    for s in [
        ("h", "I", "x"),
        ("h", "I", "z"),
        ("h", "x", "x"),
        ("h", "y", "y"),
        ("h", "z", "z"),
        ("j", "I", "x", "re"),
        ("j", "I", "y", "re"),
        ("j", "I", "y", "im"),
        ("j", "I", "z", "re"),
        ("j", "I", "z", "im"),
    ]
)

# b1..b11: h_Ix, h_xx, h_yy, h_zz, j_Ix, j_Iz, j_xx, j_xy, j_xz, j_yx, j_zx (all real)
MASK_II = tuple(
    Slot.make(*s)
    for s in [
        ("h", "I", "x"),
        ("h", "x", "x"),
        ("h", "y", "y"),
        ("h", "z", "z"),
        ("j", "I", "x"),
        ("j", "I", "z"),
        ("j", "x", "x"),
        ("j", "x", "y"),
        ("j", "x", "z"),
        ("j", "y", "x"),
        ("j", "z", "x"),
    ]
)

A_INITIAL = (1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0)
B_INITIAL = (0.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0)
# reported end points of the full-scale runs; reference configurations only
A_TRAINED = (0.32, 0.9, -0.38, -0.26, -1.08, 0.27, -0.43, -0.17, 0.38, -0.64)
B_TRAINED = (-0.05, -1.06, -0.55, -1.33, 0.01, -0.40, -0.07, -0.55, -0.04, 0.26, -0.03)

MASKS = {"I": MASK_I, "II": MASK_II}
INITIAL = {"I": A_INITIAL, "II": B_INITIAL}
TRAINED = {"I": A_TRAINED, "II": B_TRAINED}

# full-scale settings of the two experiments (550 qubits, 5000 shots)
HYPERPARAMS = {
    "I": dict(beta1=0.75, beta2=0.98, learning_rate=0.05, delta=1e-7, margin=0.25, eps=0.1, dt=0.1,
              shots=5000, batch_size=25, rounds=50, n_sites=50, n_steps=10, chi_mpo=16, chi_mps=48,
              count=300, n_train=250),
    "II": dict(beta1=0.85, beta2=0.9995, learning_rate=0.05, delta=1e-7, margin=0.35, eps=0.1, dt=0.1,
               shots=5000, batch_size=23, rounds=20, n_sites=50, n_steps=10, chi_mpo=16, chi_mps=48,
               count=300, n_train=250),
}

# desk-scale dataset-I run used by the acceptance suite; the zip-up runs at
# the bare bond cap to keep a training round under a minute on one core
REDUCED_I = dict(HYPERPARAMS["I"], n_sites=12, n_steps=6, chi_mpo=16, chi_mps=24, shots=2000,
                 count=80, n_train=60, batch_size=20, rounds=50, zip_factor=1.0)


def initial_params(tag: str) -> ParamSet:
    return ParamSet.from_vector(MASKS[tag], INITIAL[tag])


def trained_params(tag: str) -> ParamSet:
    return ParamSet.from_vector(MASKS[tag], TRAINED[tag])
