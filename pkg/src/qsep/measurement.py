"""Measurement settings, correlators, shot sampling and state tomography.

Each local observable is a Bloch direction contracted with the Pauli vector,
so it has eigenvalues +1 and -1.  A joint measurement of (a, b) yields
coincidence counts ordered (++, +-, -+, --), where the first sign is the
outcome of photon A.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .quantum import SIGMA_X, SIGMA_Y, SIGMA_Z, Label, hermitian_eigh

UNIT_TOL = 1e-12
CLIP_TOL = 1e-12
DEFAULT_SHOTS = 10_000

X = (1.0, 0.0, 0.0)
Y = (0.0, 1.0, 0.0)
Z = (0.0, 0.0, 1.0)

# sign pattern of the textbook CHSH combination <ab> - <ab'> + <a'b> + <a'b'>
CHSH_SIGNS = (1, -1, 1, 1)
# every sign pattern with an odd number of minus signs is a CHSH inequality
CHSH_SIGN_PATTERNS = tuple(
    s for s in itertools.product((1, -1), repeat=4) if s.count(-1) % 2 == 1
)
LOCAL_BOUND = 2.0

_PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)
_I2 = np.eye(2, dtype=complex)
# outcome signs for (++, +-, -+, --)
_SIGN_A = np.array([1, 1, -1, -1])
_SIGN_B = np.array([1, -1, 1, -1])
_SIGN_AB = _SIGN_A * _SIGN_B


def direction(x: float, y: float, z: float) -> tuple[float, float, float]:
    """Normalize (x, y, z) into a Bloch direction."""
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return (x / n, y / n, z / n)


def _check_unit(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (3,):
        raise ValueError(f"Bloch direction needs 3 components, got shape {d.shape}")
    if abs(float(d @ d) - 1.0) > UNIT_TOL:
        raise ValueError(f"direction {tuple(d)} is not a unit vector")
    return d


def pauli_from_direction(d) -> np.ndarray:
    """d.x * sigma_x + d.y * sigma_y + d.z * sigma_z."""
    d = _check_unit(d)
    return d[0] * SIGMA_X + d[1] * SIGMA_Y + d[2] * SIGMA_Z


@dataclass(frozen=True)
class FeaturePlan:
    """Four ordered setting pairs (a0 b0, a0 b0', a0' b0, a0' b0')."""

    name: str
    a0: tuple
    a1: tuple
    b0: tuple
    b1: tuple

    def __post_init__(self):
        for d in (self.a0, self.a1, self.b0, self.b1):
            _check_unit(d)

    @property
    def pairs(self) -> tuple:
        return ((self.a0, self.b0), (self.a0, self.b1), (self.a1, self.b0), (self.a1, self.b1))

    def to_dict(self) -> dict:
        return {"name": self.name, "a0": list(self.a0), "a1": list(self.a1),
                "b0": list(self.b0), "b1": list(self.b1)}

    @classmethod
    def from_dict(cls, d: dict) -> FeaturePlan:
        return cls(d["name"], *(tuple(float(v) for v in d[k]) for k in ("a0", "a1", "b0", "b1")))


# For the Werner-like family a0 = z reads only T_zz and a0' = x only the
# x-row coherences.  b directions at cos^2 = 1/(1 + 2 sqrt2) from z minimize the
# shot noise of "T_zz + 2 |coherence|", the quantity that decides PPT there.
# a0 is tilted 0.15 rad towards x so that its two correlators are not
# proportional.
_B_Z2 = 1.0 / (1.0 + 2.0 * math.sqrt(2.0))
_B_XZ = (math.sqrt(1.0 - _B_Z2), 0.0, math.sqrt(_B_Z2))
_B_YZ = (0.0, math.sqrt(1.0 - _B_Z2), math.sqrt(_B_Z2))
_A0_TILTED = (math.sin(0.15), 0.0, math.cos(0.15))

PLANS = {
    # a0 = z, a0' = x, b0 = (z + x)/sqrt2, b0' = (z - x)/sqrt2
    "xz": FeaturePlan("xz", Z, X, direction(1, 0, 1), direction(-1, 0, 1)),
    # leaves the x-z plane so that the features see the relative phase
    "xyz": FeaturePlan("xyz", _A0_TILTED, X, _B_XZ, _B_YZ),
    # x-z settings for which CHSH_SIGNS itself reaches 2*sqrt2 on the Bell state
    "xz_chsh": FeaturePlan("xz_chsh", Z, X, direction(1, 0, -1), direction(1, 0, 1)),
}


def get_plan(plan) -> FeaturePlan:
    """Resolve a plan given by name, dict or as a ``FeaturePlan``."""
    if isinstance(plan, FeaturePlan):
        return plan
    if isinstance(plan, dict):
        return FeaturePlan.from_dict(plan)
    try:
        return PLANS[plan]
    except KeyError:
        raise ValueError(f"unknown plan {plan!r}; known plans: {sorted(PLANS)}") from None


TOMOGRAPHY_SETTINGS = tuple(itertools.product((X, Y, Z), repeat=2))


@dataclass
class CountRecord:
    """Coincidence counts of one joint setting, ordered (++, +-, -+, --).

    Counts are normally integers; exact-probability records used for the
    infinite-shot limit carry floats.
    """

    n_pp: float
    n_pm: float
    n_mp: float
    n_mm: float
    setting: tuple = field(default=None, compare=False)

    @property
    def counts(self) -> np.ndarray:
        return np.array([self.n_pp, self.n_pm, self.n_mp, self.n_mm])

    @property
    def total(self):
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    @classmethod
    def from_counts(cls, counts, setting=None) -> CountRecord:
        c = [v.item() if hasattr(v, "item") else v for v in counts]
        return cls(*c, setting=setting)


def correlator_exact(rho, a, b) -> float:
    """tr(rho (A ⊗ B))."""
    obs = np.kron(pauli_from_direction(a), pauli_from_direction(b))
    val = np.trace(np.asarray(rho) @ obs)
    return float(val.real)


def features_exact(rho, plan) -> np.ndarray:
    plan = get_plan(plan)
    return np.array([correlator_exact(rho, a, b) for a, b in plan.pairs])


def chsh_value(rho, plan, signs=CHSH_SIGNS) -> float:
    return float(np.dot(signs, features_exact(rho, plan)))


def chsh_max(features) -> float:
    """Largest |CHSH| over all eight inequivalent sign patterns."""
    f = np.asarray(features, dtype=float)
    return float(max(abs(np.dot(s, f)) for s in CHSH_SIGN_PATTERNS))


def chsh_classifier_standard(features, signs=CHSH_SIGNS) -> Label:
    """Entangled iff |sum(sign_i * f_i)| exceeds the local bound 2."""
    s = abs(float(np.dot(signs, np.asarray(features, dtype=float))))
    return Label.ENTANGLED if s > LOCAL_BOUND else Label.SEPARABLE


def chsh_classifier_any(features) -> Label:
    """Entangled iff any CHSH inequality on the four correlators is violated."""
    return Label.ENTANGLED if chsh_max(features) > LOCAL_BOUND else Label.SEPARABLE


def joint_probabilities(rho, a, b) -> np.ndarray:
    """Outcome probabilities (++, +-, -+, --) of the joint measurement (a, b)."""
    pa = pauli_from_direction(a)
    pb = pauli_from_direction(b)
    proj_a = ((_I2 + pa) / 2, (_I2 - pa) / 2)
    proj_b = ((_I2 + pb) / 2, (_I2 - pb) / 2)
    rho = np.asarray(rho)
    probs = np.array(
        [np.trace(rho @ np.kron(ma, mb)).real for ma in proj_a for mb in proj_b]
    )
    lo = probs.min()
    if lo < -CLIP_TOL:
        raise ValueError(f"negative outcome probability {lo:.3g}; state is not physical")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(rho, a, b, shots: int, rng: np.random.Generator) -> CountRecord:
    """Multinomial draw of ``shots`` coincidences for the setting (a, b)."""
    if shots < 1:
        raise ValueError("shots must be positive")
    counts = rng.multinomial(shots, joint_probabilities(rho, a, b))
    return CountRecord.from_counts(counts, setting=(a, b))


def correlators_from_counts(counts) -> np.ndarray:
    """Vectorized (n_pp - n_pm - n_mp + n_mm) / total over the last axis."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)
    if np.any(total <= 0):
        raise ValueError("count record with zero total")
    return (counts @ _SIGN_AB) / total


def estimate_correlator(record: CountRecord) -> float:
    return float(correlators_from_counts(record.counts))


def features_from_records(records) -> np.ndarray:
    return correlators_from_counts([r.counts for r in records])


def tomography_measure(rho, shots_per_setting: int, rng: np.random.Generator) -> list:
    """Shot-sampled counts for all nine Pauli pairs {x,y,z} x {x,y,z}."""
    return [sample_counts(rho, a, b, shots_per_setting, rng) for a, b in TOMOGRAPHY_SETTINGS]


def tomography_probabilities(rho) -> list:
    """Infinite-shot records: each record carries the exact outcome probabilities."""
    return [
        CountRecord.from_counts(joint_probabilities(rho, a, b), setting=(a, b))
        for a, b in TOMOGRAPHY_SETTINGS
    ]


def linear_inversion(counts) -> np.ndarray:
    """Invert nine tomography count rows into a Hermitian, unit-trace estimate.

    ``counts`` has shape (9, 4) in TOMOGRAPHY_SETTINGS order.  Single-qubit
    expectations are averaged over the three joint settings that contain them.
    """
    counts = np.asarray(counts, dtype=float).reshape(3, 3, 4)
    total = counts.sum(axis=-1)
    if np.any(total <= 0):
        raise ValueError("tomography record with zero total")
    corr = (counts @ _SIGN_AB) / total
    single_a = ((counts @ _SIGN_A) / total).mean(axis=1)
    single_b = ((counts @ _SIGN_B) / total).mean(axis=0)

    rho = np.kron(_I2, _I2).astype(complex)
    for i, si in enumerate(_PAULIS):
        rho += single_a[i] * np.kron(si, _I2)
        rho += single_b[i] * np.kron(_I2, si)
        for j, sj in enumerate(_PAULIS):
            rho += corr[i, j] * np.kron(si, sj)
    return rho / 4.0


def project_physical(m) -> np.ndarray:
    """Nearest density matrix by sorted eigenvalue redistribution.

    Negative eigenvalues are zeroed from the bottom up while their deficit is
    spread evenly over the eigenvalues that remain, so the trace stays 1.
    """
    m = np.asarray(m, dtype=complex)
    m = 0.5 * (m + m.conj().T)
    w, v = hermitian_eigh(m)
    mu = w[::-1] / w.sum()
    lam = np.zeros_like(mu)
    deficit = 0.0
    i = len(mu)
    while i > 0 and mu[i - 1] + deficit / i < 0:
        deficit += mu[i - 1]
        i -= 1
    lam[:i] = mu[:i] + deficit / i
    lam = lam[::-1]
    rho = (v * lam) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def reconstruct_from_counts(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if not np.any(counts):
        raise ValueError("cannot reconstruct from all-zero records")
    return project_physical(linear_inversion(counts))


def reconstruct_density(records) -> np.ndarray:
    """Linear-inversion tomography followed by the physicality projection."""
    if len(records) != len(TOMOGRAPHY_SETTINGS):
        raise ValueError(f"expected {len(TOMOGRAPHY_SETTINGS)} records, got {len(records)}")
    return reconstruct_from_counts([r.counts for r in records])
