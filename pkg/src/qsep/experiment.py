"""Simulated acquisition: noisy source, time-mixing data pools, labeled datasets.

Randomness comes from counter-based Philox streams keyed by
``(master seed, stream kind, split, theta index, phi index, sample index)``,
so every sample can be regenerated alone and results do not depend on the
order in which samples are produced.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import measurement as ms
from .quantum import (
    MAXIMALLY_MIXED,
    Label,
    bell_state,
    concurrence,
    density_from_ket,
    ket_from_params,
    ppt_boundary_state,
    ppt_label,
    purity,
    werner_like,
)

DEFAULT_SEED = 20180601
DEFAULT_THETAS = tuple(k * math.pi / 20 for k in range(1, 6))
DEFAULT_PHIS = (0.0, math.pi / 2, math.pi)
P_GRID = tuple(round(0.01 * k, 2) for k in range(1, 100))
P_MIN, P_MAX = 0.01, 0.99
PAPER_PURITY = 0.914
PAPER_CONCURRENCE = 0.927

COMPONENTS = ("entangled", "HH", "HV", "VH", "VV")
SPLITS = {"train": 0, "test": 1}
_STREAM_POOL, _STREAM_MIX, _STREAM_MARGIN = 1, 2, 3


class CalibrationError(ValueError):
    pass


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for the integer key path under ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


@dataclass(frozen=True)
class SourceModel:
    """Imperfect entangled source.

    v: depolarizing retention, d: coherence retention, b: weight of an
    admixed |HH> population (0 for the plain depolarize-and-dephase model).
    """

    v: float = 1.0
    d: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        for name in ("v", "d", "b"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name}={val} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SourceModel:
        return cls(float(d["v"]), float(d["d"]), float(d.get("b", 0.0)))


_HH_PROJECTOR = np.zeros((4, 4), dtype=complex)
_HH_PROJECTOR[0, 0] = 1.0


def apply_noise(rho_ideal, m: SourceModel) -> np.ndarray:
    """Scale coherences by d, depolarize with retention v, then admix |HH> with weight b."""
    rho = np.array(rho_ideal, dtype=complex)
    diag = np.diag(np.diag(rho))
    damped = diag + m.d * (rho - diag)
    mixed = m.v * damped + (1.0 - m.v) * MAXIMALLY_MIXED
    if m.b:
        mixed = (1.0 - m.b) * mixed + m.b * _HH_PROJECTOR
    return mixed


def source_quality(m: SourceModel) -> tuple[float, float]:
    """(purity, concurrence) of the noisy Bell state emitted by ``m``."""
    rho = apply_noise(bell_state(), m)
    return purity(rho), concurrence(rho)


@dataclass(frozen=True)
class Calibration:
    model: SourceModel
    purity: float
    concurrence: float
    target_purity: float
    target_concurrence: float

    def to_dict(self) -> dict:
        return {
            **self.model.to_dict(),
            "achieved_purity": self.purity,
            "achieved_concurrence": self.concurrence,
            "target_purity": self.target_purity,
            "target_concurrence": self.target_concurrence,
        }


# (v, d) with b = 0 first; (v, b) with d = 1 reaches purities below what
# depolarizing plus dephasing can produce at a given concurrence
_FAMILIES = (
    ("depolarize-dephase", lambda outer, inner: SourceModel(outer, inner, 0.0)),
    ("depolarize-admix", lambda outer, inner: SourceModel(inner, 1.0, outer)),
)


def _nearest_achievable(target_purity, target_concurrence, n=21):
    best = None
    for _, make in _FAMILIES:
        for x in np.linspace(0.0, 1.0, n):
            for y in np.linspace(0.0, 1.0, n):
                m = make(float(x), float(y))
                pu, co = source_quality(m)
                dist = (pu - target_purity) ** 2 + (co - target_concurrence) ** 2
                if best is None or dist < best[0]:
                    best = (dist, m, pu, co)
    return best[1:]


def _solve_family(make, target_purity, target_concurrence, grid):
    def inner_for(x):
        f = lambda y: source_quality(make(x, y))[1] - target_concurrence
        lo, hi = f(0.0), f(1.0)
        if lo == 0.0:
            return 0.0
        if hi == 0.0:
            return 1.0
        if lo * hi > 0:
            return None
        return brentq(f, 0.0, 1.0, xtol=1e-14)

    def residual(x):
        y = inner_for(x)
        if y is None:
            return None, None
        return source_quality(make(x, y))[0] - target_purity, y

    xs = np.linspace(0.0, 1.0, grid)
    res = [residual(float(x)) for x in xs]
    for i, (r, y) in enumerate(res):
        if r is not None and abs(r) <= 1e-12:
            return make(float(xs[i]), y)
    for i in range(len(xs) - 1):
        r0, r1 = res[i][0], res[i + 1][0]
        if r0 is not None and r1 is not None and r0 * r1 < 0:
            x = brentq(lambda t: residual(t)[0], float(xs[i]), float(xs[i + 1]), xtol=1e-14)
            return make(x, residual(x)[1])
    return None


def calibrate_source(
    target_purity: float = PAPER_PURITY,
    target_concurrence: float = PAPER_CONCURRENCE,
    tol: float = 1e-3,
    grid: int = 21,
) -> Calibration:
    """Find a source model whose noisy Bell state hits both quality targets.

    Within a two-parameter noise family, the inner parameter is solved so the
    concurrence matches for each outer value on a coarse grid; the purity
    residual along that curve is bracketed on the grid and refined with a
    bracketed root search.
    """
    if not 0.25 < target_purity <= 1.0 or not 0.0 <= target_concurrence <= 1.0:
        raise CalibrationError(
            f"targets out of range: purity {target_purity}, concurrence {target_concurrence}"
        )
    for _, make in _FAMILIES:
        model = _solve_family(make, target_purity, target_concurrence, grid)
        if model is None:
            continue
        pu, co = source_quality(model)
        if abs(pu - target_purity) <= tol and abs(co - target_concurrence) <= tol:
            return Calibration(model, pu, co, target_purity, target_concurrence)
    m, pu, co = _nearest_achievable(target_purity, target_concurrence)
    raise CalibrationError(
        f"targets (purity {target_purity}, concurrence {target_concurrence}) are not "
        f"achievable; nearest achievable point v={m.v:.3f}, d={m.d:.3f}, b={m.b:.3f} "
        f"gives purity {pu:.4f}, concurrence {co:.4f}"
    )


def product_states() -> list:
    """Density matrices |HH>, |HV>, |VH>, |VV> in basis order."""
    out = []
    for k in range(4):
        rho = np.zeros((4, 4), dtype=complex)
        rho[k, k] = 1.0
        out.append(rho)
    return out


@dataclass
class DataPool:
    """Counts of the entangled and product components for one (theta, phi).

    ``counts[c, s]`` holds the (++, +-, -+, --) record of component ``c``
    (order COMPONENTS) under setting ``s``: the four plan settings first,
    then the nine tomography settings.
    """

    theta: float
    phi: float
    plan: ms.FeaturePlan
    shots: int
    counts: np.ndarray
    entangled_state: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def settings(self) -> tuple:
        return self.plan.pairs + ms.TOMOGRAPHY_SETTINGS

    def record(self, component: str, setting_index: int) -> ms.CountRecord:
        c = COMPONENTS.index(component)
        return ms.CountRecord.from_counts(self.counts[c, setting_index],
                                          setting=self.settings[setting_index])


def noisy_source_state(theta: float, phi: float, m: SourceModel) -> np.ndarray:
    return apply_noise(density_from_ket(ket_from_params(theta, phi)), m)


def build_pool(theta, phi, m: SourceModel, plan, shots: int, rng) -> DataPool:
    """Measure the noisy entangled state and the four product states on every setting."""
    plan = ms.get_plan(plan)
    ent = noisy_source_state(theta, phi, m)
    states = [ent] + product_states()
    settings = plan.pairs + ms.TOMOGRAPHY_SETTINGS
    counts = np.zeros((len(states), len(settings), 4), dtype=np.int64)
    for c, rho in enumerate(states):
        for s, (a, b) in enumerate(settings):
            counts[c, s] = rng.multinomial(shots, ms.joint_probabilities(rho, a, b))
    return DataPool(theta, phi, plan, shots, counts, ent, meta={"shots": shots})


def mix_counts(pool: DataPool, p: float, rng) -> np.ndarray:
    """Time-mixed counts for every setting of the pool, shape (13, 4).

    Per setting, ``pool.shots`` events are attributed to the entangled
    component with probability p and to a uniformly chosen product component
    otherwise; each component's share is then drawn without replacement from
    its pooled counts.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    weights = np.array([p] + [(1.0 - p) / 4] * 4)
    n_settings = pool.counts.shape[1]
    out = np.zeros((n_settings, 4), dtype=np.int64)
    for s in range(n_settings):
        shares = rng.multinomial(pool.shots, weights)
        for c, n in enumerate(shares):
            if n:
                out[s] += rng.multivariate_hypergeometric(pool.counts[c, s], int(n))
    return out


def mix_sample(pool: DataPool, p: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Features and reconstructed density matrix of one time-mixed Werner-like state."""
    counts = mix_counts(pool, p, rng)
    features = ms.correlators_from_counts(counts[:4])
    return features, ms.reconstruct_from_counts(counts[4:])


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str = "linear"
    thetas: tuple = DEFAULT_THETAS
    phis: tuple = (0.0,)
    p_grid: tuple = P_GRID
    plan: str = "xz"
    shots: int = ms.DEFAULT_SHOTS
    seed: int = DEFAULT_SEED
    margin_halfwidth: float = 0.05
    margin_samples: int = 80

    def __post_init__(self):
        if self.kind not in ("linear", "nonlinear"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if not self.thetas or not self.phis or not self.p_grid:
            raise ValueError("theta, phi and p lists must be non-empty")
        for t in self.thetas:
            if not 0.0 < t <= math.pi / 4 + 1e-12:
                raise ValueError(f"theta={t} outside (0, pi/4]")
        for p in self.p_grid:
            if not P_MIN - 1e-12 <= p <= P_MAX + 1e-12:
                raise ValueError(f"p={p} outside [{P_MIN}, {P_MAX}]")
        if self.shots < 1:
            raise ValueError("shots must be positive")
        if self.margin_samples < 1 or self.margin_halfwidth <= 0:
            raise ValueError("margin rule needs a positive sample count and half-width")
        ms.get_plan(self.plan)

    @classmethod
    def linear(cls, **kw) -> ProtocolSpec:
        return cls(**{"kind": "linear", "phis": (0.0,), "plan": "xz", **kw})

    @classmethod
    def nonlinear(cls, **kw) -> ProtocolSpec:
        return cls(**{"kind": "nonlinear", "phis": DEFAULT_PHIS, "plan": "xyz", **kw})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thetas"] = list(self.thetas)
        d["phis"] = list(self.phis)
        d["p_grid"] = list(self.p_grid)
        plan = ms.get_plan(self.plan)
        d["plan"] = plan.name if plan.name in ms.PLANS else plan.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ProtocolSpec:
        d = dict(d)
        for k in ("thetas", "phis", "p_grid"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: Label
    theta: float
    phi: float
    p: float
    reconstructed: np.ndarray | None = None
    truth: np.ndarray | None = None


@dataclass
class Dataset:
    """Column-oriented collection of labeled samples in generation order."""

    theta: np.ndarray
    phi: np.ndarray
    p: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)
    reconstructed: np.ndarray | None = None
    truth: np.ndarray | None = None

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(
            features=self.features[i],
            label=Label(int(self.labels[i])),
            theta=float(self.theta[i]),
            phi=float(self.phi[i]),
            p=float(self.p[i]),
            reconstructed=None if self.reconstructed is None else self.reconstructed[i],
            truth=None if self.truth is None else self.truth[i],
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def plan(self) -> ms.FeaturePlan:
        return ms.get_plan(self.provenance.get("plan", "xz"))

    def subset(self, mask) -> Dataset:
        pick = lambda a: None if a is None else a[mask]
        return Dataset(self.theta[mask], self.phi[mask], self.p[mask], self.features[mask],
                       self.labels[mask], dict(self.provenance),
                       pick(self.reconstructed), pick(self.truth))

    @classmethod
    def from_samples(cls, samples, provenance) -> Dataset:
        samples = list(samples)
        return cls(
            theta=np.array([s.theta for s in samples]),
            phi=np.array([s.phi for s in samples]),
            p=np.array([s.p for s in samples]),
            features=np.array([s.features for s in samples]).reshape(-1, 4),
            labels=np.array([int(s.label) for s in samples], dtype=np.int64),
            provenance=provenance,
            reconstructed=np.array([s.reconstructed for s in samples]),
            truth=np.array([s.truth for s in samples]),
        )


def _provenance(spec: ProtocolSpec, m: SourceModel | None, split: str, theory: bool) -> dict:
    protocol = spec.to_dict()
    if theory:
        # noiseless data consumes no randomness, so the seed is not part of it
        protocol["seed"] = None
    return {
        "protocol": protocol,
        "source": None if m is None else m.to_dict(),
        "seed": protocol["seed"],
        "split": split,
        "theory": theory,
        "plan": ms.get_plan(spec.plan).to_dict(),
    }


def _experimental_samples(spec, m, split, ti, fi, p_values):
    theta, phi = spec.thetas[ti], spec.phis[fi]
    s = SPLITS[split]
    pool = build_pool(theta, phi, m, spec.plan, spec.shots,
                      substream(spec.seed, _STREAM_POOL, s, ti, fi))
    for k, p in enumerate(p_values):
        rng = substream(spec.seed, _STREAM_MIX, s, ti, fi, k)
        features, recon = mix_sample(pool, p, rng)
        yield LabeledSample(features, ppt_label(recon), theta, phi, float(p), recon,
                            werner_like(pool.entangled_state, p))


def margin_p_values(boundary: float | None, spec: ProtocolSpec, rng=None) -> np.ndarray:
    """Training p values around the PPT boundary, clipped to [0.01, 0.99].

    With ``rng`` the values are i.i.d. uniform draws in the window; without
    it they form an even grid over the window.
    """
    centre = 0.5 if boundary is None else boundary
    lo, hi = centre - spec.margin_halfwidth, centre + spec.margin_halfwidth
    if rng is None:
        ps = np.linspace(lo, hi, spec.margin_samples)
    else:
        ps = rng.uniform(lo, hi, spec.margin_samples)
    return np.clip(ps, P_MIN, P_MAX)


def gen_linear_dataset(spec: ProtocolSpec, m: SourceModel, split: str = "train") -> Dataset:
    """Uniform p grid for every theta (and phi), labeled by PPT on reconstructions."""
    samples = []
    for ti in range(len(spec.thetas)):
        for fi in range(len(spec.phis)):
            samples.extend(_experimental_samples(spec, m, split, ti, fi, spec.p_grid))
    return Dataset.from_samples(samples, _provenance(spec, m, split, theory=False))


def gen_nonlinear_dataset(spec: ProtocolSpec, m: SourceModel) -> tuple[Dataset, Dataset]:
    """Margin-sampled training set and uniform-grid test set over all (theta, phi)."""
    train, test = [], []
    s = SPLITS["train"]
    for ti, theta in enumerate(spec.thetas):
        for fi, phi in enumerate(spec.phis):
            boundary = ppt_boundary_state(noisy_source_state(theta, phi, m))
            ps = margin_p_values(boundary, spec, substream(spec.seed, _STREAM_MARGIN, s, ti, fi))
            train.extend(_experimental_samples(spec, m, "train", ti, fi, ps))
            test.extend(_experimental_samples(spec, m, "test", ti, fi, spec.p_grid))
    return (Dataset.from_samples(train, _provenance(spec, m, "train", theory=False)),
            Dataset.from_samples(test, _provenance(spec, m, "test", theory=False)))


def _theory_samples(spec, ti, fi, p_values):
    theta, phi = spec.thetas[ti], spec.phis[fi]
    pure = density_from_ket(ket_from_params(theta, phi))
    plan = ms.get_plan(spec.plan)
    pure_features = ms.features_exact(pure, plan)
    for p in p_values:
        rho = werner_like(pure, float(p))
        yield LabeledSample(float(p) * pure_features, ppt_label(rho), theta, phi, float(p), rho, rho)


def gen_theory_dataset(spec: ProtocolSpec, split: str = "train"):
    """Noiseless counterpart of the protocol generators.

    Features are exact correlators of the ideal states (linear in p, so they
    are computed as p times the pure-state features) and labels are PPT on
    the exact matrices.  For the nonlinear protocol the training margin is an
    even grid, so the result does not depend on the seed.
    """
    if spec.kind == "linear":
        samples = [s for ti in range(len(spec.thetas)) for fi in range(len(spec.phis))
                   for s in _theory_samples(spec, ti, fi, spec.p_grid)]
        return Dataset.from_samples(samples, _provenance(spec, None, split, theory=True))
    train, test = [], []
    for ti, theta in enumerate(spec.thetas):
        for fi, phi in enumerate(spec.phis):
            boundary = ppt_boundary_state(density_from_ket(ket_from_params(theta, phi)))
            train.extend(_theory_samples(spec, ti, fi, margin_p_values(boundary, spec)))
            test.extend(_theory_samples(spec, ti, fi, spec.p_grid))
    return (Dataset.from_samples(train, _provenance(spec, None, "train", theory=True)),
            Dataset.from_samples(test, _provenance(spec, None, "test", theory=True)))


def boundary_for(theta: float, phi: float, m: SourceModel | None) -> float | None:
    """PPT boundary p* of the mixture built on the (noisy, if ``m``) source state."""
    if m is None:
        rho = density_from_ket(ket_from_params(theta, phi))
    else:
        rho = noisy_source_state(theta, phi, m)
    return ppt_boundary_state(rho)
