"""Two-qubit state algebra: Werner-like states, partial transpose, PPT labels.

Basis ordering is (HH, HV, VH, VV) with H the computational 0, so index
``2 * a + b`` addresses the joint state of photon A in ``a`` and B in ``b``.
Density matrices are plain ``(4, 4)`` complex numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .jacobi import jacobi_eigh

HH, HV, VH, VV = range(4)
DIM = 4

IDENTITY_4 = np.eye(DIM, dtype=complex)
MAXIMALLY_MIXED = IDENTITY_4 / DIM

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_YY = np.kron(SIGMA_Y, SIGMA_Y)

BOUNDARY_MAX_ITER = 60
RANK_TOL = 1e-14


class Label(enum.IntEnum):
    SEPARABLE = 0
    ENTANGLED = 1


@dataclass(frozen=True)
class StateParams:
    """Parameters of the Werner-like family: amplitude angle, phase, mixing."""

    theta: float
    phi: float
    p: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2:
            raise ValueError(f"theta={self.theta} outside [0, pi/2]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2pi)")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    def density(self) -> np.ndarray:
        return werner_like(density_from_ket(ket_from_params(self.theta, self.phi)), self.p)


def ket_from_params(theta: float, phi: float) -> np.ndarray:
    """cos(theta)|HV> + exp(i phi) sin(theta)|VH>."""
    psi = np.zeros(DIM, dtype=complex)
    psi[HV] = math.cos(theta)
    psi[VH] = complex(math.cos(phi), math.sin(phi)) * math.sin(theta)
    return psi


def density_from_ket(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"ket is not normalized (norm^2 = {norm})")
    return np.outer(psi, psi.conj())


def werner_like(psi_density, p: float) -> np.ndarray:
    """p * rho + (1 - p) * I/4."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing probability p={p} outside [0, 1]")
    return p * np.asarray(psi_density, dtype=complex) + (1.0 - p) * MAXIMALLY_MIXED


def bell_state() -> np.ndarray:
    """Density matrix of (|HV> + |VH>)/sqrt(2)."""
    return density_from_ket(ket_from_params(math.pi / 4, 0.0))


def check_density(rho, tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid 4x4 density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise ValueError(f"expected shape (4, 4), got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"trace {tr} differs from 1")
    lo = hermitian_eigenvalues(rho)[0]
    if lo < -psd_tol:
        raise ValueError(f"not positive semidefinite (min eigenvalue {lo:.3g})")


def partial_transpose(rho) -> np.ndarray:
    """Transpose the indices of the second subsystem (photon B)."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    return r.transpose(0, 3, 2, 1).reshape(DIM, DIM)


def hermitian_eigenvalues(m) -> np.ndarray:
    return jacobi_eigh(m)[0]


def hermitian_eigh(m):
    return jacobi_eigh(m)


def min_pt_eigenvalue(rho) -> float:
    return float(hermitian_eigenvalues(partial_transpose(rho))[0])


def ppt_label(rho, tol: float = 0.0) -> Label:
    """Entangled iff the partial transpose has an eigenvalue below ``-tol``.

    Exact for two qubits, so this is the ground-truth separability label.
    """
    return Label.ENTANGLED if min_pt_eigenvalue(rho) < -tol else Label.SEPARABLE


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def psd_sqrt(m) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues at round-off level count as exact zeros."""
    w, v = hermitian_eigh(m)
    w = np.where(w > RANK_TOL * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(rho) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4).

    The l_i are the singular values of sqrt(rho) (Y⊗Y) sqrt(rho)* (Y⊗Y), i.e.
    the square roots of the eigenvalues of sqrt(rho) rho~ sqrt(rho), but
    without squaring and re-rooting small values.  Eigenvalues of rho at
    round-off level are treated as exact zeros.
    """
    sqrt_rho = psd_sqrt(rho)
    lam = np.linalg.svd(sqrt_rho @ _YY @ sqrt_rho.conj() @ _YY, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity_to_pure(rho, psi) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(np.vdot(psi, np.asarray(rho) @ psi)))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr |sqrt(rho) sqrt(sigma)|)^2."""
    s = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(np.sum(s) ** 2)


def ppt_boundary_state(rho, tol: float = 1e-10) -> float | None:
    """Mixing probability at which p*rho + (1-p)*I/4 turns entangled.

    Returns ``None`` when ``rho`` itself is PPT, i.e. the family has no
    entangled region.
    """
    if min_pt_eigenvalue(rho) >= 0.0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(BOUNDARY_MAX_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if min_pt_eigenvalue(werner_like(rho, mid)) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def ppt_boundary(theta: float, phi: float = 0.0, tol: float = 1e-10) -> float | None:
    """PPT boundary p* of the Werner-like family built on ket(theta, phi).

    ``None`` for theta at 0 or pi/2, where the family is never entangled.
    """
    if abs(math.sin(2.0 * theta)) < 1e-12:
        return None
    return ppt_boundary_state(density_from_ket(ket_from_params(theta, phi)), tol=tol)
