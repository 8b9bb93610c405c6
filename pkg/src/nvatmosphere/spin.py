"""Four-level electron ⊗ nuclear spin model.

Basis order (fixed everywhere in the package)::

    0 = |ms=0,  ↑>    1 = |ms=0,  ↓>
    2 = |ms=-1, ↑>    3 = |ms=-1, ↓>

Hamiltonians are 4x4 Hermitian arrays in MHz; propagation over a time ``t``
(µs) applies ``exp(-i 2π H t)``. Density matrices are plain complex arrays.
"""

from __future__ import annotations

import enum

import numpy as np
from numpy.typing import NDArray

from .params import MWStep, PhysicalParams

ComplexMatrix = NDArray[np.complex128]

DIM = 4
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9

# mask of electron coherences: elements linking the ms=0 block to the ms=-1 block
_ELECTRON_COHERENCE = np.zeros((DIM, DIM), dtype=bool)
_ELECTRON_COHERENCE[:2, 2:] = True
_ELECTRON_COHERENCE[2:, :2] = True


class SpinModelError(ValueError):
    pass


class DephasingShape(str, enum.Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"


def initial_state(p: float) -> ComplexMatrix:
    """Electron in ms=0, nuclear spin diagonal with polarization ``p``."""
    if not np.isfinite(p) or abs(p) > 1:
        raise SpinModelError(f"invalid polarization {p!r}; must lie in [-1, 1]")
    rho = np.zeros((DIM, DIM), dtype=np.complex128)
    rho[0, 0] = (1 + p) / 2
    rho[1, 1] = (1 - p) / 2
    return rho


def check_density_matrix(rho: ComplexMatrix) -> None:
    """Raise if ``rho`` violates Hermiticity, unit trace or positivity."""
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise SpinModelError(f"density matrix must be {DIM}x{DIM}, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise SpinModelError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise SpinModelError(f"density matrix trace {tr} != 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -POSITIVITY_TOL:
        raise SpinModelError(f"density matrix not positive (min eigenvalue {lam:.3e})")


def check_hamiltonian(h: ComplexMatrix) -> None:
    h = np.asarray(h)
    if h.shape != (DIM, DIM):
        raise SpinModelError(f"Hamiltonian must be {DIM}x{DIM}, got {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
        raise SpinModelError("Hamiltonian not Hermitian")


def free_hamiltonian_at(params: PhysicalParams, f_drive: float, include_transverse: bool = False) -> ComplexMatrix:
    """Free Hamiltonian in the frame rotating at an arbitrary drive frequency (MHz).

    With this choice the (0,2) coherence rotates at ``f1 - f_drive``, the (1,3)
    coherence at ``f2 - f_drive`` and the nuclear (0,1) coherence at ``f_rf``.
    """
    f_rf = params.f_rf_mhz
    h = np.diag([0.0, f_rf, params.f1 - f_drive, f_rf + params.f2 - f_drive]).astype(np.complex128)
    if include_transverse:
        # S_z * a_perp * I_x only acts inside the ms=-1 block
        h[2, 3] = h[3, 2] = params.a_perp / 2
    return h


def build_free_hamiltonian(params: PhysicalParams, mw_step: MWStep | str,
                           include_transverse: bool = False) -> ComplexMatrix:
    return free_hamiltonian_at(params, params.drive_frequency(mw_step), include_transverse)


def add_drive(h: ComplexMatrix, rabi: float, phase: float = 0.0) -> ComplexMatrix:
    """Return ``h`` plus an RWA microwave coupling |0,m> <-> |-1,m> for both m."""
    if not rabi > 0:
        raise SpinModelError(f"Rabi frequency must be positive, got {rabi!r}")
    out = np.array(h, dtype=np.complex128, copy=True)
    g = 0.5 * rabi * np.exp(1j * phase)
    out[0, 2] += g
    out[1, 3] += g
    out[2, 0] += np.conj(g)
    out[3, 1] += np.conj(g)
    return out


def build_driven_hamiltonian(params: PhysicalParams, mw_step: MWStep | str,
                             rabi: float | None = None, phase: float = 0.0,
                             include_transverse: bool = False) -> ComplexMatrix:
    """Free Hamiltonian of ``mw_step`` plus its microwave drive.

    ``rabi`` defaults to the per-step rate set by the measured π duration.
    """
    if rabi is None:
        rabi = params.rabi(mw_step)
    return add_drive(build_free_hamiltonian(params, mw_step, include_transverse), rabi, phase)


def nuclear_drive_hamiltonian(params: PhysicalParams, rabi: float | None = None,
                              phase: float = 0.0) -> ComplexMatrix:
    """Resonant RF drive on the nuclear transition of the ms=0 manifold.

    Works in the frame rotating at ``f_rf``; the ms=-1 nuclear transition is
    detuned by ``f2 - f1`` in this frame.
    """
    if rabi is None:
        rabi = params.rabi_rf
    if not rabi > 0:
        raise SpinModelError(f"Rabi frequency must be positive, got {rabi!r}")
    h = np.zeros((DIM, DIM), dtype=np.complex128)
    h[3, 3] = params.f2 - params.f1
    g = 0.5 * rabi * np.exp(1j * phase)
    h[0, 1] = h[2, 3] = g
    h[1, 0] = h[3, 2] = np.conj(g)
    return h


def propagator(h: ComplexMatrix, dt: float) -> ComplexMatrix:
    """``exp(-i 2π h dt)`` via Hermitian eigendecomposition."""
    if dt < 0:
        raise SpinModelError(f"negative evolution time {dt!r}")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-2j * np.pi * w * dt)) @ v.conj().T


def propagators(h: ComplexMatrix, times: NDArray[np.float64]) -> NDArray[np.complex128]:
    """Stack of propagators for many evolution times, shape (n, 4, 4)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise SpinModelError("negative evolution time")
    w, v = np.linalg.eigh(h)
    phases = np.exp(-2j * np.pi * np.outer(times, w))
    return np.einsum("ij,tj,kj->tik", v, phases, v.conj())


def propagate_unitary(rho: ComplexMatrix, h: ComplexMatrix, dt: float) -> ComplexMatrix:
    if dt < 0:
        raise SpinModelError(f"negative evolution time {dt!r}")
    if dt == 0:
        return np.array(rho, dtype=np.complex128, copy=True)
    u = propagator(h, dt)
    return u @ rho @ u.conj().T


def dephasing_factor(tau: float | NDArray[np.float64], t2_star: float,
                     shape: DephasingShape | str = DephasingShape.EXPONENTIAL):
    shape = DephasingShape(shape)
    x = np.asarray(tau, dtype=float) / t2_star
    if shape is DephasingShape.EXPONENTIAL:
        return np.exp(-x)
    return np.exp(-x * x)


def apply_dephasing(rho: ComplexMatrix, tau: float, t2_star: float,
                    shape: DephasingShape | str = DephasingShape.EXPONENTIAL) -> ComplexMatrix:
    """Damp every electron coherence by the T2* envelope after a wait ``tau``.

    Populations and nuclear coherences are untouched.
    """
    if tau < 0:
        raise SpinModelError(f"negative dephasing time {tau!r}")
    out = np.array(rho, dtype=np.complex128, copy=True)
    if np.isinf(tau):
        out[_ELECTRON_COHERENCE] = 0
    elif tau > 0:
        out[_ELECTRON_COHERENCE] *= dephasing_factor(tau, t2_star, shape)
    return out


def electron_zero_population(rho: ComplexMatrix) -> float:
    return float(np.real(rho[..., 0, 0] + rho[..., 1, 1]))


def nuclear_polarization(rho: ComplexMatrix) -> float:
    """P = (ρ00 + ρ22) - (ρ11 + ρ33)."""
    return float(np.real(rho[0, 0] + rho[2, 2] - rho[1, 1] - rho[3, 3]))


def nuclear_rotation(theta: float) -> ComplexMatrix:
    """Instantaneous nuclear rotation by ``theta`` about y inside the ms=0 block."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    u = np.eye(DIM, dtype=np.complex128)
    u[0, 0], u[0, 1], u[1, 0], u[1, 1] = c, -s, s, c
    return u


def selective_mw_rotation(angle: float, manifold: int, phase: float = 0.0) -> ComplexMatrix:
    """Instantaneous electron rotation restricted to one nuclear manifold.

    ``manifold`` is 0 for ↑ and 1 for ↓. Used for the infinite-bandwidth,
    perfectly selective pulse limit.
    """
    i, j = manifold, manifold + 2
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    u = np.eye(DIM, dtype=np.complex128)
    u[i, i] = u[j, j] = c
    u[i, j] = -1j * s * np.exp(1j * phase)
    u[j, i] = -1j * s * np.exp(-1j * phase)
    return u
