"""Parametric Hamiltonians and loop generators.

All Hamiltonians use hbar = 1 and frequencies in rad/s.  Model callables are
vectorised: they accept parameter arrays of shape ``(..., N)`` and return
matrix stacks of shape ``(..., n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import expm

from .errors import DegenerateLoop, GeoPhaseError
from .linalg import TWO_PI, dagger, hermiticity_error

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
I2 = np.eye(2, dtype=complex)

#: m-values of the spin-3/2 basis, in the block order used throughout
SPIN32_M = np.array([1.5, -1.5, 0.5, -0.5])

MIN_STEPS = 8


def check_hermitian(h: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {h.shape}")
    scale = max(float(np.max(np.abs(h), initial=0.0)), 1.0)
    err = hermiticity_error(h)
    if err > rtol * scale:
        raise GeoPhaseError(f"matrix not Hermitian (residual {err:.3e})")
    return h


@dataclass(frozen=True)
class ParametricHamiltonian:
    """Map ``R -> H(R)`` together with the level multiplicity pattern.

    ``degeneracies`` lists the multiplicity of every distinct level in
    ascending energy order, e.g. ``(1, 1)`` for a spin-1/2 and ``(2, 2)`` for
    the quadrupole model.
    """

    name: str
    dim: int
    nparams: int
    func: Callable[[np.ndarray], np.ndarray]
    degeneracies: tuple[int, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.degeneracies) != self.dim:
            raise ValueError("degeneracies must sum to the matrix dimension")

    def __call__(self, R) -> np.ndarray:
        return self.eval(R)

    def eval(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        if R.shape[-1] != self.nparams:
            raise ValueError(
                f"{self.name}: expected {self.nparams} parameters, got {R.shape[-1]}"
            )
        if not np.all(np.isfinite(R)):
            raise ValueError("parameter point has non-finite entries")
        return check_hermitian(self.func(R))

    def level_slice(self, level: int) -> slice:
        """Indices (into the ascending spectrum) belonging to ``level``."""
        if not 0 <= level < len(self.degeneracies):
            raise IndexError(f"level {level} out of range for {self.name}")
        start = sum(self.degeneracies[:level])
        return slice(start, start + self.degeneracies[level])


@dataclass(frozen=True)
class ParameterLoop:
    """Closed curve ``t -> R(t)``, ``t in [0, period]``, sampled ``steps`` times."""

    name: str
    sampler: Callable[[np.ndarray], np.ndarray]
    period: float
    steps: int
    closure_tol: float = 1e-10
    params: Mapping[str, float] = field(default_factory=dict)
    #: parameters are angles; closure is checked modulo 2 pi
    angular: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if not np.isfinite(self.period) or self.period <= 0:
            raise DegenerateLoop("loop period must be positive and finite")
        diff = (self.sampler(np.array([self.period]))[0]
                - self.sampler(np.array([0.0]))[0])
        if self.angular:
            diff = np.mod(diff + np.pi, TWO_PI) - np.pi
        gap = float(np.max(np.abs(diff)))
        if gap > self.closure_tol:
            raise DegenerateLoop(f"{self.name}: loop not closed (|R(T)-R(0)| = {gap:.3e})")

    def with_steps(self, steps: int) -> "ParameterLoop":
        return ParameterLoop(self.name, self.sampler, self.period, int(steps),
                             self.closure_tol, self.params, self.angular)

    def times(self, closed: bool = False) -> np.ndarray:
        n = self.steps + 1 if closed else self.steps
        return np.arange(n) * (self.period / self.steps)

    def points(self, closed: bool = False) -> np.ndarray:
        """Samples ``R(t_k)``; with ``closed=True`` the first sample is repeated at the end."""
        pts = np.asarray(self.sampler(self.times()), dtype=float)
        if closed:
            pts = np.concatenate([pts, pts[:1]], axis=0)
        return pts

    def tangents(self) -> np.ndarray:
        """Central finite-difference ``dR/dt`` at every sample."""
        pts = self.points()
        dt = self.period / self.steps
        return (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)) / (2.0 * dt)


# --------------------------------------------------------------------------
# spin 1/2


def spin_half_hamiltonian(B) -> np.ndarray:
    """``H = (1/2) B . sigma`` so that the two levels are ``+-|B|/2``."""
    B = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(B)):
        raise ValueError("field has non-finite entries")
    return 0.5 * np.einsum("...k,kij->...ij", B.astype(complex), PAULI)


def spin_half_model() -> ParametricHamiltonian:
    return ParametricHamiltonian("spin_half", 2, 3, spin_half_hamiltonian, (1, 1))


def latitude_loop(theta: float, omega_r: float, steps: int, magnitude: float = 1.0) -> ParameterLoop:
    """Field of fixed length precessing uniformly at polar angle ``theta``."""
    if not 0.0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    if omega_r == 0 or not np.isfinite(omega_r):
        raise DegenerateLoop("degenerate loop: omega_r must be non-zero")
    st, ct = np.sin(theta), np.cos(theta)

    def sampler(t):
        phi = omega_r * np.asarray(t, dtype=float)
        return magnitude * np.stack(
            [st * np.cos(phi), st * np.sin(phi), np.full_like(phi, ct)], axis=-1)

    return ParameterLoop("latitude", sampler, TWO_PI / abs(omega_r), int(steps),
                         params={"theta": theta, "omega_r": omega_r, "magnitude": magnitude})


def plaquette_loop(center, axes: tuple[int, int], size: float, steps: int) -> ParameterLoop:
    """Counter-clockwise square of side ``size`` in the ``axes`` plane.

    The loop has unit period and is traversed at constant speed.
    """
    center = np.asarray(center, dtype=float)
    i, j = axes
    if i == j:
        raise ValueError("plaquette axes must differ")
    corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1], [-1, -1]]) * (size / 2)

    def sampler(t):
        s = np.mod(np.asarray(t, dtype=float), 1.0) * 4.0
        k = np.minimum(np.floor(s).astype(int), 3)
        f = (s - k)[..., None]
        uv = corners[k] * (1 - f) + corners[k + 1] * f
        pts = np.broadcast_to(center, s.shape + center.shape).copy()
        pts[..., i] += uv[..., 0]
        pts[..., j] += uv[..., 1]
        return pts

    return ParameterLoop("plaquette", sampler, 1.0, int(steps),
                         params={"size": size, "axis_i": i, "axis_j": j})


# --------------------------------------------------------------------------
# two coupled spins


@dataclass(frozen=True)
class SpinRegisterSpec:
    omega01: float
    omega02: float
    J: float
    omega1: float
    omega_r: float

    def __post_init__(self):
        vals = (self.omega01, self.omega02, self.J, self.omega1, self.omega_r)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("all frequencies must be finite")
        if self.omega01 == self.omega02:
            raise ValueError("the two spins must not be identical (omega01 == omega02)")

    def swapped(self) -> "SpinRegisterSpec":
        return SpinRegisterSpec(self.omega02, self.omega01, self.J, self.omega1, self.omega_r)


def two_spin_hamiltonian(spec: SpinRegisterSpec) -> ParametricHamiltonian:
    """Two spins in a common transverse field ``R = (b_x, b_y)``.

    Spin ``a`` sees ``B_a = (b_x, b_y, omega0a)``; the coupling is
    ``(J/4) sigma_z x sigma_z``.
    """
    zz = np.kron(SIGMA_Z, SIGMA_Z)

    def func(R):
        R = np.asarray(R, dtype=float)
        bx, by = R[..., 0], R[..., 1]
        b1 = np.stack([bx, by, np.full_like(bx, spec.omega01)], axis=-1)
        b2 = np.stack([bx, by, np.full_like(bx, spec.omega02)], axis=-1)
        h1 = spin_half_hamiltonian(b1)
        h2 = spin_half_hamiltonian(b2)
        return (np.einsum("...ij,kl->...ikjl", h1, I2).reshape(R.shape[:-1] + (4, 4))
                + np.einsum("ij,...kl->...ikjl", I2, h2).reshape(R.shape[:-1] + (4, 4))
                + 0.25 * spec.J * zz)

    return ParametricHamiltonian(
        "two_spin", 4, 2, func, (1, 1, 1, 1),
        params={"omega01": spec.omega01, "omega02": spec.omega02, "J": spec.J,
                "omega1": spec.omega1, "omega_r": spec.omega_r})


def circular_drive_loop(omega1: float, omega_r: float, steps: int, polarization: int = 1) -> ParameterLoop:
    """Transverse field of amplitude ``omega1`` rotating at ``omega_r``.

    ``polarization=+1`` rotates the field clockwise about +z (azimuth
    ``-omega_r t``), the sense for which ``tan th* = sin th / (cos th + r)``.
    """
    if omega_r == 0:
        raise DegenerateLoop("degenerate loop: omega_r must be non-zero")
    if polarization not in (1, -1):
        raise ValueError("polarization must be +1 or -1")

    def sampler(t):
        phi = -polarization * omega_r * np.asarray(t, dtype=float)
        return omega1 * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    return ParameterLoop("circular_drive", sampler, TWO_PI / abs(omega_r), int(steps),
                         params={"omega1": omega1, "omega_r": omega_r,
                                 "polarization": polarization})


# --------------------------------------------------------------------------
# spin 3/2 quadrupole


def spin32_generators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular momentum matrices in the basis ``|3/2>, |-3/2>, |1/2>, |-1/2>``."""
    s = np.sqrt(3.0) / 2.0
    J3 = np.diag(SPIN32_M).astype(complex)
    zero = np.zeros((2, 2), dtype=complex)
    J1 = np.block([[zero, s * I2], [s * I2, SIGMA_X]])
    J2 = np.block([[zero, -1j * s * SIGMA_Z], [1j * s * SIGMA_Z, SIGMA_Y]])
    return J1, J2, J3


@dataclass(frozen=True)
class QuadrupoleSpec:
    omega0: float
    omega1: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.omega0) and np.isfinite(self.omega1) and np.isfinite(self.theta)):
            raise ValueError("quadrupole parameters must be finite")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if not 0.0 <= self.theta < np.pi / 2:
            raise ValueError("theta must lie in [0, pi/2)")

    @property
    def period(self) -> float:
        return TWO_PI / abs(self.omega1)


def quadrupole_h0(omega0: float) -> np.ndarray:
    """``omega0 (J3^2 - j(j+1)/3)`` for j = 3/2."""
    _, _, J3 = spin32_generators()
    return omega0 * (J3 @ J3 - 1.25 * np.eye(4))


def tilt_operator(theta: float) -> np.ndarray:
    """``exp(-i theta J2)``."""
    _, J2, _ = spin32_generators()
    return expm(-1j * theta * J2)


def _quadrupole_func(spec: QuadrupoleSpec):
    W = tilt_operator(spec.theta)
    M = W @ quadrupole_h0(spec.omega0) @ dagger(W)
    dm = SPIN32_M[:, None] - SPIN32_M[None, :]

    def func(R):
        phi = np.asarray(R, dtype=float)[..., 0]
        return np.exp(-1j * phi[..., None, None] * dm) * M

    return func


def quadrupole_lab_hamiltonian(spec: QuadrupoleSpec, t) -> np.ndarray:
    """Lab-frame Hamiltonian with the field azimuth ``phi = omega1 t``."""
    phi = spec.omega1 * np.asarray(t, dtype=float)
    return _quadrupole_func(spec)(phi[..., None])


def quadrupole_model(spec: QuadrupoleSpec) -> ParametricHamiltonian:
    """Quadrupole Hamiltonian as a function of the field azimuth ``R = (phi,)``."""
    return ParametricHamiltonian("quadrupole", 4, 1, _quadrupole_func(spec), (2, 2),
                                 params={"omega0": spec.omega0, "omega1": spec.omega1,
                                         "theta": spec.theta})


def rotation_loop(omega1: float, steps: int) -> ParameterLoop:
    """Uniform azimuthal rotation ``phi(t) = omega1 t`` over one period."""
    if omega1 == 0:
        raise DegenerateLoop("degenerate loop: omega1 must be non-zero")

    def sampler(t):
        return (omega1 * np.asarray(t, dtype=float))[..., None]

    return ParameterLoop("rotation", sampler, TWO_PI / abs(omega1), int(steps),
                         params={"omega1": omega1}, angular=True)


# --------------------------------------------------------------------------
# three-level system driven through arg H12


def three_level_model(template) -> ParametricHamiltonian:
    """3x3 Hamiltonian whose ``H12`` entry is ``|H12| exp(i phi12)`` with ``R = (phi12,)``."""
    T0 = check_hermitian(np.asarray(template, dtype=complex))
    if T0.shape != (3, 3):
        raise ValueError("three-level template must be 3x3")
    mag = abs(T0[0, 1])

    def func(R):
        phi = np.asarray(R, dtype=float)[..., 0]
        H = np.broadcast_to(T0, phi.shape + (3, 3)).copy()
        H[..., 0, 1] = mag * np.exp(1j * phi)
        H[..., 1, 0] = mag * np.exp(-1j * phi)
        return H

    return ParametricHamiltonian("three_level", 3, 1, func, (1, 1, 1),
                                 params={"abs_h12": float(mag)})


def phase_loop(steps: int, phi0: float = 0.0, winding: int = 1) -> ParameterLoop:
    """``phi(t) = phi0 + 2 pi winding t`` on ``t in [0, 1]``."""

    def sampler(t):
        return (phi0 + TWO_PI * winding * np.asarray(t, dtype=float))[..., None]

    return ParameterLoop("phase", sampler, 1.0, int(steps),
                         params={"phi0": phi0, "winding": winding}, angular=True)


def constant_loop(point, steps: int, period: float = 1.0) -> ParameterLoop:
    point = np.asarray(point, dtype=float)

    def sampler(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(point, t.shape + point.shape).copy()

    return ParameterLoop("constant", sampler, period, int(steps))
