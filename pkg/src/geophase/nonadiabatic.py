"""Exact rotating-frame treatment of a spin in a circularly polarized field.

Conventions
-----------
A field of magnitude ``Omega`` tilted by ``theta`` from +z rotates about z at
``omega_r``.  ``polarization=+1`` is the sense whose rotating-frame
Hamiltonian is ``H0 + omega_r J3``, i.e. the field azimuth runs as
``-omega_r t`` (see ``models.circular_drive_loop``); then
``tan th* = sin th / (cos th + r)`` with ``r = omega_r / Omega``.
``polarization=-1`` is the opposite sense (``models.latitude_loop`` with
positive ``omega_r``).

Two phase references are carried side by side:

* ``equator_referenced``: the rotating-frame geometric phase
  ``-p 2 pi m cos th*``, for which the rotating-frame one-cycle factor is
  exactly ``exp(-i phi_D + i gamma)``.
* ``pole_referenced``: the phase seen in the lab frame,
  ``p 2 pi m (1 - cos th*)``; it differs from the former by the frame factor
  ``(-1)^(2j)`` and tends to the usual Berry phase as ``r -> 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EchoMismatch
from .linalg import TWO_PI, expm_hermitian, wrap_phase
from .models import SIGMA_X, SIGMA_Y, SIGMA_Z, SpinRegisterSpec

SX, SY, SZ = SIGMA_X / 2, SIGMA_Y / 2, SIGMA_Z / 2
S_PLUS = SX + 1j * SY
S_MINUS = SX - 1j * SY


def _check_polarization(p):
    if p not in (1, -1):
        raise ValueError("polarization must be +1 or -1")


# --------------------------------------------------------------------------
# exact Rabi solution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RotatingFrameSolution:
    delta_omega: float
    Omega: float
    t: float
    #: exact parameters of U = exp(zeta S+ - zeta* S-) exp(i phi Sz), up to sign
    zeta: complex
    phi: float
    U: np.ndarray

    @property
    def transition_amplitude(self) -> float:
        """``|<down|U|up>|``, equal to ``omega_perp |sin(Omega t/2)| / Omega``."""
        return float(np.sin(abs(self.zeta)))

    def printed_zeta(self, omega_perp: float) -> complex:
        """Closed-form rotation parameter with the sine normalization."""
        a = self.Omega * self.t / 2
        mod = omega_perp * np.sin(a) / self.Omega
        alpha = np.arctan2(self.delta_omega * np.sin(a), self.Omega * np.cos(a))
        return complex(mod * np.exp(1j * (self.delta_omega * self.t + alpha + np.pi / 2)))


def rabi_lab_hamiltonian(omega_par, omega_perp, omega_r, n, t):
    """``omega_par Sz + omega_perp (n(t) . S)`` with ``n`` rotating counter-clockwise."""
    n = np.asarray(n, dtype=float)
    c, s = np.cos(omega_r * np.asarray(t)), np.sin(omega_r * np.asarray(t))
    nx = n[0] * c - n[1] * s
    ny = n[0] * s + n[1] * c
    return (omega_par * SZ + omega_perp * (np.multiply.outer(nx, SX) + np.multiply.outer(ny, SY)))


def decompose_su2(U: np.ndarray) -> tuple[complex, float]:
    """``(zeta, phi)`` with ``U = +-exp(zeta S+ - zeta* S-) exp(i phi Sz)``."""
    U = U / np.sqrt(np.linalg.det(U))
    a, b = U[0, 0], U[0, 1]
    phi = 2 * np.angle(a) if abs(a) > 1e-300 else 0.0
    mod = np.arcsin(min(abs(b), 1.0))
    zeta = mod * np.exp(1j * (np.angle(b) + phi / 2)) if abs(b) > 0 else 0j
    return complex(zeta), float(phi)


def rabi_evolution(omega_par: float, omega_perp: float, omega_r: float, n, t: float) -> RotatingFrameSolution:
    """Exact propagator of a spin-1/2 in ``B0 z + B1`` with ``B1`` rotating at ``omega_r``.

    ``n`` is the unit transverse direction of ``B1`` at ``t = 0``.
    """
    n = np.asarray(n, dtype=float)
    if n.shape != (2,) and n.shape != (3,):
        raise ValueError("n must be a transverse 2- or 3-vector")
    n = n[:2] / np.linalg.norm(n[:2])
    dw = omega_par - omega_r
    Om = float(np.hypot(dw, omega_perp))
    if Om <= 0:
        raise ValueError("effective Rabi frequency must be positive")
    h_rot = dw * SZ + omega_perp * (n[0] * SX + n[1] * SY)
    U = expm_hermitian(omega_r * SZ, -1j * t) @ expm_hermitian(h_rot, -1j * t)
    zeta, phi = decompose_su2(U)
    return RotatingFrameSolution(dw, Om, float(t), zeta, phi, U)


# --------------------------------------------------------------------------
# effective angle and cycle phases
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveAngle:
    theta: float
    r: float
    polarization: int
    theta_star: float


def effective_angle(theta: float, omega_r: float, Omega: float, polarization: int = 1) -> EffectiveAngle:
    """Tilt of the rotating-frame effective field.

    ``atan2`` of ``(sin th, cos th + p r)`` lies in ``[0, pi]`` for
    ``th`` in ``[0, pi]`` and is continuous in ``r`` from ``th*(0) = th``,
    including through ``cos th + p r = 0`` where it passes ``pi/2``.
    """
    _check_polarization(polarization)
    if Omega <= 0:
        raise ValueError("Omega must be positive")
    r = omega_r / Omega
    ts = float(np.arctan2(np.sin(theta), np.cos(theta) + polarization * r))
    return EffectiveAngle(float(theta), float(r), polarization, ts)


@dataclass(frozen=True)
class PhasePair:
    phi_D: float
    gamma: float
    m: float
    polarization: int = 1
    theta_star: float = float("nan")

    @property
    def equator_referenced(self) -> float:
        return self.gamma

    @property
    def pole_referenced(self) -> float:
        return self.polarization * TWO_PI * self.m * (1 - np.cos(self.theta_star))

    @property
    def printed_pole_form(self) -> float:
        """Literal ``-+ m 2 pi (1 - cos th*)`` for polarization ``+-``."""
        return -self.pole_referenced

    @property
    def solid_angle_shift(self) -> float:
        """Shift between ``|+1/2>`` and ``|-1/2>``: ``-2 pi cos th*``."""
        return -TWO_PI * float(np.cos(self.theta_star))

    @property
    def total(self) -> float:
        return -self.phi_D + self.gamma


def cycle_phases(m: float, theta: float, theta_star: float, Omega: float, omega_r: float,
                 polarization: int = 1) -> PhasePair:
    """Dynamic and geometric parts of the one-cycle phase of projection ``m``."""
    _check_polarization(polarization)
    if omega_r == 0:
        raise ValueError("omega_r must be non-zero")
    if abs(2 * m - round(2 * m)) > 1e-12:
        raise ValueError("m must be integer or half-integer")
    phi_D = TWO_PI * m * (Omega / abs(omega_r)) * np.cos(theta - theta_star)
    gamma = -polarization * TWO_PI * m * np.cos(theta_star)
    return PhasePair(float(phi_D), float(gamma), float(m), polarization, float(theta_star))


def tilted_field_hamiltonian(theta: float, Omega: float, azimuth: float = 0.0) -> np.ndarray:
    return Omega * (np.sin(theta) * (np.cos(azimuth) * SX + np.sin(azimuth) * SY)
                    + np.cos(theta) * SZ)


def one_cycle_propagators(theta: float, Omega: float, omega_r: float, polarization: int = 1):
    """Rotating-frame and lab-frame one-cycle propagators of a spin-1/2.

    Returns ``(U_rot, U_lab, n_star)`` where ``n_star`` is the cyclic state
    (the upper eigenvector of the effective field).
    """
    _check_polarization(polarization)
    T = TWO_PI / abs(omega_r)
    h_eff = tilted_field_hamiltonian(theta, Omega) + polarization * abs(omega_r) * SZ
    U_rot = expm_hermitian(h_eff, -1j * T)
    frame = expm_hermitian(SZ, 1j * polarization * abs(omega_r) * T)
    _, v = np.linalg.eigh(h_eff)
    return U_rot, frame @ U_rot, v[:, 1]


# --------------------------------------------------------------------------
# two-qubit gate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoQubitGate:
    U: np.ndarray
    gamma1: float
    gamma2: float


def gate_from_phases(g1: float, g2: float) -> TwoQubitGate:
    d = np.exp(1j * np.array([g1 + g2, g1 - g2, -g1 + g2, -g1 - g2]))
    return TwoQubitGate(np.diag(d), float(g1), float(g2))


def qubit_angles(spec: SpinRegisterSpec, polarization: int = 1):
    """Per-spin ``(theta_a, Omega_a, EffectiveAngle)``."""
    out = []
    for w0 in (spec.omega01, spec.omega02):
        Om = float(np.hypot(w0, spec.omega1))
        if Om <= 0:
            raise ValueError("each spin needs a non-zero field")
        th = float(np.arccos(w0 / Om))
        out.append((th, Om, effective_angle(th, spec.omega_r, Om, polarization)))
    return out


def two_qubit_geometric_gate(spec: SpinRegisterSpec, polarization: int = 1) -> TwoQubitGate:
    """Diagonal geometric gate ``gamma_a = -pi cos th_a*`` (up to a global phase).

    The coupling ``J`` commutes with both single-spin parts after
    diagonalization and only contributes dynamic phase, so it does not enter.
    """
    (_, _, e1), (_, _, e2) = qubit_angles(spec, polarization)
    return gate_from_phases(-np.pi * np.cos(e1.theta_star), -np.pi * np.cos(e2.theta_star))


def adiabatic_gate(spec: SpinRegisterSpec) -> TwoQubitGate:
    """The ``r -> 0`` reference: ``th*`` replaced by ``th``."""
    (t1, _, _), (t2, _, _) = qubit_angles(spec)
    return gate_from_phases(-np.pi * np.cos(t1), -np.pi * np.cos(t2))


SWAP = np.eye(4)[[0, 2, 1, 3]]


# --------------------------------------------------------------------------
# dynamic-phase echo (experimental plumbing)
# --------------------------------------------------------------------------

def reversed_cycle(pair: PhasePair) -> PhasePair:
    """Ideal reversed traversal: same dynamic phase, opposite geometric phase."""
    return PhasePair(pair.phi_D, -pair.gamma, pair.m, -pair.polarization, pair.theta_star)


def dynamic_phase_echo(forward, backward, tol: float = 1e-9) -> TwoQubitGate:
    """Forward loop, spin-echo pi pulse, reversed loop, pi pulse.

    ``forward`` and ``backward`` hold one ``PhasePair`` per qubit (``m = 1/2``).
    The pi pulses negate the second leg's phase, so the net phase of each
    qubit is ``(-phi_Df + gamma_f) - (-phi_Db + gamma_b)``; with equal dynamic
    phases that is the geometric difference, twice ``gamma_f`` for an ideal
    reversed loop.

    Raises
    ------
    EchoMismatch
        If the two legs' dynamic phases differ by more than ``tol``.
    """
    if len(forward) != 2 or len(backward) != 2:
        raise ValueError("need one phase pair per qubit")
    net = []
    for f, b in zip(forward, backward):
        if abs(f.phi_D - b.phi_D) > tol:
            raise EchoMismatch(
                f"dynamic phases differ by {abs(f.phi_D - b.phi_D):.3e} (> {tol:.1e})")
        net.append(wrap_phase(f.total - b.total))
    return gate_from_phases(*net)
