"""Brute-force time-ordered propagation of the Schroedinger equation.

This is the reference every other module is checked against, so it is kept
deliberately simple: ``U(T) = prod_k exp(-i H(t_k + dt/2) dt)``, second order
in ``dt`` and unitary to rounding error at any step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, LeakageExceeded, StepTooCoarse
from .linalg import dagger, ordered_product, unitarity_error, wrap_phase
from .models import ParameterLoop, ParametricHamiltonian

STABILITY_BOUND = 0.1
CHUNK = 1 << 15


@dataclass(frozen=True)
class PropagationResult:
    U: np.ndarray
    T: float
    steps: int
    #: instantaneous eigenvalues at the step midpoints, shape (steps, n)
    energies: np.ndarray = field(repr=False)
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return self.T / self.steps


@dataclass(frozen=True)
class PhaseExtraction:
    total: float
    dynamic: float
    gamma: float
    leakage: float


def _hamiltonian_at(model: ParametricHamiltonian, loop: ParameterLoop, t: np.ndarray, T: float):
    # the loop is rescaled so that one traversal takes time T
    return model.eval(loop.sampler(t * (loop.period / T)))


def propagate(model: ParametricHamiltonian, loop: ParameterLoop, T: float | None = None,
              steps: int = 10_000, psi0=None, record_every: int = 0,
              unitarity_tol: float = 1e-9) -> PropagationResult:
    """Propagator over one traversal of ``loop`` taking time ``T``.

    ``T`` defaults to the loop period.  With ``psi0`` and ``record_every > 0``
    the state is stored every ``record_every`` steps (first row is ``psi0``).

    Raises
    ------
    StepTooCoarse
        If ``max ||H|| * dt`` exceeds 0.1.
    """
    T = float(loop.period if T is None else T)
    steps = int(steps)
    if steps < 1 or T <= 0:
        raise ValueError("need positive T and steps")
    dt = T / steps
    n = model.dim
    U = np.eye(n, dtype=complex)
    energies = np.empty((steps, n))
    traj = [] if (psi0 is not None and record_every > 0) else None
    psi = None if psi0 is None else np.asarray(psi0, dtype=complex)
    if traj is not None:
        traj.append(psi.copy())
    for start in range(0, steps, CHUNK):
        k = np.arange(start, min(start + CHUNK, steps))
        H = _hamiltonian_at(model, loop, (k + 0.5) * dt, T)
        w, v = np.linalg.eigh(H)
        energies[k] = w
        hdt = float(np.max(np.abs(w))) * dt
        if hdt > STABILITY_BOUND:
            raise StepTooCoarse(f"||H|| dt = {hdt:.3g} exceeds {STABILITY_BOUND}; use more steps")
        mats = (v * np.exp(-1j * w * dt)[..., None, :]) @ dagger(v)
        if traj is not None:
            for j, m in zip(k, mats):
                psi = m @ psi
                if (j + 1) % record_every == 0:
                    traj.append(psi.copy())
        U = ordered_product(mats) @ U
    err = unitarity_error(U)
    if err > unitarity_tol:
        raise InvariantViolation(f"propagator lost unitarity ({err:.3e})")
    return PropagationResult(U, T, steps, energies, None if traj is None else np.array(traj))


def required_steps(model: ParametricHamiltonian, loop: ParameterLoop, T: float,
                   max_hdt: float = STABILITY_BOUND, probe: int = 256) -> int:
    """Smallest step count meeting the stability bound (estimated on a probe grid)."""
    t = (np.arange(probe) + 0.5) * (T / probe)
    norm = float(np.max(np.abs(np.linalg.eigvalsh(_hamiltonian_at(model, loop, t, T)))))
    return max(int(np.ceil(1.05 * norm * T / max_hdt)), 1)


def extract_geometric_phase(result: PropagationResult, model: ParametricHamiltonian,
                            loop: ParameterLoop, level: int,
                            leak_tol: float | None = None) -> PhaseExtraction:
    """Split the cyclic phase of a non-degenerate level into dynamic and geometric parts.

    ``gamma = arg <n|U(T)|n> + integral E_n dt`` where ``|n>`` is the level's
    eigenvector at the loop start (which is also its end).
    """
    sl = model.level_slice(level)
    if sl.stop - sl.start != 1:
        raise ValueError("phase extraction needs a non-degenerate level")
    H0 = model.eval(loop.sampler(np.array([0.0]))[0])
    _, V = np.linalg.eigh(H0)
    v = V[:, sl.start]
    amp = np.vdot(v, result.U @ v)
    leakage = float(max(0.0, 1.0 - abs(amp) ** 2))
    if leak_tol is not None and leakage > leak_tol:
        raise LeakageExceeded(f"population leakage {leakage:.3e} exceeds {leak_tol:.3e}", leakage)
    dynamic = float(np.sum(result.energies[:, sl.start]) * result.dt)
    total = float(np.angle(amp))
    return PhaseExtraction(total, dynamic, wrap_phase(total + dynamic), leakage)


def adiabatic_sweep(model: ParametricHamiltonian, loop: ParameterLoop, level: int, T_list,
                    reference: float | None = None, max_hdt: float = STABILITY_BOUND,
                    min_steps: int = 2000):
    """Extracted geometric phase and leakage as the traversal time grows.

    Returns ``(rows, fit)`` with rows ``(T, steps, gamma, leakage, error)`` and
    ``fit`` the fitted power-law exponents of the error and leakage in ``T``
    (``None`` where fewer than two positive values exist).  ``error`` is the
    circular distance to ``reference`` (or to the last ``gamma`` if omitted).
    """
    T_list = [float(T) for T in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be strictly ascending")
    rows = []
    for T in T_list:
        steps = max(required_steps(model, loop, T, max_hdt), min_steps)
        res = propagate(model, loop, T, steps)
        ex = extract_geometric_phase(res, model, loop, level)
        rows.append([T, steps, ex.gamma, ex.leakage])
    ref = rows[-1][2] if reference is None else reference
    for r in rows:
        r.append(abs(wrap_phase(r[2] - ref)))

    def slope(col):
        pts = [(np.log(r[0]), np.log(r[col])) for r in rows if r[col] > 0]
        if len(pts) < 2:
            return None
        x, y = np.array(pts).T
        return float(np.polyfit(x, y, 1)[0])

    fit = {"error_exponent": slope(4), "leakage_exponent": slope(3)}
    return [tuple(r) for r in rows], fit


def extract_holonomy(result: PropagationResult, model: ParametricHamiltonian, loop: ParameterLoop,
                     level: int, frame: np.ndarray | None = None, leak_tol: float | None = None):
    """Degenerate-level analogue of :func:`extract_geometric_phase`.

    Returns ``(W, leakage)`` with ``W = z^+ U(T) z exp(i integral E dt)`` in the
    columns ``z`` of ``frame`` (default: the uniform-coordinate frame at the
    loop start, the basis :func:`nonabelian.holonomy` reports in).
    """
    sl = model.level_slice(level)
    if frame is None:
        from .nonabelian import degenerate_frame
        H0 = model.eval(loop.sampler(np.array([0.0]))[0])
        E = np.linalg.eigvalsh(H0)[sl].mean()
        frame = degenerate_frame(H0, E, sl.stop - sl.start, level=level).z
    W = dagger(frame) @ result.U @ frame
    leakage = float(max(0.0, 1.0 - np.linalg.svd(W, compute_uv=False).min() ** 2))
    if leak_tol is not None and leakage > leak_tol:
        raise LeakageExceeded(f"subspace leakage {leakage:.3e} exceeds {leak_tol:.3e}", leakage)
    dynamic = float(np.sum(result.energies[:, sl].mean(axis=1)) * result.dt)
    return W * np.exp(1j * dynamic), leakage
