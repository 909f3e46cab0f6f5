"""Abelian (non-degenerate) geometric phases from uniform coordinates.

An eigenvector of level ``m`` is written ``x = (xi, 1) / sqrt(1 + |xi|^2)``
where ``xi`` solves ``(H_perp - E_m) xi = -H[perp, q]`` and ``q`` is the one
index left out of the pivot minor.  The Berry connection then depends on the
Hamiltonian only through ``xi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import (DegenerateMinor, DegenerateSpectrum, DomainViolation, EnergyDrift,
                     LevelCrossing, LevelMismatch, PivotSingular, PoleCrossing)
from .linalg import TWO_PI, wrap_phase
from .models import MIN_STEPS, ParameterLoop, ParametricHamiltonian

DEFAULT_COND_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-6


@dataclass(frozen=True)
class UniformCoordinates:
    level: int
    energy: float
    xi: np.ndarray
    pivot: tuple[int, ...]
    det: float = np.nan

    @property
    def free_index(self) -> int:
        n = len(self.pivot) + 1
        return next(i for i in range(n) if i not in self.pivot)

    def vector(self) -> np.ndarray:
        """Normalised eigenvector; the free component is real positive."""
        n = len(self.pivot) + 1
        x = np.empty(n, dtype=complex)
        x[list(self.pivot)] = self.xi
        x[self.free_index] = 1.0
        return x / np.sqrt(1.0 + np.vdot(self.xi, self.xi).real)


@dataclass(frozen=True)
class AbelianConnectionSample:
    value: float
    imag_residue: float = 0.0


@dataclass(frozen=True)
class AbelianHolonomy:
    gamma: float
    winding: int
    principal: float
    method: str = "uniform"
    steps: int = 0
    pivot_changes: tuple = ()
    increments: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_total(cls, gamma: float, **kw) -> "AbelianHolonomy":
        principal = wrap_phase(gamma)
        winding = int(round((gamma - principal) / TWO_PI))
        return cls(float(gamma), winding, principal, **kw)


def default_pivot(n: int, d: int = 1) -> tuple[int, ...]:
    """The leading ``n - d`` rows/columns."""
    return tuple(range(n - d))


def _scale(H: np.ndarray) -> np.ndarray:
    """Per-matrix norm used to make determinant thresholds scale free."""
    s = np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)
    return np.where(s > 0, s, 1.0)


def normalized_minor_det(H: np.ndarray, E, pivot: Sequence[int], scale=None) -> np.ndarray:
    """``|det(H[P,P] - E)| / ||H||^{|P|}``, vectorised over leading axes.

    ``scale`` may pass a precomputed ``||H||`` to avoid repeated eigen-solves.
    """
    P = list(pivot)
    E = np.asarray(E, dtype=float)
    sub = H[..., P, :][..., :, P] - E[..., None, None] * np.eye(len(P))
    return np.abs(np.linalg.det(sub)) / (_scale(H) if scale is None else scale) ** len(P)


def uniform_coordinates(H, E: float, pivot: Sequence[int] | None = None, level: int = -1,
                        cond_tol: float = DEFAULT_COND_TOL) -> UniformCoordinates:
    """Solve for the uniform coordinates of the eigenvector with energy ``E``.

    Raises
    ------
    PivotSingular
        If the scale-normalised determinant of the pivot minor is below
        ``cond_tol``; another pivot must be chosen.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    pivot = tuple(default_pivot(n) if pivot is None else pivot)
    if len(pivot) != n - 1:
        raise ValueError("an Abelian pivot must have n - 1 indices")
    det = float(normalized_minor_det(H, E, pivot))
    if not det >= cond_tol:
        raise PivotSingular(f"pivot {pivot} singular (normalised det {det:.3e})", pivot, det)
    q = next(i for i in range(n) if i not in pivot)
    P = list(pivot)
    xi = np.linalg.solve(H[np.ix_(P, P)] - E * np.eye(n - 1), -H[P, q])
    return UniformCoordinates(level, float(E), xi, pivot, det)


def best_pivot(H, E: float, d: int = 1) -> tuple[int, ...]:
    """Pivot of size ``n - d`` with the largest normalised minor determinant."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    cands = list(combinations(range(n), n - d))
    dets = [float(normalized_minor_det(H, E, p)) for p in cands]
    return cands[int(np.argmax(dets))]


def _midpoint_form(xi_mid: np.ndarray, dxi: np.ndarray) -> complex:
    z = np.vdot(xi_mid, dxi)
    return 0.5j * (z - np.conj(z)) / (1.0 + np.vdot(xi_mid, xi_mid).real)


def connection_increment(xi_a: UniformCoordinates, xi_b: UniformCoordinates) -> AbelianConnectionSample:
    """Midpoint value of ``(i/2)(xi^* dxi - xi dxi^*) / (1 + |xi|^2)`` for one step."""
    if xi_a.level != xi_b.level:
        raise LevelMismatch(f"levels differ: {xi_a.level} vs {xi_b.level}")
    if xi_a.pivot != xi_b.pivot:
        raise LevelMismatch("coordinates use different pivots; insert a gauge transition")
    val = _midpoint_form(0.5 * (xi_a.xi + xi_b.xi), xi_b.xi - xi_a.xi)
    return AbelianConnectionSample(float(val.real), float(abs(val.imag)))


def _batched_xi(H: np.ndarray, E: np.ndarray, pivot: Sequence[int]) -> np.ndarray:
    n = H.shape[-1]
    P = list(pivot)
    q = next(i for i in range(n) if i not in pivot)
    sub = H[:, P, :][:, :, P] - E[:, None, None] * np.eye(len(P))
    return np.linalg.solve(sub, -H[:, P, q][..., None])[..., 0]


def _vectors(xi: np.ndarray, pivot: Sequence[int], n: int) -> np.ndarray:
    q = next(i for i in range(n) if i not in pivot)
    x = np.empty(xi.shape[:-1] + (n,), dtype=complex)
    x[..., list(pivot)] = xi
    x[..., q] = 1.0
    return x / np.sqrt(1.0 + np.sum(np.abs(xi) ** 2, axis=-1))[..., None]


def sample_spectrum(model: ParametricHamiltonian, loop: ParameterLoop, level: int,
                    gap_tol: float = DEFAULT_GAP_TOL):
    """Evaluate ``H`` on the loop and return ``(H, E_level, index)``.

    Raises :class:`LevelCrossing` if the level approaches a neighbour closer
    than ``gap_tol`` (relative to the spectral scale).
    """
    H = model.eval(loop.points())
    evals = np.linalg.eigvalsh(H)
    sl = model.level_slice(level)
    if sl.stop - sl.start != 1:
        raise DegenerateSpectrum(
            f"level {level} of {model.name} is degenerate; use the non-Abelian engine")
    idx = sl.start
    # one scale for the whole loop, so a sample where H itself vanishes still counts
    scale = float(np.max(np.abs(evals))) or 1.0
    gaps = np.full(evals.shape[0], np.inf)
    if idx > 0:
        gaps = np.minimum(gaps, evals[:, idx] - evals[:, idx - 1])
    if idx < evals.shape[1] - 1:
        gaps = np.minimum(gaps, evals[:, idx + 1] - evals[:, idx])
    rel = gaps / scale
    k = int(np.argmin(rel))
    if rel[k] < gap_tol:
        raise LevelCrossing(
            f"level {level} gap {gaps[k]:.3e} below tolerance at sample {k} "
            f"(t = {loop.times()[k]:.6g})")
    return H, evals[:, idx], idx


def plan_pivots(H: np.ndarray, E: np.ndarray, d: int = 1, pivot=None,
                cond_tol: float = DEFAULT_COND_TOL) -> list[tuple[int, ...]]:
    """Choose a pivot per loop sample.

    The default leading-minor pivot is kept if valid everywhere; otherwise the
    single pivot with the best worst-case determinant; only if no single pivot
    covers the loop are pivots switched sample by sample.  ``pivot="best"``
    skips the default and takes the best-conditioned single pivot directly.
    """
    N, n = H.shape[0], H.shape[-1]
    cands = list(combinations(range(n), n - d))
    scale = _scale(H)
    if isinstance(pivot, str):
        if pivot != "best":
            raise ValueError(f"unknown pivot strategy {pivot!r}")
        worst = np.stack([normalized_minor_det(H, E, p, scale) for p in cands]).min(axis=1)
        pivot = cands[int(np.argmax(worst))]
    if pivot is not None:
        pivot = tuple(pivot)
        dets = normalized_minor_det(H, E, pivot, scale)
        bad = np.flatnonzero(~(dets >= cond_tol))
        if bad.size:
            k = int(bad[0])
            raise PivotSingular(f"pivot {pivot} singular at sample {k} "
                                f"(normalised det {dets[k]:.3e})", pivot, float(dets[k]))
        return [pivot] * N
    dets = np.stack([normalized_minor_det(H, E, p, scale) for p in cands])  # (ncand, N)
    if np.all(dets[0] >= cond_tol):
        return [cands[0]] * N
    worst = dets.min(axis=1)
    c = int(np.argmax(worst))
    if worst[c] >= cond_tol:
        return [cands[c]] * N
    plan = []
    cur = int(np.argmax(dets[:, 0]))
    for k in range(N):
        best = int(np.argmax(dets[:, k]))
        if dets[cur, k] < max(cond_tol, 1e-2 * dets[best, k]):
            prev = k - 1 if k > 0 else 0
            both = np.minimum(dets[:, k], dets[:, prev])
            cur = int(np.argmax(both))
            if dets[cur, k] < cond_tol:
                raise PivotSingular(f"no valid pivot at sample {k}", cands[cur], float(dets[cur, k]))
        plan.append(cands[cur])
    return plan


def berry_phase(model: ParametricHamiltonian, loop: ParameterLoop, level: int,
                steps: int | None = None, *, pivot=None,
                cond_tol: float = DEFAULT_COND_TOL, gap_tol: float = DEFAULT_GAP_TOL,
                energy_drift_tol: float | None = None, trace: bool = False):
    """Berry phase of a non-degenerate ``level`` around ``loop``.

    ``level`` counts distinct levels in ascending energy.  The phase is the
    sum of midpoint connection increments; it is reported unreduced together
    with its principal value and winding number.  With ``trace=True`` a list of
    per-step rows ``(k, t, R..., increment, cumulative)`` is returned as well.
    """
    if steps is not None:
        loop = loop.with_steps(steps)
    if loop.steps < MIN_STEPS:
        raise ValueError(f"loop needs at least {MIN_STEPS} steps")
    H, E, _ = sample_spectrum(model, loop, level, gap_tol)
    if energy_drift_tol is not None:
        drift = float(np.max(np.abs(E - E[0])))
        if drift > energy_drift_tol:
            raise EnergyDrift(f"level energy drifts by {drift:.3e} along the loop")
    n = H.shape[-1]
    plan = plan_pivots(H, E, 1, pivot, cond_tol)
    N = loop.steps
    incs = np.empty(N)
    changes = []
    distinct = list(dict.fromkeys(plan))
    xi = {p: None for p in distinct}
    for p in distinct:
        xi[p] = _batched_xi(H, E, p)
    if len(distinct) == 1:
        # one chart for the whole loop: evaluate every step at once
        a = xi[distinct[0]]
        b = np.roll(a, -1, axis=0)
        mid = 0.5 * (a + b)
        z = np.einsum("ki,ki->k", mid.conj(), b - a)
        incs[:] = -z.imag / (1.0 + np.einsum("ki,ki->k", mid.conj(), mid).real)
    for k in range(N if len(distinct) > 1 else 0):
        p = plan[k]
        nxt = (k + 1) % N
        p_next = plan[nxt]
        a = xi[p][k]
        if p_next != p:
            # switch gauge at sample k, then integrate the segment in the new chart
            va = _vectors(xi[p][k], p, n)
            vb = _vectors(xi[p_next][k], p_next, n)
            jump = -np.angle(np.vdot(va, vb))
            changes.append((nxt, p, p_next))
            a = xi[p_next][k]
        else:
            jump = 0.0
        b = xi[p_next][nxt]
        incs[k] = _midpoint_form(0.5 * (a + b), b - a).real + jump
    gamma = float(np.sum(incs))
    hol = AbelianHolonomy.from_total(gamma, method="uniform", steps=N,
                                     pivot_changes=tuple(changes), increments=incs)
    if not trace:
        return hol
    t = loop.times()
    R = loop.points()
    cum = np.cumsum(incs)
    rows = [(k, float(t[k]), *map(float, R[k]), float(incs[k]), float(cum[k])) for k in range(N)]
    return hol, rows


# --------------------------------------------------------------------------
# closed forms


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def solid_angle(directions: np.ndarray, pole_tol: float = 1e-6) -> float:
    """Signed solid angle enclosed by a closed polygon of unit vectors.

    Computed as the sum of spherical-triangle excesses against the north
    pole, so the result is the area on the side containing +z, positive for
    counter-clockwise circulation seen from outside.
    """
    n = _unit(np.asarray(directions, dtype=float))
    if np.any(n[:, 2] < -1.0 + pole_tol):
        raise PoleCrossing("loop passes through the projection pole (-z)")
    a = np.array([0.0, 0.0, 1.0])
    b, c = n, np.roll(n, -1, axis=0)
    num = np.dot(np.cross(b, c), a)
    den = 1.0 + b @ a + c @ a + np.einsum("ij,ij->i", b, c)
    return float(np.sum(2.0 * np.arctan2(num, den)))


def two_level_closed_form(loop: ParameterLoop, sign: int = 1, pole_tol: float = 1e-6) -> AbelianHolonomy:
    """``gamma_+- = -+ Omega(C) / 2`` for a spin-1/2 following the field loop.

    ``sign=+1`` selects the upper level (spin along the field).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    omega = solid_angle(loop.points(), pole_tol)
    return AbelianHolonomy.from_total(-sign * omega / 2.0, method="solid_angle", steps=loop.steps)


def _three_level_parts(T0: np.ndarray, phi12, E):
    """Moduli and the minor determinants entering the 3-level formula."""
    phi12 = np.asarray(phi12, dtype=float)
    E = np.asarray(E, dtype=float)
    h11, h22 = T0[0, 0].real, T0[1, 1].real
    a12 = abs(T0[0, 1])
    h12 = a12 * np.exp(1j * phi12)
    h13, h23 = T0[0, 2], T0[1, 2]
    d0 = (h11 - E) * (h22 - E) - a12 ** 2
    d1 = h23 * h12 - h13 * (h22 - E)
    d2 = h13 * np.conj(h12) - h23 * (h11 - E)
    return d0, d1, d2


def three_level_connection(template, phi12, E) -> np.ndarray:
    """Connection coefficient ``A_k / dphi12`` for the 3-level family.

    Only ``arg H12`` varies; ``E`` is the level energy at ``phi12``.  Writing
    ``chi = phi12 + phi23 - phi13`` and ``N = D0^2 + |D1|^2 + |D2|^2``:

        A_k = -C_k [ |H12| (|H23|^2 - |H13|^2) / (|H13||H23|)
                     + (H11 - H22) cos(chi) ],   C_k = |H12||H13||H23| / N

    written without the division so that vanishing ``|H13|`` or ``|H23|`` is
    allowed.  Terms in ``dE`` cancel identically, so the expression holds with
    the instantaneous ``E`` even though the spectrum moves with ``phi12``.
    """
    T0 = np.asarray(template, dtype=complex)
    d0, d1, d2 = _three_level_parts(T0, phi12, E)
    a12, a13, a23 = abs(T0[0, 1]), abs(T0[0, 2]), abs(T0[1, 2])
    chi = np.asarray(phi12) + np.angle(T0[1, 2]) - np.angle(T0[0, 2])
    norm = d0 ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2
    num = (a12 ** 2 * (a23 ** 2 - a13 ** 2)
           + a12 * a13 * a23 * (T0[0, 0].real - T0[1, 1].real) * np.cos(chi))
    return -num / norm


def three_level_printed_coefficients(template, phi12, E) -> dict:
    """``C_k``, ``A``, ``D_k`` exactly as printed for the 3-level closed form.

    Kept for comparison only: integrating ``C_k [A - D_k sin(chi)]`` does not
    reproduce the uniform-coordinate phase (see ``three_level_closed_form``).
    """
    T0 = np.asarray(template, dtype=complex)
    d0, d1, d2 = _three_level_parts(T0, phi12, E)
    a12, a13, a23 = abs(T0[0, 1]), abs(T0[0, 2]), abs(T0[1, 2])
    C = a13 * a23 * a12 / (d0 ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2)
    A = 1.0 / a13 ** 2 - 1.0 / a23 ** 2
    D = T0[0, 0].real + T0[1, 1].real - 2.0 * np.asarray(E)
    chi = np.asarray(phi12) + np.angle(T0[1, 2]) - np.angle(T0[0, 2])
    return {"C": C, "A": A, "D": D, "form": C * (A - D * np.sin(chi))}


def three_level_closed_form(template, level: int, loop: ParameterLoop,
                            min_det: float = 1e-10, printed_form: bool = False) -> AbelianHolonomy:
    """Closed-form Berry phase of a 3-level system driven through ``arg H12``.

    ``loop`` must be a 1-parameter loop in ``phi12`` (see
    :func:`~geophase.models.phase_loop`).  Level energies are computed
    numerically at each sample.  The integrand is smooth and periodic, so the
    trapezoidal rule on the loop samples converges spectrally.
    """
    T0 = np.asarray(template, dtype=complex)
    phi = loop.points()[:, 0]
    H = T0[None].repeat(len(phi), axis=0)
    H[:, 0, 1] = abs(T0[0, 1]) * np.exp(1j * phi)
    H[:, 1, 0] = np.conj(H[:, 0, 1])
    E = np.linalg.eigvalsh(H)[:, level]
    d0, _, _ = _three_level_parts(T0, phi, E)
    scale = np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)
    if np.any(np.abs(d0) < min_det * scale ** 2):
        raise DegenerateMinor("Delta0 vanishes on the loop")
    if printed_form:
        # printed form carries an extra factor i relative to the connection
        coeff = three_level_printed_coefficients(T0, phi, E)["form"]
    else:
        coeff = three_level_connection(T0, phi, E)
    # dphi/dt is constant on phase loops
    dphi = (phi[1] - phi[0]) if len(phi) > 1 else 0.0
    gamma = float(np.sum(coeff) * dphi)
    return AbelianHolonomy.from_total(gamma, method="three_level_closed_form", steps=loop.steps)


# --------------------------------------------------------------------------
# three-element algebras

ALGEBRAS = ("su2", "su11", "hw")


@dataclass(frozen=True)
class AlgebraFormPath:
    algebra: str
    xi_path: np.ndarray
    m: float

    def __post_init__(self):
        if self.algebra not in ALGEBRAS:
            raise ValueError(f"unknown algebra {self.algebra!r}; expected one of {ALGEBRAS}")
        xi = np.asarray(self.xi_path, dtype=complex)
        if xi.ndim != 1 or xi.size < 2:
            raise ValueError("xi_path must be a 1-d sampled curve")
        if self.algebra == "su11" and np.any(np.abs(xi) >= 1.0):
            raise DomainViolation("su(1,1) path leaves the unit disk")
        object.__setattr__(self, "xi_path", xi)


def algebra_phase(path: AlgebraFormPath) -> AbelianHolonomy:
    """``gamma = m * (-i) * loop integral of omega(xi)`` for the three-element algebras.

    ``omega`` is ``(xi dxi^* - xi^* dxi) / D`` with ``D = 1 + |xi|^2`` (su2),
    ``1 - |xi|^2`` (su11) or ``1`` (hw).  The ``-i`` normalisation makes the
    su2 case coincide with the uniform-coordinate connection at ``m = 1/2``.
    The samples are treated as a closed polygon (last point joins the first).
    """
    xi = path.xi_path
    a, b = xi, np.roll(xi, -1)
    mid, d = 0.5 * (a + b), b - a
    r2 = np.abs(mid) ** 2
    if path.algebra == "su2":
        den = 1.0 + r2
    elif path.algebra == "su11":
        if np.any(r2 >= 1.0):
            raise DomainViolation("su(1,1) path leaves the unit disk")
        den = 1.0 - r2
    else:
        den = np.ones_like(r2)
    omega = (mid * np.conj(d) - np.conj(mid) * d) / den
    gamma = path.m * float(np.real(-1j * np.sum(omega)))
    return AbelianHolonomy.from_total(gamma, method=f"algebra_{path.algebra}", steps=xi.size)


# --------------------------------------------------------------------------
# curvature oracle


def curvature_oracle(model: ParametricHamiltonian, R, level: int, h: float = 1e-5,
                     degeneracy_tol: float = 1e-9) -> np.ndarray:
    """Berry curvature from the perturbative sum over the other levels.

    Returns the antisymmetric ``N x N`` tensor ``F_ij`` with
    ``F_ij = -2 Im sum_{m != n} (d_i H)_{nm} (d_j H)_{mn} / (E_n - E_m)^2``;
    for ``N = 3`` use :func:`curvature_vector` for the pseudo-vector form.
    Derivatives of ``H`` are central differences with step ``h``.
    """
    R = np.asarray(R, dtype=float)
    N = R.size
    H = model.eval(R)
    E, V = np.linalg.eigh(H)
    gaps = np.diff(E)
    if np.any(gaps < degeneracy_tol * max(np.max(np.abs(E)), 1.0)):
        raise DegenerateSpectrum("curvature oracle needs a fully non-degenerate spectrum")
    n = model.level_slice(level).start
    shifts = np.eye(N) * h
    dH = np.stack([(model.eval(R + s) - model.eval(R - s)) / (2 * h) for s in shifts])
    dHe = np.einsum("ai,kij,jb->kab", V.conj().T, dH, V)
    others = [m for m in range(len(E)) if m != n]
    F = np.zeros((N, N))
    for m in others:
        w = 1.0 / (E[n] - E[m]) ** 2
        F += -2.0 * np.imag(np.outer(dHe[:, n, m], dHe[:, m, n])) * w
    return F


def curvature_vector(F: np.ndarray) -> np.ndarray:
    """Pseudo-vector ``(F_yz, F_zx, F_xy)`` of a 3x3 curvature tensor."""
    return np.array([F[1, 2], F[2, 0], F[0, 1]])
