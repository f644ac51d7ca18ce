"""Leading-order splitting predictions from sums over transition paths.

Each path on a non-smoothness line carries a complex reflection weight
proportional to hbar^k (k the order of the derivative jump) divided by the
path length to the power k+1 and the geometric mean of the endpoint
velocities.  On a compact configuration space the inverse power of the
length is periodized into the lattice sum W_k.  Interfering the weights
with their relative phases gives the amplitude whose modulus sets the level
splitting and the dimensionless near-degeneracy measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .exceptions import (DivergentSumError, SingularPathError, ValidationError)
from .model import TWO_PI, CircleSystem, PiecewisePeriodicFunction
from . import classical
from .classical import TorusClass, TransitionPath

LATTICE_TAIL_BOUND = 1e-12
# below this fraction of the largest single-path weight the leading order is
# an interference zero and higher orders dominate
INTERFERENCE_ZERO_FRACTION = 1e-3


# ---------------------------------------------------------------------------
# Periodized inverse-power sums on the circle
# ---------------------------------------------------------------------------


def _w2_closed(x, y):
    return (1.0 + y * (np.exp(1j * x) - 1.0)) * np.exp(-1j * x * y) \
        / (4.0 * np.sin(x / 2.0) ** 2)


def _w3_closed(x, y):
    s = np.sin(x / 2.0)
    return (np.cos(x / 2.0) + 2j * y * s - 2.0 * y * y * s * s * np.exp(1j * x / 2.0)) \
        * np.exp(-1j * x * y) / (8.0 * s ** 3)


def _w_truncated(k, x, y):
    q_max = 64
    while True:
        bound = 2.0 * (TWO_PI * q_max) ** (-k) * (1.0 + q_max / (k - 1.0))
        if bound < LATTICE_TAIL_BOUND:
            break
        q_max *= 2
        if q_max > 2 ** 24:
            raise ValidationError(f"tail bound not reachable for k={k}")
    q = np.arange(-q_max, q_max + 1, dtype=float)
    return complex(np.sum(np.exp(2j * np.pi * q * y) / (x + TWO_PI * q) ** k))


def circle_lattice_sum(k: int, x: float, y: float) -> complex:
    """W_k(x, y) = sum_q exp(i 2 pi q y) / (x + 2 pi q)^k.

    Arguments are first reduced with the identities W_k(x, y+1) = W_k(x, y)
    and W_k(x + 2 pi, y) = e^{-i 2 pi y} W_k(x, y); k = 2, 3 then use closed
    forms, other k a symmetrically truncated sum with tail bound 1e-12.
    """
    if k < 2:
        raise ValidationError("inverse-power sums require k >= 2")
    x = float(x)
    y = float(np.mod(y, 1.0))
    shift = np.floor(x / TWO_PI)
    x0 = x - TWO_PI * shift
    if x0 < 1e-12 or TWO_PI - x0 < 1e-12:
        raise DivergentSumError(f"W_{k} diverges at x = 0 (mod 2 pi); got x={x}")
    phase = np.exp(-2j * np.pi * y * shift)
    if k == 2:
        return complex(phase * _w2_closed(x0, y))
    if k == 3:
        return complex(phase * _w3_closed(x0, y))
    return complex(phase * _w_truncated(k, x0, y))


# ---------------------------------------------------------------------------
# Reflection coefficients and phases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathContribution:
    """Reflection weight and interference phase of one transition path."""

    r: complex
    phase: float
    path: Optional[TransitionPath] = None


def reflection_coefficient(path: TransitionPath, hbar, *, compact_x=False) -> complex:
    """Complex reflection weight of a single transition path.

    ``compact_x`` replaces the inverse power of the length by the
    periodized sum W_{k+1}(length, p*/hbar); it applies to paths running
    along a momentum line of a circle configuration space.
    """
    k = path.order
    if abs(path.length) < 1e-12:
        raise SingularPathError("transition path has zero length (tangency)")
    v = path.v_start * path.v_end
    if abs(v) < 1e-14:
        raise SingularPathError("endpoint velocity vanishes on the locus")
    if compact_x:
        if path.locus.axis != "p":
            raise ValidationError("periodized lengths apply to momentum-line paths")
        geom = circle_lattice_sum(k + 1, path.length, path.locus.location / hbar)
    else:
        geom = path.length ** (-(k + 1))
    return (1j * hbar) ** k * path.jump * geom / np.sqrt(abs(v))


def relative_phase(path: TransitionPath, ref_path: TransitionPath,
                   phase_fn: Callable, hbar, maslov_count=0) -> float:
    """Phase of ``path`` against ``ref_path`` for a symmetric monotone system.

    ``phase_fn`` is s(x) along the positive rotational orbit; the loop
    integral collapses to 2 (s(x_j) - s(x_ref)) / hbar, minus a quarter turn
    per caustic crossing of the connecting arcs.
    """
    if abs(path.energy - ref_path.energy) > 1e-12 * max(1.0, abs(path.energy)):
        raise ValidationError("paths lie on tori of different energies")
    s_j = phase_fn(path.start[0])
    s_k = phase_fn(ref_path.start[0])
    return 2.0 * (s_j - s_k) / hbar - maslov_count * np.pi / 2.0


def loop_phase(loop_action, hbar, maslov_count) -> float:
    """Generic relative phase from an explicit loop integral of p dx."""
    return loop_action / hbar - maslov_count * np.pi / 2.0


def caustic_phases(paths: Sequence[TransitionPath], phi_half: float):
    """Interference phases of well-to-well paths from the half-loop phase.

    Each torus half-arc in the loop against the outermost path contributes
    the half-loop phase minus a quarter turn for its caustic crossing:
    phase_j = loop_halves_j * (phi_half - pi/2).
    """
    return [p.loop_halves * (phi_half - np.pi / 2.0) for p in paths]


# ---------------------------------------------------------------------------
# Amplitudes and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionReport:
    """Leading-order splitting prediction with its per-path breakdown."""

    amplitude: complex
    eta: float
    delta: float | None
    hbar: float
    period: float | None
    contributions: tuple
    interference_zero: bool = False
    below_power_law_floor: bool = False

    def as_dict(self):
        return {
            "amplitude_re": self.amplitude.real,
            "amplitude_im": self.amplitude.imag,
            "amplitude_abs": abs(self.amplitude),
            "eta": self.eta,
            "delta": self.delta,
            "hbar": self.hbar,
            "period": self.period,
            "interference_zero": self.interference_zero,
            "below_power_law_floor": self.below_power_law_floor,
            "paths": [
                {
                    "r_re": c.r.real, "r_im": c.r.imag, "phase": c.phase,
                    "length": None if c.path is None else c.path.length,
                    "order": None if c.path is None else c.path.order,
                }
                for c in self.contributions
            ],
        }


def amplitude(contributions: Iterable[PathContribution], hbar, *,
              period=None) -> PredictionReport:
    """Sum the path weights with their phases into a prediction.

    delta = (2 hbar / T) |amplitude| requires the period; eta = |amplitude|/pi
    is period-free.  An empty contribution list marks the splitting as below
    the power-law floor (smooth system at this energy).
    """
    contribs = tuple(contributions)
    if not contribs:
        return PredictionReport(amplitude=0.0, eta=0.0,
                                delta=None if period is None else 0.0,
                                hbar=hbar, period=period, contributions=(),
                                below_power_law_floor=True)
    amp = sum(c.r * np.exp(1j * c.phase) for c in contribs)
    delta = None
    if period is not None:
        if period <= 0:
            raise ValidationError("period must be positive")
        delta = 2.0 * hbar * abs(amp) / period
    zero = bool(abs(amp) < INTERFERENCE_ZERO_FRACTION * max(abs(c.r) for c in contribs))
    return PredictionReport(amplitude=complex(amp), eta=float(abs(amp) / np.pi),
                            delta=None if delta is None else float(delta),
                            hbar=hbar, period=period,
                            contributions=contribs, interference_zero=zero)


def splitting_direct(system: CircleSystem, eps, tclass: TorusClass) -> PredictionReport:
    """Leading-order splitting of a time-reversal pair, direct route.

    Valid for symmetric kinetic energies monotone away from their center;
    each potential breakpoint contributes
    exp(2 i s(x*)/hbar) jump / (p^{k+1} dE/dp) at p = p(x*), and
    delta = hbar^{k+1} / (2^k T) |sum|, eta = hbar^k / (2^{k+1} pi) |sum|.
    """
    kin = system.kinetic
    c = kin.even_center
    if c is None or kin.inv_outer is None:
        raise ValidationError("direct route requires a symmetric invertible kinetic energy")
    interior = [s for s in kin.stationary if abs(s - c) > 1e-12]
    interior += [k.location for k in kin.kinks if abs(k.location - c) > 1e-12]
    if interior:
        raise ValidationError(
            "kinetic energy is not monotone for p > center; use the path-sum route")
    if not system.x_loci:
        return amplitude((), system.hbar,
                         period=period_of(system, eps, tclass))
    hbar = system.hbar
    T = classical.period(system, eps, tclass)
    contribs = []
    for locus in system.x_loci:
        k = locus.order
        p_star = float(kin.inv_outer(eps - float(system.potential(locus.location))))
        s_star = classical.phase_integral(system, eps, tclass, locus.location)
        r = (1j * hbar) ** k * locus.jump_value() \
            / ((2.0 * (p_star - c)) ** (k + 1) * abs(float(kin.deriv(p_star))))
        contribs.append(PathContribution(r=complex(r), phase=2.0 * s_star / hbar))
    return amplitude(contribs, hbar, period=T)


def period_of(system, eps, tclass):
    try:
        return classical.period(system, eps, tclass)
    except Exception:
        return None


def path_sum_prediction(system: CircleSystem, eps, *, kind, period,
                        phase_fn=None, phi_half=None) -> PredictionReport:
    """Generic engine: find paths, weight them, interfere, and report.

    For time-reversal degeneracies ``phase_fn`` must give s(x) on the
    positive orbit (phases are path-to-path differences of 2 s / hbar plus
    caustic quarter turns through ``loop_halves``).  For spatial (two-well)
    degeneracies ``phi_half`` is the half-loop phase (upper loop area over
    hbar) and lengths are periodized on the circle.
    """
    hbar = system.hbar
    paths = classical.find_transition_paths(system, eps, kind)
    if not paths:
        return amplitude((), hbar, period=period)
    compact = paths[0].locus.axis == "p"
    if compact:
        if phi_half is None:
            raise ValidationError("half-loop phase required for momentum-line paths")
        phases = caustic_phases(paths, phi_half)
    else:
        if phase_fn is not None:
            base = [2.0 * phase_fn(p.start[0]) / hbar for p in paths]
        else:
            base = [0.0 for p in paths]
        if phi_half is None:
            phases = base
        else:
            phases = [b + p.loop_halves * (phi_half - np.pi / 2.0)
                      for b, p in zip(base, paths)]
    contribs = [PathContribution(r=reflection_coefficient(p, hbar, compact_x=compact),
                                 phase=ph, path=p)
                for p, ph in zip(paths, phases)]
    return amplitude(contribs, hbar, period=period)


# ---------------------------------------------------------------------------
# Fourier asymptotics of piecewise-smooth functions
# ---------------------------------------------------------------------------


def fourier_asymptotics(f: PiecewisePeriodicFunction, n: int, order: int) -> complex:
    """Asymptotic Fourier coefficient int_0^{2pi} f e^{inx} dx for large |n|.

    Sums (i^{l+1} / n^{l+1}) sum_j e^{i n x*_j} jump_l(x*_j) over derivative
    orders l = 0..order; the first nonvanishing term is l = smoothness order.
    """
    if n == 0:
        raise ValidationError("asymptotics require n != 0")
    total = 0.0 + 0.0j
    for l in range(order + 1):
        inner = sum(np.exp(1j * n * b) * f.jump(b, l) for b in f.breakpoints)
        total += (1j ** (l + 1)) / (n ** (l + 1)) * inner
    return complex(total)
