"""Classical engine: invariant curves, actions, periods, and the straight
transition paths that connect congruent tori across non-smoothness lines.

A torus class describes one family of closed invariant curves through a
``branches(eps)`` factory; each branch is a graph p(x) over an x-interval
with its traversal sign and velocity.  Quadratures use a square-root
substitution at turning points so integrable endpoint singularities in
either the action or the period integrand never reach the adaptive panels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .exceptions import (ProjectionError, SingularTorusError, TangencyError,
                         ValidationError)
from .model import TWO_PI, CircleSystem, NonSmoothLocus

ACTION_EPSABS = 1e-13
ACTION_EPSREL = 1e-11
ROOT_XTOL = 1e-14


# ---------------------------------------------------------------------------
# Quadrature with sqrt-substituted endpoints
# ---------------------------------------------------------------------------


def _quad_plain(f, a, b):
    val, _ = quad(f, a, b, epsabs=ACTION_EPSABS, epsrel=ACTION_EPSREL, limit=300)
    return val


def quad_sqrt_ends(f, a, b, sqrt_lo=False, sqrt_hi=False):
    """Integrate f over [a, b]; x = a + t^2 (resp. b - t^2) at flagged ends.

    The substitution turns integrands that vanish or diverge like a square
    root at an endpoint into smooth ones.
    """
    if b <= a:
        return 0.0
    if not (sqrt_lo or sqrt_hi):
        return _quad_plain(f, a, b)
    if sqrt_lo and sqrt_hi:
        m = 0.5 * (a + b)
        return (quad_sqrt_ends(f, a, m, sqrt_lo=True)
                + quad_sqrt_ends(f, m, b, sqrt_hi=True))
    if sqrt_lo:
        return _quad_plain(lambda t: 2.0 * t * f(a + t * t), 0.0, np.sqrt(b - a))
    return _quad_plain(lambda t: 2.0 * t * f(b - t * t), 0.0, np.sqrt(b - a))


# ---------------------------------------------------------------------------
# Torus classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    """One graph segment p(x) of a closed invariant curve.

    ``sign`` is +1 when traversing the branch with increasing x contributes
    +int p dx to the circuit integral.  ``xdot`` is the velocity dE/dp along
    the branch (its sign encodes the traversal direction); sqrt flags mark
    turning points at the interval ends.
    """

    x_lo: float
    x_hi: float
    p: Callable
    xdot: Callable
    sign: int = 1
    sqrt_lo: bool = False
    sqrt_hi: bool = False


@dataclass(frozen=True)
class TorusClass:
    """A family of invariant curves parametrized by energy."""

    name: str
    maslov: int
    energy_range: tuple
    branches: Callable
    single_sheet: bool = False     # one branch covering the whole circle

    def contains(self, eps):
        lo, hi = self.energy_range
        return lo < eps < hi


@dataclass(frozen=True)
class Torus:
    """One invariant curve with its computed circuit data."""

    energy: float
    class_name: str
    action: float
    period: float
    maslov: int
    turning_points: tuple


def _check_energy(tclass, eps):
    if not tclass.contains(eps):
        raise SingularTorusError(
            f"{tclass.name}: energy {eps} outside range {tclass.energy_range}")


def action(system: CircleSystem, eps, tclass: TorusClass) -> float:
    """Circuit integral of p dx over one closed orbit of the class."""
    _check_energy(tclass, eps)
    total = 0.0
    for br in tclass.branches(eps):
        total += br.sign * quad_sqrt_ends(br.p, br.x_lo, br.x_hi,
                                          br.sqrt_lo, br.sqrt_hi)
    return total


def period(system: CircleSystem, eps, tclass: TorusClass) -> float:
    """Circuit time: integral of dx / |xdot| over one closed orbit."""
    _check_energy(tclass, eps)
    total = 0.0
    for br in tclass.branches(eps):
        total += quad_sqrt_ends(lambda x: 1.0 / abs(br.xdot(x)),
                                br.x_lo, br.x_hi, br.sqrt_lo, br.sqrt_hi)
    return total


def build_torus(system: CircleSystem, eps, tclass: TorusClass) -> Torus:
    brs = tclass.branches(eps)
    tps = tuple(sorted({round(b.x_lo, 12) for b in brs if b.sqrt_lo}
                       | {round(b.x_hi, 12) for b in brs if b.sqrt_hi}))
    return Torus(energy=eps, class_name=tclass.name,
                 action=action(system, eps, tclass),
                 period=period(system, eps, tclass),
                 maslov=tclass.maslov, turning_points=tps)


def phase_integral(system: CircleSystem, eps, tclass: TorusClass, x) -> float:
    """s(x) = int_0^x p dx' along a single-sheeted (rotational) orbit."""
    _check_energy(tclass, eps)
    brs = tclass.branches(eps)
    if not tclass.single_sheet or len(brs) != 1:
        raise ProjectionError(f"{tclass.name} is not single-sheeted over x")
    br = brs[0]
    x = float(x)
    if not (br.x_lo - 1e-12 <= x <= br.x_hi + 1e-12):
        raise ProjectionError(f"x={x} outside branch [{br.x_lo}, {br.x_hi}]")
    return br.sign * _quad_plain(br.p, br.x_lo, x)


def ebk_levels(system: CircleSystem, tclass: TorusClass, hbar, *,
               maslov=None, energy_window=None, n_range=None):
    """Energies with S(eps_n) = 2 pi (n + maslov/4) hbar inside the window.

    S must be strictly monotone on the window.  Levels whose index falls
    outside ``n_range`` (when given) are skipped.
    """
    mu = tclass.maslov if maslov is None else maslov
    lo, hi = energy_window if energy_window is not None else tclass.energy_range
    rlo, rhi = tclass.energy_range
    span = (hi if np.isfinite(hi) else rlo + 10.0) - lo
    lo = max(lo, rlo + 1e-9 * max(1.0, abs(rlo)) + 1e-12)
    hi = min(hi if np.isfinite(hi) else lo + 2 * span, rhi - 1e-9)

    grid = np.linspace(lo, hi, 48)
    svals = np.array([action(system, e, tclass) for e in grid])
    if np.any(np.diff(svals) <= 0):
        raise ValidationError(f"{tclass.name}: action is not strictly monotone")

    def index_of(s):
        return s / (TWO_PI * hbar) - mu / 4.0

    n_lo = int(np.ceil(index_of(svals[0]) - 1e-9))
    n_hi = int(np.floor(index_of(svals[-1]) + 1e-9))
    out = []
    for n in range(n_lo, n_hi + 1):
        if n_range is not None and not (n_range[0] <= n <= n_range[1]):
            continue
        target = TWO_PI * hbar * (n + mu / 4.0)
        j = int(np.searchsorted(svals, target))
        a = grid[max(j - 1, 0)]
        b = grid[min(j, len(grid) - 1)]
        if a == b:
            continue
        eps_n = brentq(lambda e: action(system, e, tclass) - target, a, b,
                       xtol=1e-13, rtol=8.9e-16)
        out.append((n, eps_n))
    return out


# ---------------------------------------------------------------------------
# Generic torus-class builders for separable systems
# ---------------------------------------------------------------------------


def _potential_max(system):
    xs = np.linspace(0, TWO_PI, 4096)
    return float(np.max(system.potential(xs)))


def _potential_min(system):
    xs = np.linspace(0, TWO_PI, 4096)
    return float(np.min(system.potential(xs)))


def rotational_classes(system: CircleSystem):
    """The pair of time-reversal rotational classes of a separable system.

    Requires a kinetic energy with an outer increasing inverse; the orbits
    are p(x) = inv(eps - V(x)) and its reflection about the symmetry center.
    """
    kin = system.kinetic
    if kin.inv_outer is None or kin.even_center is None:
        raise ValidationError("rotational classes need an invertible symmetric kinetic energy")
    c = kin.even_center
    vmax = _potential_max(system)

    def make(sign_label):
        def branches(eps):
            def p_plus(x):
                return kin.inv_outer(np.maximum(eps - system.potential(x), 0.0))

            if sign_label == "+":
                return (Branch(0.0, TWO_PI, p_plus,
                               lambda x: kin.deriv(p_plus(x)), sign=1),)
            return (Branch(0.0, TWO_PI, lambda x: 2 * c - p_plus(x),
                           lambda x: -kin.deriv(p_plus(x)), sign=-1),)

        return TorusClass(name=f"rotational{sign_label}", maslov=0,
                          energy_range=(vmax, np.inf), branches=branches,
                          single_sheet=True)

    return make("+"), make("-")


def potential_level_crossings(system: CircleSystem, level, n_grid=4096):
    """Solutions of V(x) = level in [0, 2pi), by bracketed bisection."""
    xs = np.linspace(0.0, TWO_PI, n_grid + 1)
    vals = system.potential(xs) - level
    roots = []
    for i in range(n_grid):
        a, b = xs[i], xs[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(lambda t: system.potential(t) - level, a, b,
                                xtol=ROOT_XTOL, rtol=8.9e-16))
    return roots


def _wells_at(system, eps, f=None):
    """Intervals (a, b) with f < 0, wrap-aware; default f = V - eps."""
    if f is None:
        def f(x):
            return system.potential(x) - eps
    xs = np.linspace(0.0, TWO_PI, 4097)
    vals = np.array([f(x) for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        if vals[i] == 0.0:
            roots.append(xs[i])
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(brentq(f, xs[i], xs[i + 1], xtol=ROOT_XTOL, rtol=8.9e-16))
    if not roots:
        return []
    roots = sorted(roots)
    wells = []
    for i, a in enumerate(roots):
        b = roots[(i + 1) % len(roots)]
        if b <= a:
            b += TWO_PI
        mid = 0.5 * (a + b)
        if f(np.mod(mid, TWO_PI)) < 0.0:
            wells.append((a, b))
    return wells


def well_classes(system: CircleSystem):
    """Librational classes of a separable double well (one class per well).

    The kinetic energy must be symmetric about its center c with E(c) = 0;
    branches are c + u(x) and c - u(x) with u = inv(eps - V).
    """
    kin = system.kinetic
    if kin.inv_outer is None or kin.even_center is None:
        raise ValidationError("well classes need an invertible symmetric kinetic energy")
    c = kin.even_center
    vmin, vmax = _potential_min(system), _potential_max(system)
    kink_orders = {k.order for k in kin.kinks}
    smooth_vel = 1 not in kink_orders      # velocity jumps across c for |p|-like kinetics

    def make(which):
        def branches(eps):
            wells = _wells_at(system, eps)
            if len(wells) <= which:
                raise SingularTorusError(f"well {which} does not exist at eps={eps}")
            a, b = sorted(wells)[which]

            def u(x):
                return kin.inv_outer(np.maximum(eps - system.potential(np.mod(x, TWO_PI)), 0.0)) - c

            sq = smooth_vel      # 1/xdot diverges at the edges only for smooth kinetics
            return (
                Branch(a, b, lambda x: c + u(x),
                       lambda x: kin.deriv(c + u(x)), sign=1, sqrt_lo=sq, sqrt_hi=sq),
                Branch(a, b, lambda x: c - u(x),
                       lambda x: kin.deriv(c - u(x)), sign=-1, sqrt_lo=sq, sqrt_hi=sq),
            )

        return TorusClass(name=f"well{which}", maslov=2,
                          energy_range=(vmin, vmax), branches=branches)

    return make(0), make(1)


def upper_loop_area(system: CircleSystem, eps, tclass: TorusClass, p_star) -> float:
    """Area between the line p = p_star and the branch of the torus above it.

    This is the half-loop phase integral entering interference phases of
    transition paths on a momentum line.
    """
    total = 0.0
    for br in tclass.branches(eps):
        if br.sign > 0:
            total += quad_sqrt_ends(lambda x: br.p(x) - p_star, br.x_lo, br.x_hi,
                                    br.sqrt_lo, br.sqrt_hi)
    return total


# ---------------------------------------------------------------------------
# Transition paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionPath:
    """A straight tunneling segment on a non-smoothness line.

    ``length`` is p_start - p_end for x-lines and the positive x-distance
    (mod 2pi) for p-lines.  ``v_start``/``v_end`` are the transverse
    velocities (xdot for x-lines, pdot for p-lines).  ``loop_halves`` counts
    the torus half-arcs in the phase loop against the outermost path of its
    locus; it feeds the caustic interference phases.
    """

    locus: NonSmoothLocus
    start: tuple
    end: tuple
    order: int
    jump: float
    length: float
    v_start: float
    v_end: float
    energy: float
    loop_halves: int = 0


def _check_on_shell(system, point, eps):
    h = system.hamiltonian(point[0], point[1])
    if abs(h - eps) > 1e-10 * max(1.0, abs(eps)):
        raise ValidationError(f"path endpoint {point} off the energy shell: H={h}, eps={eps}")


def transition_paths_x(system: CircleSystem, eps, locus: NonSmoothLocus):
    """Paths on the line x = locus.location between the p > c and p < c tori."""
    if not system.separable:
        raise ValidationError("x-line transition paths require a separable system")
    kin = system.kinetic
    c = kin.even_center
    if c is None:
        raise ValidationError("time-reversal paths need a symmetric kinetic energy")
    u = eps - float(system.potential(locus.location))
    roots = kin.momentum_roots(u)
    scale = max(1.0, abs(u))
    for r in roots:
        if abs(kin.deriv(r)) < 1e-8 * scale:
            raise TangencyError(
                f"locus x={locus.location:.6f} tangent to the torus at p={r:.6f}")
    # outermost first, so ends[i] mirrors starts[i]
    starts = sorted([r for r in roots if r > c], key=lambda r: -abs(r - c))
    ends = sorted([r for r in roots if r < c], key=lambda r: -abs(r - c))
    paths = []
    order_pairs = [(i, i) for i in range(min(len(starts), len(ends)))]
    order_pairs += [(i, j) for i in range(len(starts)) for j in range(len(ends)) if i != j]
    for i, j in order_pairs:
        ps, pe = starts[i], ends[j]
        start, end = (locus.location, ps), (locus.location, pe)
        _check_on_shell(system, start, eps)
        _check_on_shell(system, end, eps)
        paths.append(TransitionPath(
            locus=locus, start=start, end=end, order=locus.order,
            jump=locus.jump_value(), length=ps - pe,
            v_start=float(kin.deriv(ps)), v_end=float(kin.deriv(pe)),
            energy=eps, loop_halves=(i > 0) + (j > 0)))
    return paths


def transition_paths_p(system: CircleSystem, eps, locus: NonSmoothLocus):
    """Paths on the line p = locus.location between two spatial wells."""
    p_star = locus.location

    def f(x):
        return system.hamiltonian(x, p_star) - eps

    wells = _wells_at(system, eps, f)
    if len(wells) < 2:
        return []
    if len(wells) > 2:
        raise ValidationError(f"{len(wells)} wells at eps={eps}; only two-well systems supported")
    (a1, b1), (a2, b2) = sorted(wells)

    def pdot(x):
        return -float(system.hamiltonian_dx(np.mod(x, TWO_PI), p_star))

    paths = []
    # (start edge, end edge, inner-endpoint count); inner edges face each other
    combos = [(b1, a2, 2), (a1, b2, 0), (a1, a2, 1), (b1, b2, 1)]
    for xs_, xe_, hops in combos:
        length = np.mod(xe_ - xs_, TWO_PI)
        if length < 1e-12:
            raise TangencyError("transition path of zero length")
        js = locus.jump_value(np.mod(xs_, TWO_PI))
        je = locus.jump_value(np.mod(xe_, TWO_PI))
        if abs(js - je) > 1e-8 * max(1.0, abs(js)):
            raise ValidationError("jump intensity differs between path endpoints")
        start = (np.mod(xs_, TWO_PI), p_star)
        end = (np.mod(xe_, TWO_PI), p_star)
        _check_on_shell(system, start, eps)
        _check_on_shell(system, end, eps)
        paths.append(TransitionPath(
            locus=locus, start=start, end=end, order=locus.order,
            jump=0.5 * (js + je), length=float(length),
            v_start=pdot(xs_), v_end=pdot(xe_),
            energy=eps, loop_halves=hops))
    return paths


def find_transition_paths(system: CircleSystem, eps, kind="auto"):
    """All transition paths at energy eps.

    ``kind`` selects which degeneracy the paths serve: "time_reversal"
    (x-line loci between the p > 0 and p < 0 tori), "spatial" (p-line loci
    between two x-wells), or "auto" which tries both where geometry permits.
    """
    paths = []
    if kind in ("auto", "time_reversal"):
        for locus in system.x_loci:
            c = system.kinetic.even_center
            if c is None:
                continue
            u = eps - float(system.potential(locus.location))
            roots = system.kinetic.momentum_roots(u)
            if any(r > c for r in roots) and any(r < c for r in roots):
                if kind == "auto" and eps < _potential_max(system) \
                        and not system.kinetic.stationary:
                    # the two root groups belong to one librating orbit
                    continue
                paths.extend(transition_paths_x(system, eps, locus))
    if kind in ("auto", "spatial"):
        for locus in system.p_loci:
            paths.extend(transition_paths_p(system, eps, locus))
    return paths
