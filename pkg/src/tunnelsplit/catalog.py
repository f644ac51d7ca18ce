"""Built-in model systems with torus classes and closed-form predictions.

Each entry builds a fully described system: the quantizable Hamiltonian,
its non-smooth loci, the relevant torus families with their caustic
indices, the energy regimes in which near-degenerate pairs occur, and the
closed-form splitting predictions specialized to that system.  The closed
forms are cross-validated against the generic path-sum engine, which is
the authoritative route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .exceptions import ConfigError, ValidationError
from . import classical, predictor, quantize
from .classical import Branch, TorusClass
from .model import (TWO_PI, CircleSystem, NonSmoothLocus, SpinSystem,
                    abs_kinetic, circle_system, constant_potential,
                    piecewise_from_exprs, quadratic_kinetic,
                    quartic_double_kinetic, spin_to_circle)

_X = sp.Symbol("x", real=True)


# ---------------------------------------------------------------------------
# Potential library (closed-form Fourier coefficients included)
# ---------------------------------------------------------------------------


def cos_squared_potential(lam=1.0):
    def fourier(m):
        if m == 0:
            return 0.5 * lam
        if abs(m) == 2:
            return 0.25 * lam
        return 0.0

    return piecewise_from_exprs([(0.0, TWO_PI, lam * sp.cos(_X) ** 2)], (), 1,
                                name="cos^2", fourier=fourier)


def abs_cos_potential(lam=1.0):
    if lam == 0.0:
        return constant_potential(0.0)

    def fourier(m):
        if m % 2:
            return 0.0
        n = abs(m) // 2
        if n == 0:
            return 2.0 * lam / np.pi
        return lam * 2.0 * (-1.0) ** (n + 1) / (np.pi * (4.0 * n * n - 1.0))

    c = sp.Float(lam) * sp.cos(_X)
    return piecewise_from_exprs(
        [(0.0, np.pi / 2, c), (np.pi / 2, 3 * np.pi / 2, -c), (3 * np.pi / 2, TWO_PI, c)],
        (np.pi / 2, 3 * np.pi / 2), 1, name="|cos|", fourier=fourier)


def cos_bump_potential(k):
    """[max(cos x, 0)]^k: a one-sided bump, C^{k-1} at x = pi/2 and 3 pi/2."""

    def fourier(m):
        total = 0.0
        for j in range(k + 1):
            nu = 2 * j - k - m
            term = np.pi if nu == 0 else 2.0 * np.sin(nu * np.pi / 2.0) / nu
            total += math.comb(k, j) * term
        return total / (TWO_PI * 2 ** k)

    c = sp.cos(_X) ** k
    return piecewise_from_exprs(
        [(0.0, np.pi / 2, c), (np.pi / 2, 3 * np.pi / 2, sp.S(0)), (3 * np.pi / 2, TWO_PI, c)],
        (np.pi / 2, 3 * np.pi / 2), k, name=f"bump^{k}",
        max_order=max(k + 4, 6), fourier=fourier)


def parabolic_well_potential():
    """1 - (x/pi)^2 on [-pi, pi], extended periodically; kink at x = pi."""

    def fourier(m):
        if m == 0:
            return 2.0 / 3.0
        return 2.0 * (-1.0) ** (abs(m) + 1) / (np.pi ** 2 * m ** 2)

    up = 1 - (_X / sp.pi) ** 2
    down = 1 - ((_X - 2 * sp.pi) / sp.pi) ** 2
    return piecewise_from_exprs([(0.0, np.pi, up), (np.pi, TWO_PI, down)],
                                (np.pi,), 1, name="parabolic", fourier=fourier)


def soft_kink_potential(lam):
    """cos x + lam |sin x|: order-1 kinks of intensity 2 lam at x = 0 and pi."""
    if lam == 0.0:
        return piecewise_from_exprs([(0.0, TWO_PI, sp.cos(_X))], (), 1, name="cos",
                                    fourier=lambda m: 0.5 if abs(m) == 1 else 0.0)

    def fourier(m):
        if abs(m) == 1:
            return 0.5
        if m % 2:
            return 0.0
        n = abs(m) // 2
        if n == 0:
            return 2.0 * lam / np.pi
        return -2.0 * lam / (np.pi * (4.0 * n * n - 1.0))

    a = sp.cos(_X) + sp.Float(lam) * sp.sin(_X)
    b = sp.cos(_X) - sp.Float(lam) * sp.sin(_X)
    return piecewise_from_exprs([(0.0, np.pi, a), (np.pi, TWO_PI, b)],
                                (0.0, np.pi), 1, name="cos+lam|sin|", fourier=fourier)


# ---------------------------------------------------------------------------
# Regimes and built systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NDRegime:
    """One energy band of near degeneracies and how to predict it."""

    name: str
    window: tuple
    kind: str                     # "time_reversal" | "spatial"
    torus_class: str              # class of one member of the degenerate pair
    route: str                    # "direct" | "paths"
    phi_half: Optional[Callable] = None      # eps -> half-loop phase
    closed_form: Optional[Callable] = None   # (eps, parity) -> dict
    needs_parity: bool = False

    def contains(self, eps):
        return self.window[0] < eps < self.window[1]


@dataclass
class BuiltSystem:
    """A catalog system instantiated at concrete parameter values."""

    ident: str
    params: dict
    system: CircleSystem
    torus_classes: dict
    regimes: tuple
    spin: Optional[SpinSystem] = None
    separatrices: tuple = ()
    state_filter: Optional[Callable] = None
    separatrix_band: float = 0.0

    @property
    def hbar(self):
        return self.system.hbar

    def regime_at(self, eps):
        for reg in self.regimes:
            if reg.contains(eps):
                return reg
        return None

    def torus(self, eps, class_name):
        return classical.build_torus(self.system, eps, self.torus_classes[class_name])

    def parity(self, eps, regime=None):
        """Quantum number parity of the pair at eps, from the half-loop phase."""
        reg = regime or self.regime_at(eps)
        if reg is None or reg.phi_half is None:
            raise ValidationError(f"no parity rule at eps={eps}")
        n = round((reg.phi_half(eps) - np.pi / 2.0) / np.pi)
        return int(n) % 2

    def predict(self, eps):
        """Leading-order prediction by the generic path-sum engine."""
        reg = self.regime_at(eps)
        if reg is None:
            return predictor.amplitude((), self.hbar)
        tc = self.torus_classes[reg.torus_class]
        T = classical.period(self.system, eps, tc)
        if reg.route == "direct":
            return predictor.splitting_direct(self.system, eps, tc)
        phase_fn = None
        if tc.single_sheet:
            def phase_fn(xv):
                return classical.phase_integral(self.system, eps, tc, xv)
        phi = None if reg.phi_half is None else reg.phi_half(eps)
        return predictor.path_sum_prediction(self.system, eps, kind=reg.kind,
                                             period=T, phase_fn=phase_fn,
                                             phi_half=phi)

    def closed_prediction(self, eps):
        """The system's specialized closed form, or None when it has none."""
        reg = self.regime_at(eps)
        if reg is None or reg.closed_form is None:
            return None
        parity = self.parity(eps, reg) if reg.needs_parity else None
        return reg.closed_form(eps, parity)


# ---------------------------------------------------------------------------
# Entry builders
# ---------------------------------------------------------------------------


def _eta_from_amp(amp):
    return amp / np.pi


def _build_free(hbar):
    sys_ = circle_system(quadratic_kinetic(), constant_potential(0.0), hbar)
    rot_p, rot_m = classical.rotational_classes(sys_)
    return BuiltSystem("free", {"hbar": hbar}, sys_,
                       {"rotational+": rot_p, "rotational-": rot_m},
                       regimes=())


def _separable_rotational_entry(ident, kinetic, potential, hbar, *,
                                closed_form=None, vmax):
    sys_ = circle_system(kinetic, potential, hbar)
    rot_p, rot_m = classical.rotational_classes(sys_)
    classes = {"rotational+": rot_p, "rotational-": rot_m}
    regimes = (NDRegime(name="rotational", window=(vmax, np.inf),
                        kind="time_reversal", torus_class="rotational+",
                        route="direct", closed_form=closed_form),)
    return sys_, classes, regimes


def _momentum_well_regime(sys_, classes, window, closed_form=None,
                          needs_parity=False, p_star=0.0):
    well0 = classes["well0"]

    def phi_half(eps):
        return classical.upper_loop_area(sys_, eps, well0, p_star) / sys_.hbar

    return NDRegime(name="wells", window=window, kind="spatial",
                    torus_class="well0", route="paths", phi_half=phi_half,
                    closed_form=closed_form, needs_parity=needs_parity)


def _build_h1(hbar, lam=1.0):
    sys_, classes, _ = _separable_rotational_entry(
        "H1", quadratic_kinetic(), cos_squared_potential(lam), hbar, vmax=lam)
    regimes = (NDRegime("rotational", (lam, np.inf), "time_reversal",
                        "rotational+", "direct"),)
    if lam > 0:
        w0, w1 = classical.well_classes(sys_)
        classes.update({"well0": w0, "well1": w1})
        regimes = regimes + (NDRegime("wells", (0.0, lam), "spatial", "well0", "paths",
                                      phi_half=lambda e: classical.upper_loop_area(
                                          sys_, e, w0, 0.0) / hbar),)
    return BuiltSystem("H1", {"hbar": hbar, "lam": lam}, sys_, classes, regimes,
                       separatrices=(lam,), separatrix_band=5 * hbar ** (2 / 3))


def _build_h2(hbar, lam=1.0):
    sys_, classes, regimes = _separable_rotational_entry(
        "H2", quadratic_kinetic(), abs_cos_potential(lam), hbar, vmax=lam)
    built = BuiltSystem("H2", {"hbar": hbar, "lam": lam}, sys_, classes, regimes,
                        separatrices=(lam,), separatrix_band=5 * hbar ** (2 / 3))
    return built


def _ex32_closed_form(hbar, p_c):
    def closed(eps, parity):
        # the half-quantum offset cancels the momentum-line sum identically
        if p_c == 0.5 * hbar:
            return {"amp": 0.0, "eta": 0.0, "delta": 0.0}
        if p_c == 0.0:
            amp = abs(hbar / (2.0 * np.sqrt(eps * (1.0 - eps)))
                      * (1.0 / (1.0 - eps) + (-1) ** parity))
            return {"amp": amp, "eta": _eta_from_amp(amp), "delta": None}
        xc = np.arccos(np.sqrt(eps))
        w = predictor.circle_lattice_sum
        y = p_c / hbar
        core = (w(2, 2 * xc, y) + w(2, TWO_PI - 2 * xc, y)
                + (-1) ** parity * 2.0 * w(2, np.pi, y))
        amp = abs(1j * hbar / np.sqrt(eps * (1.0 - eps)) * core)
        return {"amp": amp, "eta": _eta_from_amp(amp), "delta": None}

    return closed


def _build_h3(hbar, lam=1.0):
    sys_ = circle_system(abs_kinetic(0.0), cos_squared_potential(lam), hbar)
    rot_p, rot_m = classical.rotational_classes(sys_)
    classes = {"rotational+": rot_p, "rotational-": rot_m}
    regimes = ()
    if lam > 0:
        w0, w1 = classical.well_classes(sys_)
        classes.update({"well0": w0, "well1": w1})
        closed = None
        if lam == 1.0:
            closed = _ex32_closed_form(hbar, 0.0)
        regimes = (_momentum_well_regime(sys_, classes, (0.0, lam), closed,
                                         needs_parity=True),)
    return BuiltSystem("H3", {"hbar": hbar, "lam": lam}, sys_, classes, regimes,
                       separatrices=(lam,), separatrix_band=5 * hbar ** (2 / 3))


def _build_h4(hbar, lam=1.0):
    sys_ = circle_system(abs_kinetic(0.0), abs_cos_potential(lam), hbar)
    rot_p, rot_m = classical.rotational_classes(sys_)
    classes = {"rotational+": rot_p, "rotational-": rot_m}
    regimes = (NDRegime("rotational", (lam, np.inf), "time_reversal",
                        "rotational+", "direct"),)
    if lam > 0:
        w0, w1 = classical.well_classes(sys_)
        classes.update({"well0": w0, "well1": w1})
        regimes = regimes + (_momentum_well_regime(sys_, classes, (0.0, lam)),)
    return BuiltSystem("H4", {"hbar": hbar, "lam": lam}, sys_, classes, regimes,
                       separatrices=(lam,), separatrix_band=5 * hbar ** (2 / 3))


def bump_average(k):
    """Mean over the circle of [max(cos x, 0)]^k, by the Gamma-function form."""
    return math.gamma((k + 1) / 2) / (2 * math.gamma(0.5) * math.gamma(k / 2 + 1))


def _build_ex21(hbar, k=1):
    def closed(eps, _parity):
        s = abs(np.sin(np.sqrt(2 * eps) * np.pi / hbar + k * np.pi / 2))
        eta = math.factorial(k) * hbar ** k / (2 ** k * np.pi * (2 * eps) ** (k / 2 + 1)) * s
        return {"amp": eta * np.pi, "eta": eta, "delta": None, "sin_factor": s}

    sys_, classes, regimes = _separable_rotational_entry(
        "ex2.1", quadratic_kinetic(), cos_bump_potential(k), hbar,
        closed_form=closed, vmax=1.0)
    return BuiltSystem("ex2.1", {"hbar": hbar, "k": k}, sys_, classes, regimes,
                       separatrices=(1.0,), separatrix_band=5 * hbar ** (2 / 3))


def _build_ex22(hbar, k=1):
    def closed(eps, _parity):
        s = abs(np.sin(np.pi * eps / hbar + k * np.pi / 2))
        delta = math.factorial(k) * hbar ** (k + 1) / (2 ** k * np.pi * eps ** (k + 1)) * s
        return {"amp": delta / hbar * np.pi, "eta": delta / hbar, "delta": delta,
                "sin_factor": s}

    sys_, classes, regimes = _separable_rotational_entry(
        "ex2.2", abs_kinetic(0.0), cos_bump_potential(k), hbar,
        closed_form=closed, vmax=1.0)
    return BuiltSystem("ex2.2", {"hbar": hbar, "k": k}, sys_, classes, regimes,
                       separatrices=(1.0,), separatrix_band=5 * hbar ** (2 / 3))


def _quartic_outer_classes(sys_):
    pot = sys_.potential

    def sq(v):
        return np.sqrt(np.maximum(v, 0.0))

    def make(sign):
        def branches(eps):
            xt = np.pi * np.sqrt(1.0 - eps)
            a, b = xt, TWO_PI - xt

            def p_out(x):
                return sq(1.0 + sq(eps - pot(x)))

            def p_in(x):
                return sq(1.0 - sq(eps - pot(x)))

            def xd_out(x):
                p = p_out(x)
                return 4.0 * p * (p * p - 1.0)

            def xd_in(x):
                p = p_in(x)
                return 4.0 * p * (p * p - 1.0)

            if sign > 0:
                return (Branch(a, b, p_out, xd_out, 1, True, True),
                        Branch(a, b, p_in, xd_in, -1, True, True))
            return (Branch(a, b, lambda x: -p_in(x), lambda x: -xd_in(x), 1, True, True),
                    Branch(a, b, lambda x: -p_out(x), lambda x: -xd_out(x), -1, True, True))

        return TorusClass(name=f"outer{'+' if sign > 0 else '-'}", maslov=2,
                          energy_range=(0.0, 1.0), branches=branches)

    return make(+1), make(-1)


def _quartic_rotational_classes(sys_):
    pot = sys_.potential

    def make(sign):
        def branches(eps):
            def p_out(x):
                return sign * np.sqrt(1.0 + np.sqrt(np.maximum(eps - pot(x), 0.0)))

            def xd(x):
                p = p_out(x)
                return 4.0 * p * (p * p - 1.0)

            return (Branch(0.0, TWO_PI, p_out, xd, sign),)

        return TorusClass(name=f"rotational{'+' if sign > 0 else '-'}", maslov=0,
                          energy_range=(1.0, np.inf), branches=branches,
                          single_sheet=True)

    return make(+1), make(-1)


def _build_ex31(hbar):
    sys_ = circle_system(quartic_double_kinetic(), parabolic_well_potential(), hbar)
    out_p, out_m = _quartic_outer_classes(sys_)
    rot_p, rot_m = _quartic_rotational_classes(sys_)
    classes = {"outer+": out_p, "outer-": out_m,
               "rotational+": rot_p, "rotational-": rot_m}

    def phi_half_low(eps):
        return classical.action(sys_, eps, out_p) / (2.0 * hbar)

    def closed_low(eps, parity):
        se = np.sqrt(eps)
        core = ((1.0 + se) ** -1.5 + (1.0 - se) ** -1.5
                + (-1) ** parity * 4.0 / ((1.0 + np.sqrt(1.0 - eps)) * (1.0 - eps) ** 0.25))
        amp = abs(hbar / (4.0 * np.pi * se) * core)
        return {"amp": amp, "eta": _eta_from_amp(amp), "delta": None}

    def closed_high(eps, _parity):
        se = np.sqrt(eps)
        amp = hbar / (4.0 * np.pi * se * (1.0 + se) ** 1.5)
        return {"amp": amp, "eta": _eta_from_amp(amp), "delta": None}

    regimes = (
        NDRegime("outer-wells", (0.0, 1.0), "time_reversal", "outer+", "paths",
                 phi_half=phi_half_low, closed_form=closed_low, needs_parity=True),
        NDRegime("rotational", (1.0, np.inf), "time_reversal", "rotational+", "paths",
                 closed_form=closed_high),
    )

    def state_filter(energy, p2):
        # drop the non-degenerate family of tori around the origin
        if p2 is None:
            return True
        return not (1.0 < energy <= 2.0 and p2 < 1.0)

    return BuiltSystem("ex3.1", {"hbar": hbar}, sys_, classes, regimes,
                       separatrices=(1.0, 2.0), state_filter=state_filter,
                       separatrix_band=5 * hbar ** (2 / 3))


def _build_ex32(hbar, pc=0.0):
    sys_ = circle_system(abs_kinetic(pc), cos_squared_potential(1.0), hbar)
    rot_p, rot_m = classical.rotational_classes(sys_)
    w0, w1 = classical.well_classes(sys_)
    classes = {"rotational+": rot_p, "rotational-": rot_m, "well0": w0, "well1": w1}
    regimes = (_momentum_well_regime(sys_, classes, (0.0, 1.0),
                                     _ex32_closed_form(hbar, pc),
                                     needs_parity=True, p_star=pc),)
    return BuiltSystem("ex3.2", {"hbar": hbar, "pc": pc}, sys_, classes, regimes,
                       separatrices=(1.0,), separatrix_band=5 * hbar ** (2 / 3))


def _spin_well_classes(spin: SpinSystem):
    J = spin.radius
    p0 = spin.p_offset

    def xc_of(eps):
        return 0.5 * np.arccos(eps / J ** 2)

    def make(which):
        shift = 0.0 if which == 0 else np.pi

        def branches(eps):
            xc = xc_of(eps)
            a, b = xc + shift, np.pi - xc + shift

            def upper(x):
                s = np.sin(x)
                return p0 + J * np.sqrt(np.maximum(s * s - np.sin(xc) ** 2, 0.0)) / np.abs(s)

            def lower(x):
                c2 = np.cos(2.0 * np.asarray(x, dtype=float))
                return p0 - np.sqrt(np.maximum(J ** 2 - eps / c2, 0.0))

            def xd_up(x):
                u = upper(x) - p0
                return 4.0 * u * np.sin(x) ** 2

            def xd_lo(x):
                u = lower(x) - p0
                return -2.0 * u * np.cos(2.0 * np.asarray(x, dtype=float))

            return (Branch(a, b, upper, xd_up, 1, True, True),
                    Branch(a, b, lower, xd_lo, -1, True, True))

        return TorusClass(name=f"spinwell{which}", maslov=2,
                          energy_range=(-J ** 2, 0.0), branches=branches)

    return make(0), make(1)


def _build_ex33(j, hbar=1.0):
    spin = SpinSystem(j=j, hbar=hbar,
                      upper_block={(2, 0, 0): 1.0, (0, 2, 0): -1.0, (0, 0, 2): 1.0},
                      lower_block={(2, 0, 0): 1.0, (0, 2, 0): -1.0})
    sys_ = spin_to_circle(spin)
    w0, w1 = _spin_well_classes(spin)
    classes = {"spinwell0": w0, "spinwell1": w1}
    J = spin.radius
    jj = j + 0.5

    def phi(eps):
        xi = eps / J ** 2
        return np.pi * jj * (1.0 - np.sqrt((1.0 - xi) / 2.0))

    def closed(eps, _parity):
        xi = eps / J ** 2
        ph = phi(eps)
        if float(j).is_integer():
            amp = abs(np.cos(ph)) / (2.0 * jj ** 2 * (1.0 - xi) ** 2)
        else:
            amp = abs((3.0 + xi) / (np.sqrt(2.0) * (1.0 - xi) ** 1.5) * np.sin(ph) + 0.5) \
                / (4.0 * jj ** 2 * np.sqrt(1.0 - xi ** 2))
        return {"amp": amp, "eta": _eta_from_amp(amp), "delta": None}

    def phi_half(eps):
        return classical.upper_loop_area(sys_, eps, w0, spin.p_offset) / hbar

    regimes = (NDRegime("spin-wells", (-J ** 2, 0.0), "spatial", "spinwell0",
                        "paths", phi_half=phi_half, closed_form=closed),)
    return BuiltSystem("ex3.3", {"j": j, "hbar": hbar}, sys_, classes, regimes,
                       spin=spin, separatrices=(-J ** 2, 0.0),
                       separatrix_band=5.0 * J ** 2 / jj)


def _build_softkink(hbar, lam=0.5):
    vmax = np.sqrt(1.0 + lam ** 2)
    sys_, classes, regimes = _separable_rotational_entry(
        "softkink", quadratic_kinetic(), soft_kink_potential(lam), hbar, vmax=vmax)
    return BuiltSystem("softkink", {"hbar": hbar, "lam": lam}, sys_, classes,
                       regimes, separatrices=(vmax,),
                       separatrix_band=5 * hbar ** (2 / 3))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    ident: str
    summary: str
    params: dict                  # name -> (default, lo, hi)
    builder: Callable


CATALOG = {
    e.ident: e for e in [
        CatalogEntry("free", "E = p^2/2, V = 0 (free rotor)",
                     {"hbar": (1.0, 1e-3, 10.0)}, _build_free),
        CatalogEntry("H1", "p^2/2 + lam cos^2 x (smooth reference)",
                     {"hbar": (0.02, 1e-3, 0.5), "lam": (1.0, 0.0, 4.0)}, _build_h1),
        CatalogEntry("H2", "p^2/2 + lam |cos x| (potential kinks)",
                     {"hbar": (0.02, 1e-3, 0.5), "lam": (1.0, 0.0, 4.0)}, _build_h2),
        CatalogEntry("H3", "|p| + lam cos^2 x (kinetic kink)",
                     {"hbar": (0.02, 1e-3, 0.5), "lam": (1.0, 0.0, 4.0)}, _build_h3),
        CatalogEntry("H4", "|p| + lam |cos x| (kinks in both)",
                     {"hbar": (0.02, 1e-3, 0.5), "lam": (1.0, 0.0, 4.0)}, _build_h4),
        CatalogEntry("ex2.1", "p^2/2 + [max(cos x, 0)]^k, scaled splitting closed form",
                     {"hbar": (0.05, 1e-3, 0.5), "k": (1, 1, 4)}, _build_ex21),
        CatalogEntry("ex2.2", "|p| + [max(cos x, 0)]^k, splitting closed form",
                     {"hbar": (0.04, 1e-3, 0.5), "k": (1, 1, 4)}, _build_ex22),
        CatalogEntry("ex3.1", "(p^2-1)^2 + parabolic well (momentum caustics)",
                     {"hbar": (0.02, 1e-3, 0.5)}, _build_ex31),
        CatalogEntry("ex3.2", "|p - pc| + cos^2 x (momentum-line tunneling)",
                     {"hbar": (0.02, 1e-3, 0.5), "pc": (0.0, 0.0, 2.5)}, _build_ex32),
        CatalogEntry("ex3.3", "piecewise spin Hamiltonian J1^2 - J2^2 (+ J3^2)",
                     {"j": (100, 0.5, 400), "hbar": (1.0, 1e-3, 10.0)}, _build_ex33),
        CatalogEntry("softkink", "p^2/2 + cos x + lam |sin x| (tunable kink)",
                     {"hbar": (0.05, 1e-3, 0.5), "lam": (0.5, 0.0, 4.0)}, _build_softkink),
    ]
}


def list_entries():
    return sorted(CATALOG)


def describe(ident):
    entry = CATALOG.get(ident)
    if entry is None:
        raise ConfigError(f"unknown system '{ident}'")
    lines = [f"{entry.ident}: {entry.summary}", "parameters:"]
    for name, (default, lo, hi) in entry.params.items():
        lines.append(f"  {name} = {default} (range [{lo}, {hi}])")
    built = build(ident)
    for locus in built.system.x_loci:
        lines.append(f"  x-line locus at x = {locus.location:.6f}, order {locus.order}, "
                     f"jump {locus.jump_value():.6g}")
    for locus in built.system.p_loci:
        j = locus.jump_value(0.0) if callable(locus.jump) else locus.jump_value()
        lines.append(f"  p-line locus at p = {locus.location:.6f}, order {locus.order}, "
                     f"jump {j:.6g}")
    if built.separatrices:
        lines.append("  separatrix energies: "
                     + ", ".join(f"{s:.6g}" for s in built.separatrices))
    for reg in built.regimes:
        closed = "closed form" if reg.closed_form else "engine only"
        lines.append(f"  regime {reg.name}: eps in ({reg.window[0]:.4g}, "
                     f"{reg.window[1]:.4g}), {reg.kind}, {closed}")
    return "\n".join(lines)


def build(ident, **params) -> BuiltSystem:
    entry = CATALOG.get(ident)
    if entry is None:
        raise ConfigError(f"unknown system '{ident}'")
    values = {}
    for name, (default, lo, hi) in entry.params.items():
        v = params.pop(name, default)
        if not (lo <= v <= hi):
            raise ConfigError(f"parameter {name}={v} out of range [{lo}, {hi}]")
        values[name] = v
    if params:
        raise ConfigError(f"unknown parameters {sorted(params)} for '{ident}'")
    if ident == "ex3.2" and values["pc"] > 2.5 * values["hbar"] + 1.0:
        raise ConfigError("pc too large for the double-well regime")
    return entry.builder(**values)


# ---------------------------------------------------------------------------
# Spin quantization (exact ladder-operator matrix elements)
# ---------------------------------------------------------------------------


def spin_matrix(j, hbar) -> np.ndarray:
    """Matrix of J1^2 - J2^2 + J3^2 [J3 >= 0] in the eigenbasis of J3.

    Diagonal (m hbar)^2 for m >= 0 (0 for m < 0); couplings only between
    m and m + 2 with <m+2|H|m> = (hbar^2/2) sqrt((j-m)(j+m+1)(j-m-1)(j+m+2)).
    """
    if round(2 * j) != 2 * j or j <= 0:
        raise ConfigError("j must be a positive multiple of 1/2")
    d = int(round(2 * j + 1))
    m = -j + np.arange(d)
    mat = np.diag(np.where(m >= 0, (m * hbar) ** 2, 0.0))
    mm = m[:d - 2]
    vals = 0.5 * hbar * hbar * np.sqrt((j - mm) * (j + mm + 1.0)
                                       * (j - mm - 1.0) * (j + mm + 2.0))
    idx = np.arange(d - 2)
    mat[idx + 2, idx] = vals
    mat[idx, idx + 2] = vals
    return mat


def solve_built(built: BuiltSystem, eps_max=None, *, n_basis=None) -> quantize.SpectrumResult:
    """Diagonalize a built system (spin systems use the exact ladder matrix)."""
    if built.spin is not None:
        basis = quantize.MomentumBasis.for_spin(built.spin.j, built.spin.hbar)
        return quantize.diagonalize(spin_matrix(built.spin.j, built.spin.hbar), basis)
    if eps_max is None:
        raise ConfigError("eps_max required for circle systems")
    return quantize.solve_system(built.system, eps_max, n_basis=n_basis)


def nd_pairs(built: BuiltSystem, spectrum, window=None, gap_ratio=0.25):
    """Near-degenerate pairs with the system's state filter and flags applied."""
    return quantize.find_nd_pairs(spectrum, window=window, gap_ratio=gap_ratio,
                                  state_filter=built.state_filter,
                                  separatrices=built.separatrices,
                                  separatrix_band=built.separatrix_band)


def comparison_rows(built: BuiltSystem, window, *, gap_ratio=0.25,
                    spectrum=None, route="closed"):
    """Per-pair comparison of numerics against the prediction.

    route "closed" uses the system's closed form where present (falling back
    to the engine); "engine" always uses the path-sum engine.
    """
    if spectrum is None:
        spectrum = solve_built(built, eps_max=window[1] + 0.5)
    pairs = nd_pairs(built, spectrum, window=window, gap_ratio=gap_ratio)
    rows = []
    for pair in pairs:
        eps = pair.mean
        eta_pred = delta_pred = sin_factor = None
        flag = ""
        closed = built.closed_prediction(eps) if route == "closed" else None
        if closed is not None:
            eta_pred = closed["eta"]
            delta_pred = closed.get("delta")
            sin_factor = closed.get("sin_factor")
        else:
            rep = built.predict(eps)
            eta_pred = rep.eta
            delta_pred = rep.delta
            if rep.below_power_law_floor:
                flag = "below_power_law_floor"
            elif rep.interference_zero:
                flag = "interference_zero"
        if pair.near_separatrix:
            flag = (flag + ";" if flag else "") + "near_separatrix"
        ratio = None
        if pair.eta is not None and eta_pred not in (None, 0.0):
            ratio = pair.eta / eta_pred
        rows.append({
            "eps": eps, "delta_num": pair.delta, "delta_pred": delta_pred,
            "eta_num": pair.eta, "eta_pred": eta_pred, "ratio": ratio,
            "p2": pair.p2, "sin_factor": sin_factor, "flag": flag,
        })
    return rows


def _scan_point(ident, params, eps_ref, window_width):
    """One scan sample: numeric splitting of the pair nearest eps_ref plus
    the predictor amplitude at the same energy.  Top-level so process pools
    can pickle it."""
    built = build(ident, **params)
    spectrum = solve_built(built, eps_max=eps_ref + window_width + 1.0)
    pairs = nd_pairs(built, spectrum,
                     window=(eps_ref - window_width, eps_ref + window_width))
    if pairs:
        pair = min(pairs, key=lambda p: abs(p.mean - eps_ref))
        eps, delta, eta = pair.mean, pair.delta, pair.eta
    else:
        eps, delta, eta = eps_ref, None, None
    rep = built.predict(eps)
    return {"eps": eps, "delta_num": delta, "eta_num": eta,
            "amp_pred": abs(rep.amplitude), "delta_pred": rep.delta,
            "eta_pred": rep.eta}


def hbar_scan(ident, hbars, *, eps_ref, window_width=0.25, envelope_halfwidth=0.08,
              envelope_period=None, envelope_samples=16, jobs=1, **fixed):
    """Scan hbar, extracting splitting-envelope maxima and a power-law slope.

    The splitting oscillates rapidly in 1/hbar through its interference
    phase; around each nominal value the scan samples a small window in
    1/hbar and keeps the largest splitting, normalized to eps_ref with the
    known power-law energy decay.  ``envelope_period`` (the oscillation
    period in 1/hbar, when known) sizes each window to just over one
    period; otherwise ``envelope_halfwidth`` is a relative half-width.
    The fitted log-log slope of the envelope maxima is repeated on every
    output row.
    """
    k = None
    probe = build(ident, **fixed)
    if probe.system.x_loci:
        k = probe.system.x_loci[0].order
    decay = (k + 1) if k is not None else 0

    rows = []
    for h0 in hbars:
        nu0 = 1.0 / h0
        if envelope_period is not None:
            half = 0.575 * envelope_period
            nus = nu0 + np.linspace(-half, half, envelope_samples)
        else:
            nus = nu0 * (1.0 + np.linspace(-envelope_halfwidth, envelope_halfwidth,
                                           envelope_samples))
        samples = []
        args = [(ident, {**fixed, "hbar": 1.0 / nu}, eps_ref, window_width)
                for nu in nus]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_scan_point_star, args))
        else:
            results = [_scan_point(*a) for a in args]
        for nu, res in zip(nus, results):
            if res["delta_num"] is None:
                continue
            scaled = res["delta_num"] * (res["eps"] / eps_ref) ** decay
            samples.append((scaled, 1.0 / nu, res))
        if not samples:
            raise ValidationError(f"no pairs found near eps={eps_ref} at hbar={h0}")
        best = max(samples, key=lambda s: s[0])
        rows.append({"hbar_nominal": h0, "hbar": best[1], "delta_env": best[0],
                     "eps": best[2]["eps"], "delta_pred": best[2]["delta_pred"]})
    if len(rows) >= 3:
        x = np.log([r["hbar"] for r in rows])
        y = np.log([r["delta_env"] for r in rows])
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = None
    for r in rows:
        r["slope"] = slope
    return rows


def _scan_point_star(args):
    return _scan_point(*args)


def parameter_scan(ident, scan_param, values, *, eps_ref, window_width=0.4,
                   jobs=1, **fixed):
    """Scan a system parameter (pc, lam), tabulating numerics and predictions."""
    args = [(ident, {**fixed, scan_param: v}, eps_ref, window_width)
            for v in values]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_point_star, args))
    else:
        results = [_scan_point(*a) for a in args]
    rows = []
    for v, res in zip(values, results):
        rows.append({scan_param: v, **res})
    return rows


def lambda_scan(ident, values, *, eps_ref, scan_param="lam", window_width=0.4,
                **fixed):
    """Scan a parameter, tabulating the predictor amplitude and numeric minima.

    For each parameter value the nearest pair to ``eps_ref`` supplies the
    numeric splitting; the predictor amplitude is evaluated at the same
    energy.
    """
    rows = []
    for v in values:
        built = build(ident, **{scan_param: v}, **fixed)
        spectrum = solve_built(built, eps_max=eps_ref + window_width + 1.0)
        pairs = nd_pairs(built, spectrum,
                         window=(eps_ref - window_width, eps_ref + window_width))
        if pairs:
            pair = min(pairs, key=lambda p: abs(p.mean - eps_ref))
            eps, delta = pair.mean, pair.delta
        else:
            eps, delta = eps_ref, None
        rep = built.predict(eps)
        rows.append({scan_param: v, "eps": eps, "amp_pred": abs(rep.amplitude),
                     "delta_num": delta})
    return rows
