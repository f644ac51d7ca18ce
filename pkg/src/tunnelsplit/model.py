"""Domain types for 1D circle Hamiltonians with isolated derivative jumps.

A system H(x, p) = E(p) + V(x) + sum_q T_q(p) e^{iqx} lives on the cylinder
x in [0, 2pi), p real.  The potential (and possibly the momentum dependence)
is smooth except on a finite set of straight lines x = x* or p = p*, where
some derivative of finite order k jumps.  Those lines, their order and their
jump intensity control the tunneling between classically congruent tori, so
they are first-class objects here rather than something detected after the
fact: every function is stored as closed-form smooth pieces with analytic
derivatives, and the non-smooth locations are declared and then validated.

Spin systems with a fixed total angular momentum are included through the
cylinder parametrization (J cos(theta) + p0, phi) = (p, x), which turns a
polynomial Hamiltonian in (J1, J2, J3) into a circle system with a finite
set of Fourier harmonics in x.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .exceptions import UnsupportedFormError, UnsupportedOrderError, ValidationError

TWO_PI = 2.0 * np.pi

# Matching tolerance for identifying a coordinate with a declared breakpoint.
BREAKPOINT_ATOL = 1e-9


def _wrap(x):
    return np.mod(x, TWO_PI)


def _as_float_array(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Piecewise periodic functions
# ---------------------------------------------------------------------------

_X = sp.Symbol("x", real=True)


def _lambdify_scalar(expr, symbol):
    """Lambdify that always broadcasts to the input shape."""
    raw = sp.lambdify(symbol, expr, "numpy")

    def fn(v):
        v = np.asarray(v, dtype=float)
        out = raw(v)
        out = np.asarray(out, dtype=float)
        if out.shape != v.shape:
            out = np.broadcast_to(out, v.shape).copy()
        return out if v.ndim else float(out)

    return fn


@dataclass(frozen=True)
class SmoothPiece:
    """One smooth segment of a piecewise function.

    ``derivs[n]`` evaluates the n-th derivative; all are closed forms, valid
    on the closed interval [lo, hi] so one-sided limits at the ends are just
    evaluations.
    """

    lo: float
    hi: float
    derivs: tuple


class PiecewisePeriodicFunction:
    """A 2pi-periodic function made of smooth closed-form segments.

    The function is C^{k-1}; its k-th derivative jumps exactly at the
    declared breakpoints (k = ``smoothness_order``).  Construction validates
    the tiling, the continuity of the first k-1 derivatives across every
    joint including the periodic wrap, and that declared breakpoints (and
    only those) carry a nonzero k-th-derivative jump.
    """

    def __init__(self, pieces, breakpoints, smoothness_order, *, name="",
                 fourier=None, validate=True):
        if smoothness_order < 1:
            raise UnsupportedOrderError(
                "smoothness order must be >= 1 (value discontinuities are not supported)")
        pieces = tuple(sorted(pieces, key=lambda s: s.lo))
        self.pieces = pieces
        self.breakpoints = tuple(sorted(_wrap(b) for b in breakpoints))
        self.smoothness_order = int(smoothness_order)
        self.name = name
        self.fourier = fourier
        self._los = np.array([s.lo for s in pieces])
        self.max_order = min(len(s.derivs) - 1 for s in pieces)
        if validate:
            self._validate()

    # -- evaluation ---------------------------------------------------------

    def derivative(self, x, order=0):
        if order > self.max_order:
            raise UnsupportedOrderError(
                f"derivative order {order} exceeds stored closed forms ({self.max_order})")
        xs = _as_float_array(x)
        xr = np.atleast_1d(_wrap(xs))
        idx = np.clip(np.searchsorted(self._los, xr, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(xr)
        for i, piece in enumerate(self.pieces):
            m = idx == i
            if np.any(m):
                out[m] = piece.derivs[order](xr[m])
        return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

    def __call__(self, x):
        return self.derivative(x, 0)

    # -- breakpoint structure -----------------------------------------------

    def _piece_pair_at(self, joint):
        """Pieces immediately left and right of a joint coordinate."""
        j = _wrap(joint)
        for i, piece in enumerate(self.pieces):
            if abs(piece.lo - j) <= BREAKPOINT_ATOL:
                return self.pieces[i - 1], piece
        if abs(j) <= BREAKPOINT_ATOL or abs(j - TWO_PI) <= BREAKPOINT_ATOL:
            return self.pieces[-1], self.pieces[0]
        return None

    def _one_sided(self, joint, order, side):
        left, right = self._piece_pair_at(joint)
        piece = right if side > 0 else left
        edge = piece.lo if side > 0 else piece.hi
        return float(piece.derivs[order](np.array([edge]))[0])

    def jump(self, x_star, order):
        """Right minus left limit of the order-th derivative at x_star.

        Returns 0 for points that are not declared breakpoints (the function
        is smooth there by validation).
        """
        if order > self.max_order:
            raise UnsupportedOrderError(
                f"jump order {order} exceeds stored closed forms ({self.max_order})")
        xs = _wrap(x_star)
        hit = [b for b in self.breakpoints
               if abs(b - xs) <= BREAKPOINT_ATOL
               or abs(b - xs + TWO_PI) <= BREAKPOINT_ATOL
               or abs(b - xs - TWO_PI) <= BREAKPOINT_ATOL]
        if not hit:
            return 0.0
        if order < self.smoothness_order:
            return 0.0
        return self._one_sided(hit[0], order, +1) - self._one_sided(hit[0], order, -1)

    # -- validation ----------------------------------------------------------

    def _validate(self):
        k = self.smoothness_order
        if abs(self.pieces[0].lo) > BREAKPOINT_ATOL or abs(self.pieces[-1].hi - TWO_PI) > BREAKPOINT_ATOL:
            raise ValidationError(f"{self.name}: pieces must tile [0, 2pi)")
        for a, b in zip(self.pieces, self.pieces[1:]):
            if abs(a.hi - b.lo) > BREAKPOINT_ATOL:
                raise ValidationError(f"{self.name}: gap or overlap at {a.hi}")
        joints = [p.lo for p in self.pieces] + [0.0]
        scale = max(1.0, float(np.max(np.abs(self(np.linspace(0, TWO_PI, 257))))))
        for j in sorted(set(_wrap(v) for v in joints)):
            for order in range(k):
                gap = self._one_sided(j, order, +1) - self._one_sided(j, order, -1)
                if abs(gap) > 1e-10 * scale:
                    raise ValidationError(
                        f"{self.name}: derivative {order} discontinuous at joint {j:.6f} (gap {gap:.2e})")
        declared = set()
        for b in self.breakpoints:
            if self._piece_pair_at(b) is None:
                raise ValidationError(f"{self.name}: breakpoint {b:.6f} is not a piece joint")
            if abs(self.jump(b, k)) <= 1e-10 * scale:
                raise ValidationError(f"{self.name}: declared breakpoint {b:.6f} has no order-{k} jump")
            declared.add(min(self.breakpoints, key=lambda v: abs(v - b)))
        for j in sorted(set(_wrap(v) for v in joints)):
            if any(abs(j - b) <= BREAKPOINT_ATOL for b in self.breakpoints):
                continue
            left, right = self._piece_pair_at(j)
            gap = self._one_sided(j, k, +1) - self._one_sided(j, k, -1)
            if abs(gap) > 1e-8 * max(1.0, scale):
                raise ValidationError(
                    f"{self.name}: undeclared order-{k} jump {gap:.2e} at joint {j:.6f}")


def piecewise_from_exprs(pieces, breakpoints, smoothness_order, *, name="",
                         max_order=None, fourier=None):
    """Build a PiecewisePeriodicFunction from sympy expressions in x.

    ``pieces`` is a sequence of (lo, hi, expr).  Derivatives are generated
    symbolically up to ``max_order`` (default: smoothness_order + 4, at
    least 6).
    """
    if max_order is None:
        max_order = max(smoothness_order + 4, 6)
    built = []
    for lo, hi, expr in pieces:
        expr = sp.sympify(expr)
        derivs = tuple(_lambdify_scalar(sp.diff(expr, _X, n), _X)
                       for n in range(max_order + 1))
        built.append(SmoothPiece(float(lo), float(hi), derivs))
    return PiecewisePeriodicFunction(built, breakpoints, smoothness_order,
                                     name=name, fourier=fourier)


def constant_potential(value=0.0):
    """A smooth constant potential (no breakpoints)."""
    c = sp.Float(value)
    return piecewise_from_exprs([(0.0, TWO_PI, c)], (), 1, name=f"const({value})",
                                fourier=lambda m: complex(value) if m == 0 else 0.0)


def jump_at(f: PiecewisePeriodicFunction, x_star, order):
    """One-sided derivative difference of f at x_star (right minus left)."""
    return f.jump(x_star, order)


# ---------------------------------------------------------------------------
# Kinetic energies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentumKink:
    """An isolated derivative jump of the kinetic energy at p = location."""

    location: float
    order: int
    jump: float


@dataclass(frozen=True)
class KineticForm:
    """Kinetic energy E(p) on the real momentum line.

    ``deriv`` is dE/dp away from kinks; one-sided values at a kink follow
    from the kink metadata.  ``stationary`` lists the zeros of dE/dp, which
    together with the kinks delimit the monotone pieces used for root
    finding.  ``even_center`` is the reflection center c with
    E(c + u) = E(c - u), or None when there is no such symmetry.
    ``inv_outer`` inverts E on the outermost increasing piece (p large).
    """

    label: str
    value: Callable
    deriv: Callable
    kinks: tuple = ()
    stationary: tuple = ()
    even_center: float | None = 0.0
    inv_outer: Callable | None = None

    def momentum_roots(self, u, p_max=None):
        """All real solutions of E(p) = u, ordered ascending.

        Bracketed bisection on each monotone piece; the outer brackets grow
        until E exceeds u on both sides.
        """
        from scipy.optimize import brentq

        nodes = sorted(set(self.stationary) | {k.location for k in self.kinks})
        span = max((abs(v) for v in nodes), default=1.0) + 1.0
        if p_max is None:
            p_max = span
            while self.value(p_max) <= u or self.value(-p_max) <= u:
                p_max *= 2.0
                if p_max > 1e12:
                    raise ValidationError("kinetic energy does not exceed the target energy")
        edges = [-p_max] + nodes + [p_max]
        roots = []
        for a, b in zip(edges, edges[1:]):
            fa = self.value(a) - u
            fb = self.value(b) - u
            if fa == 0.0:
                roots.append(a)
                continue
            if fa * fb < 0.0:
                roots.append(brentq(lambda p: self.value(p) - u, a, b,
                                    xtol=1e-14, rtol=8.9e-16))
            elif fb == 0.0 and b == edges[-1]:
                roots.append(b)
        uniq = []
        for r in sorted(roots):
            if not uniq or abs(r - uniq[-1]) > 1e-12:
                uniq.append(r)
        return uniq


def quadratic_kinetic():
    return KineticForm(
        label="p^2/2",
        value=lambda p: np.asarray(p, dtype=float) ** 2 / 2.0,
        deriv=lambda p: np.asarray(p, dtype=float),
        stationary=(0.0,),
        even_center=0.0,
        inv_outer=lambda u: np.sqrt(2.0 * u),
    )


def abs_kinetic(p_c=0.0):
    """E(p) = |p - p_c|, a single order-1 kink of intensity 2 at p_c."""
    return KineticForm(
        label=f"|p - {p_c}|" if p_c else "|p|",
        value=lambda p: np.abs(np.asarray(p, dtype=float) - p_c),
        deriv=lambda p: np.sign(np.asarray(p, dtype=float) - p_c),
        kinks=(MomentumKink(p_c, 1, 2.0),),
        even_center=p_c,
        inv_outer=lambda u: p_c + u,
    )


def quartic_double_kinetic():
    """E(p) = (p^2 - 1)^2, a symmetric double well in momentum."""
    return KineticForm(
        label="(p^2-1)^2",
        value=lambda p: (np.asarray(p, dtype=float) ** 2 - 1.0) ** 2,
        deriv=lambda p: 4.0 * np.asarray(p, dtype=float) * (np.asarray(p, dtype=float) ** 2 - 1.0),
        stationary=(-1.0, 0.0, 1.0),
        even_center=0.0,
        inv_outer=lambda u: np.sqrt(1.0 + np.sqrt(u)),
    )


def zero_kinetic():
    return KineticForm(
        label="0",
        value=lambda p: np.zeros_like(np.asarray(p, dtype=float)),
        deriv=lambda p: np.zeros_like(np.asarray(p, dtype=float)),
        even_center=None,
    )


# ---------------------------------------------------------------------------
# Non-smooth loci and assembled systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonSmoothLocus:
    """A straight line in phase space where some derivative of H jumps.

    For an x-line the jump is a number (the k-th x-derivative jump of V at
    x = location).  For a p-line the jump of the k-th p-derivative of H may
    depend on x, so it is stored as a function of x.
    """

    axis: str                      # "x" or "p"
    location: float
    order: int
    jump: float | Callable

    def jump_value(self, coord=None):
        if callable(self.jump):
            if coord is None:
                raise ValueError("x coordinate required for a p-line jump")
            return float(np.real(self.jump(coord)))
        return float(self.jump)


@dataclass(frozen=True)
class MixedTerm:
    """One Fourier harmonic T_q(p) e^{iqx} of the Hamiltonian."""

    harmonic: int
    coefficient: Callable


@dataclass(frozen=True)
class CircleSystem:
    """A quantizable Hamiltonian on the cylinder.

    ``p_offset`` shifts the quantized momentum grid (p_n = n hbar + p_offset);
    it is 0 for plain circle systems and 0 or hbar/2 for mapped spin systems.
    All fields are immutable; instances are safe to share across workers.
    """

    kinetic: KineticForm
    potential: PiecewisePeriodicFunction
    hbar: float
    mixed_terms: tuple = ()
    p_offset: float = 0.0
    x_loci: tuple = ()
    p_loci: tuple = ()

    def __post_init__(self):
        if self.hbar <= 0:
            raise ValidationError("hbar must be positive")
        harmonics = {t.harmonic for t in self.mixed_terms}
        for t in self.mixed_terms:
            if -t.harmonic not in harmonics:
                raise ValidationError(
                    f"mixed term q={t.harmonic} lacks its Hermitian partner q={-t.harmonic}")

    def hamiltonian(self, x, p):
        """Classical symbol H(x, p), real for Hermitian term sets."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        h = self.kinetic.value(p) + self.potential(x)
        if self.mixed_terms:
            acc = np.zeros(np.broadcast(x, p).shape, dtype=complex)
            for t in self.mixed_terms:
                acc = acc + np.asarray(t.coefficient(p), dtype=complex) * np.exp(1j * t.harmonic * x)
            h = h + np.real(acc)
        return h if h.ndim else float(h)

    def hamiltonian_dx(self, x, p):
        """dH/dx at fixed p (one value; breakpoints of V use the right limit)."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        g = self.potential.derivative(x, 1)
        if self.mixed_terms:
            acc = np.zeros(np.broadcast(x, p).shape, dtype=complex)
            for t in self.mixed_terms:
                acc = acc + (1j * t.harmonic) * np.asarray(t.coefficient(p), dtype=complex) \
                    * np.exp(1j * t.harmonic * x)
            g = g + np.real(acc)
        return g if np.asarray(g).ndim else float(g)

    @property
    def separable(self):
        return not self.mixed_terms


def circle_system(kinetic, potential, hbar, *, mixed_terms=(), p_offset=0.0,
                  extra_p_loci=()):
    """Assemble a CircleSystem, deriving its non-smooth loci.

    x-lines come from the declared potential breakpoints; p-lines from the
    kinetic kinks plus any explicitly supplied loci (mapped spin systems).
    """
    k = potential.smoothness_order
    x_loci = tuple(NonSmoothLocus("x", b, k, potential.jump(b, k))
                   for b in potential.breakpoints)
    p_loci = tuple(NonSmoothLocus("p", kk.location, kk.order, float(kk.jump))
                   for kk in kinetic.kinks) + tuple(extra_p_loci)
    return CircleSystem(kinetic=kinetic, potential=potential, hbar=hbar,
                        mixed_terms=tuple(mixed_terms), p_offset=p_offset,
                        x_loci=x_loci, p_loci=p_loci)


# ---------------------------------------------------------------------------
# Spin systems and the sphere-to-cylinder map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinSystem:
    """A spin Hamiltonian, piecewise polynomial in (J1, J2, J3) by sign of J3.

    Blocks map monomial exponent triples (a, b, c) for J1^a J2^b J3^c to real
    coefficients; total degree at most 2 per monomial.  The classical radius
    is J = (j + 1/2) hbar so the sphere area in units of 2 pi hbar equals the
    dimension 2j + 1.
    """

    j: float
    hbar: float
    upper_block: Mapping          # applies for J3 >= 0
    lower_block: Mapping          # applies for J3 < 0

    def __post_init__(self):
        if self.j <= 0 or round(2 * self.j) != 2 * self.j:
            raise ValidationError("j must be a positive multiple of 1/2")
        for block in (self.upper_block, self.lower_block):
            for mono in block:
                if len(mono) != 3 or sum(mono) > 2 or min(mono) < 0:
                    raise UnsupportedFormError(
                        f"monomial {mono} outside the degree-2 polynomial family")

    @property
    def radius(self):
        return (self.j + 0.5) * self.hbar

    @property
    def p_offset(self):
        """0 for integer j, hbar/2 for half-integer j."""
        return 0.0 if float(self.j).is_integer() else 0.5 * self.hbar

    @property
    def dimension(self):
        return int(round(2 * self.j + 1))

    def evaluate(self, j1, j2, j3):
        block = self.upper_block if j3 >= 0 else self.lower_block
        return sum(c * j1 ** a * j2 ** b * j3 ** d for (a, b, d), c in block.items())


def _block_expr(block, j1, j2, j3):
    return sum(sp.Float(c) * j1 ** a * j2 ** b * j3 ** d
               for (a, b, d), c in block.items())


def spin_to_circle(spin: SpinSystem) -> CircleSystem:
    """Map a SpinSystem onto the cylinder (J cos(theta) + p0, phi) = (p, x).

    Substituting J1 = R(p) cos x, J2 = R(p) sin x, J3 = p - p0 with
    R = sqrt(J^2 - (p - p0)^2) gives a finite Fourier series
    sum_q T_q(p) e^{iqx} whose coefficients are piecewise in p at p = p0.
    When only the q = 0 harmonic survives the result is stored as a plain
    kinetic energy; otherwise every harmonic (including q = 0) becomes a
    mixed term and the kinetic part is zero.
    """
    p = sp.Symbol("p", real=True)
    z = sp.Symbol("z")          # stands for e^{ix}
    J = sp.Float(spin.radius)
    p0 = sp.Float(spin.p_offset)
    u = p - p0
    R = sp.sqrt(J ** 2 - u ** 2)
    j1, j2, j3 = R * (z + 1 / z) / 2, R * (z - 1 / z) / (2 * sp.I), u

    # Laurent coefficients in z are exactly the Fourier harmonics T_q(p).
    max_q = 2
    coeffs = []
    for block in (spin.upper_block, spin.lower_block):
        expr = sp.expand(_block_expr(block, j1, j2, j3) * z ** max_q)
        poly = sp.Poly(expr, z)
        coeffs.append({q: sp.simplify(poly.coeff_monomial(z ** (q + max_q)))
                       for q in range(-max_q, max_q + 1)})
    tq = {}          # harmonic -> (upper expr, lower expr) in p
    for q in range(-max_q, max_q + 1):
        pair = (coeffs[0][q], coeffs[1][q])
        if any(e.is_zero is not True for e in pair):
            tq[q] = pair

    # locus structure at p = p0: lowest order with a p-derivative jump
    diff_exprs = {q: sp.expand(upper - lower) for q, (upper, lower) in tq.items()}
    order = None
    for n in range(0, 5):
        vals = {q: complex(sp.diff(d, p, n).subs(p, p0)) for q, d in diff_exprs.items()}
        if any(abs(v) > 1e-12 * max(1.0, float(J) ** 2) for v in vals.values()):
            if n == 0:
                raise UnsupportedFormError("blocks are discontinuous at J3 = 0")
            order = n
            jump_vals = vals
            break
    p0f = float(p0)

    def make_coeff(pair):
        f_up = sp.lambdify(p, pair[0], "numpy")
        f_lo = sp.lambdify(p, pair[1], "numpy")

        def coeff(pv):
            pv = np.asarray(pv, dtype=float)
            up = np.broadcast_to(np.asarray(f_up(pv), dtype=complex), pv.shape)
            lo = np.broadcast_to(np.asarray(f_lo(pv), dtype=complex), pv.shape)
            out = np.where(pv >= p0f, up, lo)
            return out if pv.ndim else complex(out)

        return coeff

    hbar = spin.hbar
    pot = constant_potential(0.0)
    if set(tq) <= {0}:
        pair = tq.get(0, (sp.Float(0), sp.Float(0)))
        if sp.simplify(pair[0] - pair[1]).is_zero is True:
            # globally smooth p-only Hamiltonian: a plain kinetic form
            val = sp.lambdify(p, pair[0], "numpy")
            dv = sp.lambdify(p, sp.diff(pair[0], p), "numpy")
            kin = KineticForm(
                label=str(pair[0]),
                value=lambda q_, f=val: np.asarray(f(np.asarray(q_, dtype=float)), dtype=float)
                + 0.0 * np.asarray(q_, dtype=float),
                deriv=lambda q_, f=dv: np.asarray(f(np.asarray(q_, dtype=float)), dtype=float)
                + 0.0 * np.asarray(q_, dtype=float),
                even_center=None,
            )
            return circle_system(kin, pot, hbar, p_offset=float(p0))

    if order is None:
        # identical blocks: smooth mixed system, no locus
        mixed = tuple(MixedTerm(q, make_coeff(pair)) for q, pair in sorted(tq.items()))
        return CircleSystem(kinetic=zero_kinetic(), potential=pot, hbar=hbar,
                            mixed_terms=mixed, p_offset=float(p0))

    def jump_fn(xv, vals=jump_vals):
        xv = np.asarray(xv, dtype=float)
        acc = np.zeros(xv.shape, dtype=complex)
        for q, v in vals.items():
            acc = acc + v * np.exp(1j * q * xv)
        out = np.real(acc)
        return out if xv.ndim else float(out)

    locus = NonSmoothLocus("p", p0f, order, jump_fn)
    mixed = tuple(MixedTerm(q, make_coeff(pair)) for q, pair in sorted(tq.items()))
    return CircleSystem(kinetic=zero_kinetic(), potential=pot, hbar=hbar,
                        mixed_terms=mixed, p_offset=float(p0),
                        x_loci=(), p_loci=(locus,))
