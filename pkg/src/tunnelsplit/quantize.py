"""Exact quantization of circle systems in the plane-wave momentum basis.

The Hamiltonian matrix over |r> ~ e^{irx} has the kinetic energy on the
diagonal and the potential Fourier coefficients V_m on the m-th
sub/superdiagonal; mixed harmonics T_q(p) e^{iqx} are placed with the
symmetric midpoint rule, T_q evaluated at the mean of the bra and ket
momenta.  Dense diagonalization then yields the spectrum from which
near-degenerate pairs and their scaled splittings are extracted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import toeplitz

from .exceptions import (BasisCapError, EigensolverError, ToleranceError,
                         ValidationError)
from .model import TWO_PI, CircleSystem, PiecewisePeriodicFunction

FOURIER_ABS_TOL = 1e-13
DEFAULT_BASIS_CAP = 2 ** 14


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentumBasis:
    """Plane-wave basis with momentum grid p = index * hbar + p_offset.

    Circle systems use integer indices -N..N.  Spin systems use the 2j+1
    magnetic indices -j..j (half-integers for half-integer j) so the grid
    reproduces the J3 spectrum after the offset.
    """

    indices: np.ndarray
    hbar: float
    p_offset: float = 0.0

    @property
    def momenta(self):
        return self.indices * self.hbar + self.p_offset

    @property
    def size(self):
        return len(self.indices)

    @classmethod
    def for_circle(cls, n_max, hbar, p_offset=0.0):
        return cls(np.arange(-n_max, n_max + 1, dtype=float), hbar, p_offset)

    @classmethod
    def for_spin(cls, j, hbar):
        d = int(round(2 * j + 1))
        p0 = 0.0 if float(j).is_integer() else 0.5 * hbar
        return cls(-j + np.arange(d, dtype=float), hbar, p0)


def basis_size_for(system: CircleSystem, eps_max, pad=120):
    """Basis half-size reaching past the classical support of eps_max.

    Finds the smallest N with E(+-N hbar + p0) above eps_max plus the
    potential spread, then pads by a fixed number of momentum states; the
    pad keeps the perturbative truncation tail (couplings fall off at least
    as fast as 1/m^2) below roughly 1e-12 for sub-cutoff eigenvalues.
    """
    v = system.potential(np.linspace(0, TWO_PI, 512))
    margin = float(np.max(v) - np.min(v))
    n = max(4, int(round(1.0 / system.hbar)))
    while True:
        lo = system.kinetic.value(-n * system.hbar + system.p_offset)
        hi = system.kinetic.value(n * system.hbar + system.p_offset)
        if min(lo, hi) > eps_max + margin:
            return n + pad
        n = int(np.ceil(n * 1.4)) + 1
        if n > 10 ** 8:
            raise BasisCapError("kinetic energy never exceeds the requested cutoff")


# ---------------------------------------------------------------------------
# Fourier coefficients of the potential
# ---------------------------------------------------------------------------


def potential_fourier(f: PiecewisePeriodicFunction, m: int) -> complex:
    """V_m = (1/2pi) int_0^{2pi} V(x) e^{-imx} dx.

    Uses the closed form attached to the function when available, otherwise
    oscillatory-weight adaptive quadrature on each smooth piece (so every
    panel integrates an analytic function).
    """
    if f.fourier is not None:
        return complex(f.fourier(int(m)))
    m = int(m)
    total = 0.0 + 0.0j
    err = 0.0
    for piece in f.pieces:
        g = piece.derivs[0]
        if abs(m) <= 16:
            # non-oscillatory regime: plain panels are cheaper and their
            # error estimates are tight
            re, e1 = quad(lambda t: g(t) * np.cos(m * t), piece.lo, piece.hi,
                          epsabs=FOURIER_ABS_TOL, epsrel=1e-13, limit=300)
            im, e2 = quad(lambda t: g(t) * np.sin(m * t), piece.lo, piece.hi,
                          epsabs=FOURIER_ABS_TOL, epsrel=1e-13, limit=300)
        else:
            re, e1 = quad(g, piece.lo, piece.hi, weight="cos", wvar=m,
                          epsabs=FOURIER_ABS_TOL, limit=300)
            im, e2 = quad(g, piece.lo, piece.hi, weight="sin", wvar=m,
                          epsabs=FOURIER_ABS_TOL, limit=300)
        total += re - 1j * im
        err += e1 + e2
    if err > 1e-9:
        raise ToleranceError(
            f"Fourier quadrature for m={m} reached only {err:.2e}",
            estimate=total / TWO_PI, achieved=err)
    return total / TWO_PI


# ---------------------------------------------------------------------------
# Matrix assembly and diagonalization
# ---------------------------------------------------------------------------


def build_matrix(system: CircleSystem, basis: MomentumBasis) -> np.ndarray:
    """Hermitian Hamiltonian matrix, exact Hermiticity by construction.

    Entry (r, r) = E(p_r) + V_0 + T_0(p_r); entry (r + m, r) = V_m plus any
    T_m evaluated at the midpoint momentum.
    """
    d = basis.size
    p = basis.momenta
    col = np.array([potential_fourier(system.potential, m) for m in range(d)],
                   dtype=complex)
    mat = toeplitz(col, np.conj(col)).astype(complex)
    np.fill_diagonal(mat, col[0].real + system.kinetic.value(p))
    for term in system.mixed_terms:
        q = term.harmonic
        if q < 0:
            continue          # filled through the Hermitian mirror
        if q == 0:
            np.fill_diagonal(mat, mat.diagonal() + np.real(term.coefficient(p)))
            continue
        mid = (basis.indices[:d - q] + q / 2.0) * basis.hbar + basis.p_offset
        vals = np.asarray(term.coefficient(mid), dtype=complex)
        idx = np.arange(d - q)
        mat[idx + q, idx] += vals
        mat[idx, idx + q] += np.conj(vals)
    if np.max(np.abs(mat.imag)) <= 1e-14 * max(1.0, np.max(np.abs(mat.real))):
        return np.ascontiguousarray(mat.real)
    return mat


@dataclass
class SpectrumResult:
    """Eigenvalues (ascending), eigenvectors (columns), and diagnostics."""

    energies: np.ndarray
    vectors: np.ndarray
    basis: MomentumBasis
    p2: np.ndarray = field(init=False)
    sectors: tuple = field(init=False)

    def __post_init__(self):
        w = np.abs(self.vectors) ** 2
        self.p2 = w.T @ self.basis.momenta ** 2
        frac_even = w.T @ (np.round(self.basis.indices).astype(int) % 2 == 0)
        self.sectors = tuple("even" if f > 0.5 else "odd" for f in frac_even)

    def __len__(self):
        return len(self.energies)


def p2_expectation(vector, basis: MomentumBasis) -> float:
    """<p^2> of a normalized momentum-space state vector."""
    return float(np.abs(np.asarray(vector)) ** 2 @ basis.momenta ** 2)


def diagonalize(matrix, basis: MomentumBasis) -> SpectrumResult:
    """Full dense eigendecomposition of a Hermitian matrix."""
    herm_defect = np.max(np.abs(matrix - matrix.conj().T))
    if herm_defect != 0.0:
        raise ValidationError(f"matrix is not Hermitian (defect {herm_defect:.2e})")
    try:
        ev, vec = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolver failed: {exc}", info=str(exc)) from exc
    # exact ties: order by the dominant momentum index (labeling only)
    ties = np.flatnonzero(np.diff(ev) == 0.0)
    for i in ties:
        a, b = np.argmax(np.abs(vec[:, i])), np.argmax(np.abs(vec[:, i + 1]))
        if a > b:
            vec[:, [i, i + 1]] = vec[:, [i + 1, i]]
    return SpectrumResult(ev, vec, basis)


def solve_system(system: CircleSystem, eps_max, *, n_basis=None) -> SpectrumResult:
    """Convenience: build the matrix at a sufficient basis size and solve."""
    if n_basis is None:
        n_basis = basis_size_for(system, eps_max)
    basis = MomentumBasis.for_circle(n_basis, system.hbar, system.p_offset)
    return diagonalize(build_matrix(system, basis), basis)


def convergence_check(system: CircleSystem, eps_max, tolerance, *,
                      n_start=None, cap=DEFAULT_BASIS_CAP) -> int:
    """Smallest tested basis half-size N whose sub-cutoff eigenvalues move
    by less than ``tolerance`` when N doubles."""
    if tolerance <= 0:
        raise ValidationError("tolerance must be positive")
    n = n_start or basis_size_for(system, eps_max)
    prev = None
    while n <= cap:
        basis = MomentumBasis.for_circle(n, system.hbar, system.p_offset)
        all_ev = np.linalg.eigvalsh(build_matrix(system, basis))
        ev = all_ev[all_ev <= eps_max]
        if prev is not None and len(prev) == len(ev):
            if np.max(np.abs(prev - ev)) < tolerance:
                return n // 2
        prev = ev
        n *= 2
    raise BasisCapError(f"no convergence below basis cap {cap}")


# ---------------------------------------------------------------------------
# Near-degenerate pair extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NDPair:
    """One near-degenerate level pair.

    ``eta`` is the splitting scaled by the distance between the two
    neighboring pair means; None when a neighbor pair is missing.
    """

    index: int
    lower: float
    upper: float
    eta: float | None = None
    p2: float | None = None
    sectors: tuple = ()
    near_separatrix: bool = False

    @property
    def mean(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def delta(self):
        return self.upper - self.lower


def find_nd_pairs(spectrum, window=None, gap_ratio=0.25, *,
                  state_filter: Optional[Callable] = None,
                  separatrices: Sequence[float] = (),
                  separatrix_band: float = 0.0):
    """Cluster a sorted spectrum into near-degenerate pairs.

    Consecutive levels pair up when their gap is below ``gap_ratio`` times
    the smaller of the two surrounding gaps; the rule makes pairs disjoint
    automatically.  ``state_filter(energy, p2) -> bool`` drops states before
    pairing (e.g. an expectation-value filter separating torus families).
    Pairs inside ``separatrix_band`` of any separatrix energy are flagged,
    not dropped.
    """
    if not 0.0 < gap_ratio < 1.0:
        raise ValidationError("gap_ratio must lie in (0, 1)")
    if isinstance(spectrum, SpectrumResult):
        energies = spectrum.energies
        p2 = spectrum.p2
        sectors = spectrum.sectors
    else:
        energies = np.asarray(spectrum, dtype=float)
        p2 = None
        sectors = None

    idx = np.arange(len(energies))
    if state_filter is not None:
        keep = np.array([state_filter(energies[i], None if p2 is None else p2[i])
                         for i in idx], dtype=bool)
        idx = idx[keep]
    e = energies[idx]
    if len(e) < 2:
        return []

    gaps = np.diff(e)
    raw = []
    for i in range(len(gaps)):
        left = gaps[i - 1] if i >= 1 else np.inf
        right = gaps[i + 1] if i + 1 < len(gaps) else np.inf
        if gaps[i] < gap_ratio * min(left, right):
            raw.append(i)

    pairs = []
    for n, i in enumerate(raw):
        lo, hi = e[i], e[i + 1]
        mean = 0.5 * (lo + hi)
        pair_p2 = None if p2 is None else 0.5 * (p2[idx[i]] + p2[idx[i + 1]])
        sec = () if sectors is None else (sectors[idx[i]], sectors[idx[i + 1]])
        near = any(abs(mean - s) < separatrix_band for s in separatrices)
        pairs.append(NDPair(index=n, lower=lo, upper=hi, p2=pair_p2,
                            sectors=sec, near_separatrix=near))

    # scaled splitting from neighbor-pair means, then the window cut
    means = [p.mean for p in pairs]
    out = []
    for n, p in enumerate(pairs):
        eta = None
        if 0 < n < len(pairs) - 1:
            span = means[n + 1] - means[n - 1]
            if span > 0:
                eta = 2.0 * p.delta / span
        out.append(NDPair(index=n, lower=p.lower, upper=p.upper, eta=eta,
                          p2=p.p2, sectors=p.sectors,
                          near_separatrix=p.near_separatrix))
    if window is not None:
        lo, hi = window
        out = [p for p in out if lo <= p.mean <= hi]
    return out
