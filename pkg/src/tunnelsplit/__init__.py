"""Exact and semiclassical level splittings for non-smooth circle Hamiltonians.

The package quantizes 1D periodic systems H = E(p) + V(x) (and mapped spin
systems) in the plane-wave basis, extracts near-degenerate level pairs, and
predicts their splittings at leading semiclassical order from sums over
transition paths on the lines where the Hamiltonian has a derivative jump.
For a jump of order k the splitting decays as hbar^{k+1}, in contrast to
the exponentially small splittings of smooth systems.
"""

from .model import (CircleSystem, KineticForm, MixedTerm, MomentumKink,
                    NonSmoothLocus, PiecewisePeriodicFunction, SmoothPiece,
                    SpinSystem, abs_kinetic, circle_system, constant_potential,
                    jump_at, piecewise_from_exprs, quadratic_kinetic,
                    quartic_double_kinetic, spin_to_circle, zero_kinetic)
from .quantize import (MomentumBasis, NDPair, SpectrumResult, build_matrix,
                       convergence_check, diagonalize, find_nd_pairs,
                       p2_expectation, potential_fourier, solve_system)
from .classical import (Branch, Torus, TorusClass, TransitionPath, action,
                        build_torus, ebk_levels, find_transition_paths, period,
                        phase_integral, rotational_classes, upper_loop_area,
                        well_classes)
from .predictor import (PathContribution, PredictionReport, amplitude,
                        caustic_phases, circle_lattice_sum,
                        fourier_asymptotics, path_sum_prediction,
                        reflection_coefficient, relative_phase,
                        splitting_direct)
from . import catalog, exceptions

__version__ = "0.1.0"
