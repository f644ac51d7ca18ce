import numpy as np
import pytest
from scipy.integrate import quad

from tunnelsplit import classical as C
from tunnelsplit import model as M
from tunnelsplit import catalog as CAT
from tunnelsplit.catalog import (abs_cos_potential, cos_bump_potential,
                                 cos_squared_potential)
from tunnelsplit.exceptions import (ProjectionError, SingularTorusError,
                                    TangencyError)

PI = np.pi


def h2_system(hbar=0.02):
    return M.circle_system(M.quadratic_kinetic(), abs_cos_potential(), hbar)


# ---------------------------------------------------------------------------
# Actions and periods
# ---------------------------------------------------------------------------


def test_action_constant_momentum():
    sys_ = M.circle_system(M.abs_kinetic(0.0), M.constant_potential(0.0), 0.1)
    op, om = C.rotational_classes(sys_)
    assert C.action(sys_, 2.0, op) == pytest.approx(4 * PI, rel=1e-12)
    assert C.action(sys_, 2.0, om) == pytest.approx(4 * PI, rel=1e-12)
    assert C.period(sys_, 2.0, op) == pytest.approx(2 * PI, rel=1e-12)


def test_action_quadratic_kinetic():
    sys_ = M.circle_system(M.quadratic_kinetic(), M.constant_potential(0.0), 0.1)
    op, _ = C.rotational_classes(sys_)
    assert C.action(sys_, 2.0, op) == pytest.approx(4 * PI, rel=1e-12)
    assert C.period(sys_, 2.0, op) == pytest.approx(PI, rel=1e-12)


def test_ex22_action_closed_form():
    # for |p| kinetics the rotational action is 2 pi (eps - mean V)
    sys_ = M.circle_system(M.abs_kinetic(0.0), cos_bump_potential(1), 0.04)
    op, _ = C.rotational_classes(sys_)
    for eps in (1.5, 2.0, 2.7):
        assert C.action(sys_, eps, op) == pytest.approx(
            2 * PI * (eps - 1 / PI), rel=1e-11)


def test_time_reversal_action_equality():
    specs = [
        ("H2", dict(hbar=0.02), "rotational", 2.0),
        ("ex2.1", dict(hbar=0.05, k=2), "rotational", 2.0),
        ("ex2.2", dict(hbar=0.04, k=3), "rotational", 2.0),
        ("ex3.1", dict(hbar=0.02), "outer", 0.5),
        ("ex3.1", dict(hbar=0.02), "rotational", 2.0),
    ]
    for ident, params, base, eps in specs:
        built = CAT.build(ident, **params)
        sp = C.action(built.system, eps, built.torus_classes[base + "+"])
        sm = C.action(built.system, eps, built.torus_classes[base + "-"])
        assert abs(sp - sm) < 1e-10 * abs(sp)


@pytest.mark.parametrize("ident,params,cls,window", [
    ("H2", dict(hbar=0.02), "rotational+", (1.3, 3.0)),
    ("ex2.2", dict(hbar=0.04, k=2), "rotational+", (1.3, 3.0)),
    ("ex3.1", dict(hbar=0.02), "outer+", (0.15, 0.85)),
    ("ex3.2", dict(hbar=0.02), "well0", (0.15, 0.85)),
])
def test_period_is_action_derivative(ident, params, cls, window):
    built = CAT.build(ident, **params)
    tc = built.torus_classes[cls]
    for eps in np.linspace(*window, 20):
        h = 1e-5 * max(1.0, abs(eps))
        ds = (C.action(built.system, eps + h, tc)
              - C.action(built.system, eps - h, tc)) / (2 * h)
        T = C.period(built.system, eps, tc)
        assert ds == pytest.approx(T, rel=1e-6)


def test_spin_well_period_consistency():
    built = CAT.build("ex3.3", j=20)
    tc = built.torus_classes["spinwell0"]
    j2 = built.spin.radius ** 2
    for eps in (-0.7 * j2, -0.4 * j2):
        h = 1e-6 * j2
        ds = (C.action(built.system, eps + h, tc)
              - C.action(built.system, eps - h, tc)) / (2 * h)
        assert ds == pytest.approx(C.period(built.system, eps, tc), rel=1e-5)


def test_singular_torus_outside_range():
    sys_ = h2_system()
    op, _ = C.rotational_classes(sys_)
    with pytest.raises(SingularTorusError):
        C.action(sys_, 0.5, op)


# ---------------------------------------------------------------------------
# Phase integrals
# ---------------------------------------------------------------------------


def test_phase_integral_free():
    sys_ = M.circle_system(M.quadratic_kinetic(), M.constant_potential(0.0), 0.1)
    op, _ = C.rotational_classes(sys_)
    assert C.phase_integral(sys_, 2.0, op, 1.3) == pytest.approx(2.6, rel=1e-12)


def test_phase_integral_closes_to_action():
    sys_ = h2_system()
    op, _ = C.rotational_classes(sys_)
    s_full = C.phase_integral(sys_, 2.0, op, 2 * PI)
    assert s_full == pytest.approx(C.action(sys_, 2.0, op), rel=1e-11)


def test_phase_integral_quadrature_oracle():
    # independent oracle: direct quad of sqrt(2 (eps - V)) on [0, pi/2]
    sys_ = M.circle_system(M.quadratic_kinetic(), cos_bump_potential(1), 0.05)
    op, _ = C.rotational_classes(sys_)
    expected, _ = quad(lambda x: np.sqrt(2 * (2.0 - max(np.cos(x), 0.0))),
                       0, PI / 2, epsabs=1e-13, limit=200)
    assert C.phase_integral(sys_, 2.0, op, PI / 2) == pytest.approx(expected, rel=1e-10)


def test_phase_integral_rejects_multibranch():
    built = CAT.build("ex3.2", hbar=0.02)
    with pytest.raises(ProjectionError):
        C.phase_integral(built.system, 0.5, built.torus_classes["well0"], 1.0)


# ---------------------------------------------------------------------------
# EBK levels
# ---------------------------------------------------------------------------


def test_ebk_free_rotor():
    sys_ = M.circle_system(M.quadratic_kinetic(), M.constant_potential(0.0), 0.1)
    op, _ = C.rotational_classes(sys_)
    levels = C.ebk_levels(sys_, op, 0.1, energy_window=(0.05, 1.0))
    for n, eps in levels:
        assert eps == pytest.approx((n * 0.1) ** 2 / 2, rel=1e-10)


def test_ebk_ex22_levels():
    built = CAT.build("ex2.2", hbar=0.04, k=1)
    op = built.torus_classes["rotational+"]
    levels = C.ebk_levels(built.system, op, 0.04, energy_window=(1.5, 2.0))
    for n, eps in levels:
        assert eps == pytest.approx(n * 0.04 + 1 / PI, abs=1e-10)


def test_ebk_ex31_wells_match_quantum_pairs():
    # outer tori quantize with a half-integer offset (two caustic crossings)
    built = CAT.build("ex3.1", hbar=0.02)
    out_p = built.torus_classes["outer+"]
    levels = C.ebk_levels(built.system, out_p, 0.02, energy_window=(0.3, 0.6))
    assert levels
    spectrum = CAT.solve_built(built, eps_max=1.0)
    pairs = CAT.nd_pairs(built, spectrum, window=(0.3, 0.6))
    means = np.array([p.mean for p in pairs])
    for n, eps in levels:
        assert np.min(np.abs(means - eps)) < 0.15 * 0.02


# ---------------------------------------------------------------------------
# Transition paths
# ---------------------------------------------------------------------------


def test_h2_paths():
    sys_ = h2_system()
    paths = C.find_transition_paths(sys_, 2.0)
    assert len(paths) == 2
    for p in paths:
        assert p.length == pytest.approx(4.0, rel=1e-12)
        assert p.jump == pytest.approx(2.0)
        assert p.v_start == pytest.approx(2.0)
        assert p.loop_halves == 0
    assert sorted(p.start[0] for p in paths) == pytest.approx([PI / 2, 3 * PI / 2])


def test_ex31_paths_below_barrier():
    built = CAT.build("ex3.1", hbar=0.02)
    eps = 0.25
    paths = C.find_transition_paths(built.system, eps)
    assert len(paths) == 4
    mags = sorted({round(abs(p.start[1]), 10) for p in paths})
    assert mags == pytest.approx([np.sqrt(1 - np.sqrt(eps)), np.sqrt(1 + np.sqrt(eps))])
    assert sorted(p.loop_halves for p in paths) == [0, 1, 1, 2]
    for p in paths:
        assert p.jump == pytest.approx(4 / PI, rel=1e-10)


def test_ex31_single_path_above_barrier():
    built = CAT.build("ex3.1", hbar=0.02)
    paths = C.find_transition_paths(built.system, 2.0)
    assert len(paths) == 1
    assert paths[0].length == pytest.approx(2 * np.sqrt(1 + np.sqrt(2.0)), rel=1e-12)


def test_momentum_line_paths_geometry():
    built = CAT.build("ex3.2", hbar=0.02)
    eps = 0.5
    paths = C.find_transition_paths(built.system, eps)
    assert len(paths) == 4
    xc = np.arccos(np.sqrt(eps))
    lengths = sorted(p.length for p in paths)
    assert lengths == pytest.approx([2 * xc, PI, PI, 2 * PI - 2 * xc], rel=1e-10)
    hops = {round(p.length, 8): p.loop_halves for p in paths}
    assert hops[round(2 * xc, 8)] == 2
    assert hops[round(2 * PI - 2 * xc, 8)] == 0
    for p in paths:
        assert abs(p.v_start) == pytest.approx(2 * np.sqrt(eps * (1 - eps)), rel=1e-9)


def test_paths_on_energy_shell():
    built = CAT.build("ex3.1", hbar=0.02)
    for eps in (0.3, 0.7, 1.8):
        for p in C.find_transition_paths(built.system, eps):
            for x, pp in (p.start, p.end):
                assert built.system.hamiltonian(x, pp) == pytest.approx(eps, abs=1e-10)


def test_tangency_detection():
    # at eps = 1 the line x = pi meets the quartic kinetic at its stationary
    # point p = 0, where the path formula diverges
    built = CAT.build("ex3.1", hbar=0.02)
    locus = built.system.x_loci[0]
    with pytest.raises(TangencyError):
        C.transition_paths_x(built.system, 1.0, locus)


def test_h4_low_energy_uses_momentum_paths_only():
    built = CAT.build("H4", hbar=0.02)
    paths = C.find_transition_paths(built.system, 0.5)
    assert paths
    assert all(p.locus.axis == "p" for p in paths)
    # above the barrier the momentum line no longer meets the tori
    paths_hi = C.find_transition_paths(built.system, 2.0)
    assert all(p.locus.axis == "x" for p in paths_hi)


def test_spin_circle_paths():
    built = CAT.build("ex3.3", j=20)
    j2 = built.spin.radius ** 2
    eps = -0.5 * j2
    paths = C.find_transition_paths(built.system, eps)
    assert len(paths) == 4
    xc = 0.5 * np.arccos(eps / j2)
    assert sorted(p.length for p in paths) == pytest.approx(
        [2 * xc, PI, PI, 2 * PI - 2 * xc], rel=1e-9)
    for p in paths:
        assert p.order == 2
        assert p.jump == pytest.approx(2.0, rel=1e-10)


def test_upper_loop_area_closed_form():
    # spin wells: area between the locus line and the upper branch is
    # pi J (1 - sin x_c)
    built = CAT.build("ex3.3", j=20)
    J = built.spin.radius
    tc = built.torus_classes["spinwell0"]
    for xi in (-0.7, -0.4, -0.2):
        eps = xi * J ** 2
        xc = 0.5 * np.arccos(xi)
        area = C.upper_loop_area(built.system, eps, tc, built.spin.p_offset)
        assert area == pytest.approx(PI * J * (1 - np.sin(xc)), rel=1e-9)
