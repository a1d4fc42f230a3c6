import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from bykov_atlas.errors import DomainEscape, Extinct, NearSingular
from bykov_atlas.maps import (
    CurveTrace,
    DiskCurve,
    DiskPoint,
    Jacobian2,
    WallPoint,
    dxds_fd,
    eta,
    eta_closed_form,
    eta_log,
    fd_jacobian,
    geometry_functions,
    iterated_segment_trace,
    jacobian,
    phi1,
    phi1_image,
    phi2,
    phi2_inverse,
    principal,
    psi12,
    psi21,
    return_map,
    reversal_functional,
    segment_trace,
    shear_factor,
    shear_lift,
    spiral_diagnostics,
    stable_spiral,
    unstable_spiral,
)
from bykov_atlas.model import REFERENCE_PARAMS

from conftest import make, random_valid_point

P = REFERENCE_PARAMS
E = math.e


# local and global maps ---------------------------------------------------------

def test_phi1_examples():
    assert phi1(WallPoint(0, 1), P) == DiskPoint(1.0, 0.0)
    q = phi1(WallPoint(0, E ** -2), P)
    assert q.r == pytest.approx(math.exp(-1)) and q.phi == pytest.approx(1.0)
    with pytest.raises(DomainEscape) as exc:
        phi1(WallPoint(0.3, 0.0), P)
    assert exc.value.stage == "phi1"
    with pytest.raises(DomainEscape):
        phi1(WallPoint(0.3, 1.5), P)


def test_phi2_examples():
    assert phi2(DiskPoint(1, 0), P) == WallPoint(0.0, 1.0)
    q = phi2(DiskPoint(math.exp(-1), 0), P)
    assert q.x == pytest.approx(-1.0) and q.y == pytest.approx(0.1353352832366127)
    with pytest.raises(DomainEscape) as exc:
        phi2(DiskPoint(0, 1), P)
    assert exc.value.stage == "phi2"


def test_phi2_inverse_roundtrip():
    p = DiskPoint(0.3, 4.2)
    q = phi2_inverse(phi2(p, P), P)
    assert q.r == pytest.approx(p.r) and q.phi == pytest.approx(p.phi)


def test_psi12_examples():
    q = psi12(DiskPoint(1, 0), P)
    assert (q.r, q.phi) == (2.0, 0.0)
    q = psi12(DiskPoint(1, math.pi / 2), P)
    assert q.r == pytest.approx(0.5) and q.phi == pytest.approx(math.pi / 2)
    unit = make(a=1.0)
    for phi in (-7.0, 0.3, 2.0, 11.0):
        q = psi12(DiskPoint(0.4, phi), unit)
        assert q.r == pytest.approx(0.4, abs=1e-15) and q.phi == pytest.approx(phi, abs=1e-14)


def test_psi21_examples():
    assert psi21(WallPoint(0.3, 0.0), P) == WallPoint(0.0, 0.3)
    assert psi21(WallPoint(0.0, 0.0), P) == WallPoint(0.0, 0.0)
    ident = P.with_changes(rotation=0.0)
    assert psi21(WallPoint(0.3, 0.2), ident) == WallPoint(0.3, 0.2)
    # the angle is taken on its principal value before rotating
    q = psi21(WallPoint(0.3 + 4 * math.pi, 0.1), P)
    assert q.x == -0.1 and q.y == pytest.approx(0.3)


def test_eta_reference_point():
    q = eta(WallPoint(0.0, math.exp(-4 * math.pi)), P)
    # phi = 2 pi, C = 4, x2 = 0.5 ln(4 e^{-4 pi}) + 2 pi = ln 2
    assert q.x == pytest.approx(math.log(2.0), abs=1e-12)
    assert q.y == pytest.approx(4 * math.exp(-4 * math.pi), rel=1e-13)
    assert q.y == pytest.approx(1.394936942483599e-05, rel=1e-12)
    r = return_map(WallPoint(0.0, math.exp(-4 * math.pi)), P)
    assert r.x == -q.y and r.y == pytest.approx(principal(q.x))


def test_eta_escape_stage():
    with pytest.raises(DomainEscape) as exc:
        eta(WallPoint(0.0, 0.9), P)
    assert exc.value.stage == "phi2"
    with pytest.raises(DomainEscape) as exc:
        return_map(WallPoint(0.1, 0.0), P)
    assert exc.value.stage == "phi1"


def test_degenerate_case_preserves_vertical_segment():
    flat = make(a=1.0)
    for s in (0.9, 0.3, 1e-3, 1e-9):
        q = eta(WallPoint(0.0, s), flat)
        assert q.x == pytest.approx(0.0, abs=1e-13) and q.y == pytest.approx(s, rel=1e-14)


# geometry functions ----------------------------------------------------------

def test_geometry_functions_on_axes_and_diagonal():
    g = geometry_functions(0.0, P)
    assert (g.C, g.Phi_lift, g.A_printed, g.A_derived) == (4.0, 0.0, 8.0, 4.0)
    g = geometry_functions(math.pi / 2, P)
    assert g.C == pytest.approx(0.25) and g.Phi_lift == pytest.approx(math.pi / 2)
    assert g.A_printed == pytest.approx(0.5) and g.A_derived == pytest.approx(0.25)
    g = geometry_functions(math.pi / 4, P)
    # oracle: C = (4 + 1/4)/2; A_printed = 2*2.125 + 3.75/2; A_derived = 2.125 + 3.75/2
    assert g.C == pytest.approx(2.125)
    assert g.A_printed == pytest.approx(6.125)
    assert g.A_derived == pytest.approx(4.0)


def test_lift_laws_on_grid():
    phi = np.linspace(-20.0, 20.0, 10_000)
    for a in (1.0, 1.5, 2.0, 4.0):
        lift = shear_lift(phi, a)
        np.testing.assert_allclose(shear_lift(phi + math.pi, a), lift + math.pi, atol=1e-12)
        C = shear_factor(phi, a)
        np.testing.assert_allclose(shear_factor(phi + math.pi, a), C, rtol=1e-12)
        assert np.all(C >= 1 / a**2 - 1e-15) and np.all(C <= a**2 + 1e-15)
        # quadrant preservation
        assert np.all(np.floor(lift / (math.pi / 2) + 1e-12) == np.floor(phi / (math.pi / 2) + 1e-12)) or a == 1.0


def test_lift_continuous_at_half_period_boundaries():
    for k in range(-3, 4):
        b = math.pi / 2 + k * math.pi
        lo, hi = shear_lift(b - 1e-12, 2.0), shear_lift(b + 1e-12, 2.0)
        assert abs(hi - lo) < 1e-10
        assert shear_lift(b, 2.0) == pytest.approx(b, abs=1e-12)


@given(st.floats(-50, 50), st.floats(1.0, 4.0))
def test_lift_is_monotone(phi, a):
    assert shear_lift(phi + 1e-6, a) > shear_lift(phi, a)


# Jacobians -------------------------------------------------------------------

def test_psi12_cartesian_jacobian_has_unit_determinant():
    for a in (1.0, 2.0, 3.7):
        J = jacobian("psi12", DiskPoint(0.5, 0.3), P.with_changes(a=a), chart="cartesian")
        assert J.det == pytest.approx(1.0, abs=1e-15)


def test_eta_jacobian_reference_point():
    p = WallPoint(0.0, math.exp(-4 * math.pi))
    J = jacobian("eta", p, P)
    assert abs(J.det - 1) <= 1e-9
    F = fd_jacobian("eta", p, P)
    np.testing.assert_allclose(J.as_array(), F.as_array(), rtol=1e-5, atol=1e-6 * np.max(np.abs(J.as_array())))


def test_return_map_trace_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = random_valid_point(rng, P, y_lo=1e-6)
        t = jacobian("return_map", p, P).trace
        f = fd_jacobian("return_map", p, P).trace
        scale = max(1.0, np.max(np.abs(jacobian("return_map", p, P).as_array())))
        assert abs(t - f) <= 1e-5 * max(abs(t), 1e-3 * scale)


def test_component_jacobians_match_finite_differences():
    p = WallPoint(0.4, 0.2)
    d = DiskPoint(0.6, 1.1)
    for mid, q in (("phi1", p), ("psi12", d), ("phi2", d), ("psi21", WallPoint(0.4, 0.2))):
        np.testing.assert_allclose(jacobian(mid, q, P).as_array(), fd_jacobian(mid, q, P).as_array(),
                                   rtol=1e-6, atol=1e-8)


def test_near_singular_guard():
    with pytest.raises(NearSingular):
        jacobian("eta", WallPoint(0.0, 1e-12), P)
    with pytest.raises(NearSingular):
        jacobian("phi2", DiskPoint(1e-12, 0.0), P)
    jacobian("eta", WallPoint(0.0, 1e-12), P, eps=1e-13)


def test_jacobian2_algebra():
    A = Jacobian2(1, 2, 3, 4)
    assert A.det == -2 and A.trace == 5
    assert (A @ A).as_array().tolist() == (A.as_array() @ A.as_array()).tolist()
    assert Jacobian2.from_array(A.as_array()) == A


@given(st.floats(-math.pi, math.pi), st.floats(-18.0, 0.0), st.floats(1.0, 4.0),
       st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_area_preservation_property(x, logy, a, a1, e2):
    prm = make(alpha1=a1, E2=e2, a=a)
    y = math.exp(logy)
    assume(y * shear_factor(x - prm.g1 * logy, a) <= 1.0)
    assert abs(jacobian("eta", WallPoint(x, y), prm).det - 1) <= 1e-9
    assert abs(jacobian("return_map", WallPoint(x, y), prm).det - 1) <= 1e-9


# segment traces --------------------------------------------------------------

def test_segment_trace_paths_agree_and_flag_escapes():
    s = np.exp(np.linspace(0.0, -30.0, 500))
    tr = segment_trace(0.0, s, P)
    assert len(tr) == 500
    assert not tr.valid[0]  # s = 1 leaves Out(sigma2)
    assert np.all(tr.valid[-300:])
    xs, ys = eta_closed_form(0.0, tr.s[tr.valid], P)
    np.testing.assert_allclose(tr.x[tr.valid], xs, atol=1e-10)


def test_segment_trace_unit_shear_is_affine():
    flat = make(a=1.0, E2=2.0)  # g2 = -0.5 keeps a nonzero slope
    s = np.exp(np.linspace(-0.1, -20.0, 200))
    tr = segment_trace(0.0, s, flat)
    np.testing.assert_allclose(tr.y, s, rtol=1e-14)
    slope = np.polyfit(np.log(s), tr.x, 1)[0]
    assert slope == pytest.approx(-flat.g2 / 2 - flat.g1, abs=1e-12)
    assert np.max(np.abs(tr.x - slope * np.log(s))) < 1e-12


def test_segment_trace_height_vanishes():
    s = np.exp(np.linspace(math.log(0.25e-4) - 0.01, -40.0, 100))
    tr = segment_trace(0.3, s, P)
    assert np.all(tr.y < 1e-3)
    assert tr.y[-1] < 1e-16


def test_segment_trace_x_diverges_upward_when_slope_negative():
    # -g2/2 - g1 = -0.25 multiplies ln s, which is negative: x2 grows as s -> 0
    prm = P.with_changes(E2=2.0)
    x_hi = segment_trace(0.0, [1e-4], prm).x[0]
    x_lo = segment_trace(0.0, [1e-8], prm).x[0]
    assert x_lo > x_hi
    deep = [segment_trace(0.0, [10.0 ** -k], prm).x[0] for k in (20, 40, 80)]
    assert deep[0] < deep[1] < deep[2]


def test_analytic_dxds_matches_finite_differences_away_from_reversals():
    for s in np.exp(np.linspace(-2.0, -20.0, 60)):
        phi = -P.g1 * math.log(s)
        D = reversal_functional(phi, P)
        if abs(D) < 0.05:
            continue
        fd = dxds_fd(0.0, float(s), P)
        assert fd == pytest.approx(-D / s, rel=1e-5)


def test_segment_trace_rejects_bad_grids():
    with pytest.raises(ValueError):
        segment_trace(0.0, [], P)
    with pytest.raises(ValueError):
        segment_trace(0.0, [0.5, 0.6, 0.4], P)
    with pytest.raises(ValueError):
        segment_trace(0.0, [1.5], P)


def test_eta_log_agrees_with_eta():
    for s in (1e-2, 1e-7, 1e-30):
        q = eta(WallPoint(0.2, s), P)
        x, ly = eta_log(0.2, math.log(s), P)
        assert x == pytest.approx(q.x, abs=1e-11) and math.exp(ly) == pytest.approx(q.y, rel=1e-12)


# iterated traces ---------------------------------------------------------------

def test_iterated_trace_k1_is_segment_trace():
    s = np.exp(np.linspace(-0.5, -15.0, 300))
    it = iterated_segment_trace(0.0, s, 1, P)
    tr = segment_trace(0.0, s, P)
    assert len(it) == 1
    np.testing.assert_array_equal(it[0].s, tr.s)
    np.testing.assert_allclose(it[0].x, tr.x, atol=1e-12)
    np.testing.assert_array_equal(it[0].valid, tr.valid)


def test_iterated_trace_k2_has_surviving_piece():
    s = np.exp(np.linspace(0.0, -6 * math.pi, 1500))
    its = iterated_segment_trace(0.0, s, 2, P)
    assert len(its) == 2
    pieces = its[1].pieces()
    assert pieces
    for piece in pieces:
        assert np.all((piece.y > 0) & (piece.y <= 1))
    # the chain-rule derivative agrees with differences along the piece
    big = max(pieces, key=len)
    mid = len(big) // 2
    ds = big.s[mid + 1] - big.s[mid - 1]
    fd = (big.x[mid + 1] - big.x[mid - 1]) / ds
    assert fd == pytest.approx(big.dxds[mid], rel=1e-2)


def test_iterated_trace_extinct_when_everything_escapes():
    with pytest.raises(Extinct) as exc:
        iterated_segment_trace(0.0, [0.9, 0.8, 0.7], 2, P)
    assert exc.value.iterate == 1


# spirals -------------------------------------------------------------------------

def test_phi1_image_winding():
    s = np.exp(np.linspace(0.0, -4 * math.pi, 2000))
    d = spiral_diagnostics(phi1_image(0.0, s, P))
    assert d.winding == pytest.approx(1.0, abs=0.05)
    assert d.monotone_fraction == 1.0
    deep = spiral_diagnostics(phi1_image(0.0, np.exp(np.linspace(0.0, -60, 200)), P))
    assert deep.radius_limit < 1e-12


def test_circle_counts_as_monotone():
    phi = np.linspace(0, 2 * math.pi, 50)
    c = DiskCurve(np.linspace(1, 0.5, 50), np.full(50, 0.3), phi, np.ones(50, bool))
    d = spiral_diagnostics(c)
    assert d.monotone_fraction == 1.0
    assert d.winding == pytest.approx(1.0)


def test_spirals_live_in_the_disk():
    s = np.exp(np.linspace(0.0, -10.0, 300))
    st_ = stable_spiral(0.0, s, P)
    np.testing.assert_allclose(st_.r, np.sqrt(s))
    un = unstable_spiral(0.0, s, P)
    assert np.all(un.valid == (un.r <= 1.0))
    assert un.cartesian().shape == (300, 2)
