import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from vm1d2v.errors import GridError, NeutralityError, SupportError
from vm1d2v.phase_space import (
    Background,
    DistributionFunction,
    PhaseGrid,
    ProfileSpec,
    bump,
    bump_integral,
    compute_moments,
    make_background,
    make_grid,
    neutralize,
    read_snapshot,
    sample_initial_distribution,
    velocity_map,
    write_snapshot,
)
from vm1d2v.fields import FieldState

from conftest import baseline_grid


# -- grid ---------------------------------------------------------------------


def test_make_grid_spacing():
    g = make_grid(((-5, 5), (-2, 2), (-2, 2)), (64, 64, 64))
    assert g.dx == 10 / 64
    assert g.dv1 == g.dv2 == 4 / 64
    assert g.shape == (65, 65, 65)
    assert g.x[0] == -5 and g.x[-1] == 5


def test_make_grid_rejects_asymmetric_v2():
    with pytest.raises(GridError, match="v2 extent not symmetric"):
        make_grid(((-5, 5), (-2, 2), (-1, 2)), (8, 8, 8))


def test_make_grid_rejects_small_counts():
    with pytest.raises(GridError, match="count below minimum"):
        make_grid(((-5, 5), (-2, 2), (-2, 2)), (3, 8, 8))


def test_make_grid_rejects_empty_span():
    with pytest.raises(GridError):
        make_grid(((1, 1), (-2, 2), (-2, 2)), (8, 8, 8))
    with pytest.raises(GridError):
        make_grid(((-1, 1), (2, -2), (-2, 2)), (8, 8, 8))


@given(
    st.floats(0.1, 50.0),
    st.floats(0.1, 10.0),
    st.integers(4, 200),
    st.integers(4, 200),
)
def test_v2_nodes_mirror_exactly(L, V, n1, n2):
    g = PhaseGrid(-L, L, -V, 2 * V, -V, V, 8, n1, n2)
    np.testing.assert_array_equal(g.v2, -g.v2[::-1])
    assert g.dv2 > 0 and g.dv1 > 0 and g.dx > 0
    assert len(g.v2) == n2 + 1


def test_refined_doubles_counts():
    g = baseline_grid(32).refined(2)
    assert g.counts == (64, 32, 32)
    np.testing.assert_array_equal(baseline_grid(32).x, g.x[::2])


# -- sampling -----------------------------------------------------------------


def test_zero_profile_is_zero(small_grid):
    f = sample_initial_distribution("zero", small_grid)
    assert not np.any(f.values)
    assert f.time == 0.0


def test_even_bump_is_mirror_symmetric(grid64):
    f = sample_initial_distribution("even-bump", grid64)
    np.testing.assert_array_equal(f.values, f.values[..., ::-1])
    assert f.values.min() >= 0.0


@pytest.mark.parametrize("name", ["even-bump", "two-stream", "asymmetric-bump"])
def test_outer_layer_vanishes(grid64, name):
    v = sample_initial_distribution(name, grid64).values
    for face in (v[0], v[-1], v[:, 0], v[:, -1], v[:, :, 0], v[:, :, -1]):
        assert not np.any(face)


def _analytic_charge(spec):
    """Product of 1D adaptive quadratures of the closed-form factors."""
    p = spec.resolved()
    pw = int(p["power"])
    xs = lambda x: bump((x - p["x_center"]) / p["x_width"], pw) * (1 + p["perturbation"] * np.cos(p["wavenumber"] * (x - p["x_center"])))
    ix = quad(xs, p["x_center"] - p["x_width"], p["x_center"] + p["x_width"], limit=200)[0]
    if spec.name == "two-stream":
        iv1 = p["v1_width"] * bump_integral(pw)
    else:
        iv1 = quad(lambda v: bump((v - p["v1_center"]) / p["v1_width"], pw), -2, 2)[0]
    iv2 = quad(lambda v: bump((v - p.get("v2_center", 0.0)) / p["v2_width"], pw), -2, 2)[0]
    return p["density"] * ix * iv1 * iv2


@pytest.mark.parametrize("name", ["even-bump", "two-stream", "asymmetric-bump"])
def test_total_charge_matches_quadrature(name):
    spec = ProfileSpec(name)
    f = sample_initial_distribution(spec, baseline_grid(128))
    exact = _analytic_charge(spec)
    assert abs(f.total_charge() - exact) <= 1e-6 * exact


def test_bump_integral_matches_quad():
    for p in (2, 3, 4, 6):
        assert bump_integral(p) == pytest.approx(quad(lambda s: bump(s, p), -1, 1)[0], rel=1e-12)


def test_support_touching_boundary_rejected():
    g = make_grid(((-2, 2), (-1.5, 1.5), (-1.5, 1.5)), (32, 16, 16))
    with pytest.raises(SupportError, match="boundary"):
        sample_initial_distribution("even-bump", g)


def test_profile_rejects_unknown_parameter():
    with pytest.raises(ValueError, match="unknown parameters"):
        ProfileSpec("even-bump", {"temperature": 1.0})
    with pytest.raises(ValueError, match="unknown profile"):
        ProfileSpec("maxwellian")


def test_negative_profile_rejected(grid64):
    with pytest.raises(ValueError, match="negative"):
        sample_initial_distribution(ProfileSpec("even-bump", {"perturbation": 1.5}), grid64)


def test_distribution_is_read_only(small_grid):
    f = sample_initial_distribution("even-bump", small_grid)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


# -- moments ------------------------------------------------------------------


def test_zero_moments(small_grid):
    f = DistributionFunction(small_grid, np.zeros(small_grid.shape))
    m = compute_moments(f, Background(small_grid, np.zeros(small_grid.n_x + 1)))
    for arr in (m.rho, m.j1, m.j2):
        assert not np.any(arr)


def test_even_data_has_exactly_zero_j2(grid64):
    f = sample_initial_distribution("even-bump", grid64)
    m = compute_moments(f, make_background(grid64))
    assert not np.any(m.j2)
    assert np.max(np.abs(m.j1)) > 0


def test_moments_match_refined_velocity_quadrature():
    """rho and j1 on a coarse velocity grid against 4x velocity refinement."""
    box = ((-4.0, 4.0), (-1.5, 1.5), (-1.5, 1.5))
    coarse = make_grid(box, (32, 64, 64))
    fine = make_grid(box, (32, 256, 256))
    spec = ProfileSpec("asymmetric-bump")
    zero_b = Background(coarse, np.zeros(33))
    mc = compute_moments(sample_initial_distribution(spec, coarse), zero_b)
    mf = compute_moments(sample_initial_distribution(spec, fine), Background(fine, np.zeros(33)))
    scale = np.max(np.abs(mf.rho))
    assert np.max(np.abs(mc.rho - mf.rho)) <= 1e-4 * scale
    assert np.max(np.abs(mc.j1 - mf.j1)) <= 1e-4 * np.max(np.abs(mf.j1))
    assert np.max(np.abs(mc.j2 - mf.j2)) <= 1e-4 * np.max(np.abs(mf.j2))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_moments_are_linear(a, b, seed):
    g = make_grid(((-2, 2), (-1, 1), (-1, 1)), (8, 8, 8))
    rng = np.random.default_rng(seed)
    f1, f2 = rng.random(g.shape), rng.random(g.shape)
    zero = Background(g, np.zeros(9))
    m1, m2 = compute_moments(f1, zero, grid=g), compute_moments(f2, zero, grid=g)
    m = compute_moments(a * f1 + b * f2, zero, grid=g)
    for name in ("rho", "j1", "j2"):
        expect = a * getattr(m1, name) + b * getattr(m2, name)
        np.testing.assert_allclose(getattr(m, name), expect, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(expect))))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mirror_flips_j2_and_keeps_rho_bitwise(seed):
    g = make_grid(((-2, 2), (-1, 1), (-1, 1)), (8, 6, 10))
    f = np.random.default_rng(seed).random(g.shape)
    zero = Background(g, np.zeros(9))
    m, mm = compute_moments(f, zero, grid=g), compute_moments(f[..., ::-1], zero, grid=g)
    np.testing.assert_array_equal(m.rho, mm.rho)
    np.testing.assert_array_equal(m.j1, mm.j1)
    np.testing.assert_array_equal(m.j2, -mm.j2)


def test_moments_reject_grid_mismatch(small_grid, grid64):
    f = sample_initial_distribution("even-bump", grid64)
    with pytest.raises(GridError):
        compute_moments(f, make_background(small_grid))


# -- velocity map -------------------------------------------------------------


def test_velocity_map_examples():
    assert velocity_map(0.0, 0.0, True) == (0.0, 0.0)
    u1, u2 = velocity_map(1.0, 0.0, True)
    assert u1 == pytest.approx(1 / np.sqrt(2), rel=1e-15) and u2 == 0.0
    u1, u2 = velocity_map(0.6e6, 0.8e6, True)
    assert np.hypot(u1, u2) < 1.0
    assert velocity_map(0.3, -2.0, False) == (0.3, -2.0)


# beyond |v| ~ 6.7e7 the exact value rounds to 1.0 in double precision
@given(st.floats(-1e7, 1e7), st.floats(-1e7, 1e7))
def test_velocity_map_is_subluminal(a, b):
    u1, u2 = velocity_map(a, b, True)
    assert np.hypot(u1, u2) < 1.0


# -- background and neutrality -------------------------------------------------


def test_neutralize_rescales(grid64):
    f = sample_initial_distribution("two-stream", grid64)
    b = neutralize(make_background(grid64), f)
    assert b.total == pytest.approx(f.total_charge(), rel=1e-13)
    rho = compute_moments(f, b).rho
    assert abs(np.sum(rho) * grid64.dx) <= 1e-13 * f.total_charge()


def test_neutrality_mismatch_without_rescale(grid64):
    f = sample_initial_distribution("two-stream", grid64)
    with pytest.raises(NeutralityError):
        neutralize(make_background(grid64), f, rescale=False)
    matched = neutralize(make_background(grid64), f)
    assert neutralize(matched, f, rescale=False) is matched


def test_background_must_be_nonnegative(small_grid):
    with pytest.raises(ValueError):
        Background(small_grid, -np.ones(small_grid.n_x + 1))


# -- snapshots ------------------------------------------------------------------


def test_snapshot_roundtrip(tmp_path, small_grid):
    f = DistributionFunction(small_grid, sample_initial_distribution("two-stream", small_grid).values, 1.25)
    fields = FieldState(small_grid, np.linspace(0, 1, 33), np.zeros(33), np.sin(small_grid.x) * 0, 1.25)
    path = tmp_path / "snap.bin"
    write_snapshot(path, f, fields)
    g, data = read_snapshot(path)
    np.testing.assert_array_equal(g.values, f.values)
    assert g.grid == small_grid and g.time == 1.25
    np.testing.assert_array_equal(data["E1"], fields.E1)
    np.testing.assert_array_equal(data["A"], fields.A)


def test_snapshot_layout(tmp_path, small_grid):
    f = sample_initial_distribution("even-bump", small_grid)
    path = tmp_path / "snap.bin"
    write_snapshot(path, f)
    raw = path.read_bytes()
    head = struct.unpack_from("<6d3qd", raw)
    assert head[:6] == small_grid.extents
    assert head[6:9] == small_grid.counts
    assert len(raw) == struct.calcsize("<6d3qd") + 8 * f.values.size
    body = np.frombuffer(raw, "<f8", offset=struct.calcsize("<6d3qd"))
    np.testing.assert_array_equal(body, f.values.ravel())
    g, fields = read_snapshot(path)
    assert fields is None
