import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaklp import covering as C
from weaklp import fields as F
from weaklp import quadrature as Q
from weaklp.errors import InvalidParameterError


def pc(values, lo=-1.0, hi=1.5):
    return C.PiecewiseConstantField(lo, hi, np.asarray(values, dtype=float))


def test_interval_type_rejects_empty():
    with pytest.raises(InvalidParameterError):
        C.Interval(1.0, 1.0)


def test_pc_field_rejects_negative_values():
    with pytest.raises(InvalidParameterError):
        pc([1.0, -0.5])


def test_admissible_empty_for_zero_field():
    fam = C.admissible_intervals(pc(np.zeros(16)), 1.0)
    assert len(fam) == 0


def test_admissible_single_cell_condition():
    # one cell of width 1 and mass 1: the cell itself satisfies m >= |I|^2
    f = C.PiecewiseConstantField(0.0, 1.0, np.array([1.0]))
    fam = C.admissible_intervals(f, 1.0)
    assert len(fam) == 1
    iv = fam.intervals()[0]
    assert (iv.left, iv.right) == (0.0, 1.0)


def test_admissible_lengths_bounded_by_mass_power():
    rng = np.random.default_rng(7)
    f = pc(rng.uniform(0, 2, 64))
    for gamma in (0.5, 1.0, 2.0):
        fam = C.admissible_intervals(f, gamma)
        bound = f.total_mass ** (1.0 / (gamma + 1.0))
        assert np.all(fam.lengths() <= bound + 1e-12)


def test_vitali_greedy_hand_trace():
    # family {[0,1], [0.5,1.5], [3,4]} on the h = 0.5 grid over [0, 4]
    f = C.PiecewiseConstantField(0.0, 4.0, np.ones(8))
    fam = C.IntervalFamily(f, 1.0, np.array([0, 1, 6]), np.array([2, 3, 8]))
    cov = C.vitali_select(fam)
    picks = [(iv.left, iv.right) for iv in cov.intervals()]
    assert picks == [(0.0, 1.0), (3.0, 4.0)]


def test_vitali_empty_and_singleton():
    f = C.PiecewiseConstantField(0.0, 1.0, np.ones(4))
    empty = C.IntervalFamily(f, 1.0, np.array([], dtype=int), np.array([], dtype=int))
    assert len(C.vitali_select(empty)) == 0
    single = C.IntervalFamily(f, 1.0, np.array([1]), np.array([3]))
    cov = C.vitali_select(single)
    assert len(cov) == 1


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0.0, 3.0), min_size=8, max_size=48),
    st.sampled_from([0.5, 1.0, 2.0]),
)
def test_vitali_disjoint_and_5j_cover_property(values, gamma):
    f = pc(values, 0.0, 1.0 + 0.1 * len(values))
    fam = C.admissible_intervals(f, gamma)
    cov = C.vitali_select(fam)
    order = np.argsort(cov.starts)
    s, e = cov.starts[order], cov.ends[order]
    assert np.all(s[1:] > e[:-1])          # exact disjointness, closed intervals
    assert C.verify_5j_cover(f, gamma, cov)["violations"] == 0


def test_weighted_energy_unit_square_identities():
    # gamma = 1: kernel 1 over the unit square; gamma = 2: iint |x-y| = 1/3
    full = C.PiecewiseConstantField(0.0, 1.0, np.full(64, 10.0))
    assert C.weighted_energy(full, 1.0)["energy"] == pytest.approx(1.0, rel=1e-12)
    assert C.weighted_energy(full, 2.0)["energy"] == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_weighted_energy_zero_field_chain():
    rec = C.weighted_energy(pc(np.zeros(32)), 1.0)
    assert rec["energy"] == 0.0
    assert rec["holds_selected"] and rec["holds_mass"]


def test_weighted_energy_chain_random_suite(rng):
    for _ in range(25):
        m = int(rng.integers(16, 129))
        f = pc(rng.uniform(0, 3, m) * (rng.random(m) < 0.7))
        for gamma in (0.5, 1.0, 2.0):
            cov = C.vitali_select(C.admissible_intervals(f, gamma))
            assert C.verify_5j_cover(f, gamma, cov)["violations"] == 0
            rec = C.weighted_energy(f, gamma, cov)
            assert rec["holds_selected"] and rec["holds_mass"]


def test_one_sided_matches_half_two_sided(bump1):
    f = C.PiecewiseConstantField.project(
        lambda t: bump1.evaluate(t[:, None]), -2.0, 2.0, 2048
    )
    two = C.weighted_energy(f, 1.0)["energy"]
    one = C.one_sided_radial_energy(f, 1.0, scan=8192)
    assert one == pytest.approx(two / 2.0, rel=0.01)


# ---------------------------------------------------------------------------
# line integrals, rotation bound, containment
# ---------------------------------------------------------------------------

def test_line_integral_zero_and_constant(bump2):
    z = F.make_bump([0.0, 0.0], 1.0, 0.0)
    assert C.line_integral(z, [0.0, 0.0], [0.5, 0.5]).value == 0.0
    res = C.line_integral(lambda p: np.ones(p.shape[:-1]), [0.0, 0.0], [0.3, 0.4])
    assert res.value == pytest.approx(0.5, rel=1e-14)


def test_line_integral_reversal_symmetry(bump2):
    a = C.line_integral(bump2, [-0.4, 0.1], [0.5, -0.3]).value
    b = C.line_integral(bump2, [0.5, -0.3], [-0.4, 0.1]).value
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_line_integral_rejects_coincident_points(bump2):
    with pytest.raises(InvalidParameterError):
        C.line_integral(bump2, [0.1, 0.1], [0.1, 0.1])


def test_rotation_measure_zero_field():
    z = F.make_bump([0.0, 0.0], 1.0, 0.0)
    rec = C.rotation_measure(z, line_cells=64, offset_cells=32, sphere_order=8)
    assert rec["measure"].value == 0.0
    assert rec["holds"]


def test_rotation_measure_monotone_in_amplitude(bump2):
    lo = C.rotation_measure(bump2, line_cells=96, offset_cells=48, sphere_order=12)
    hi = C.rotation_measure(F.scale_field(bump2, 2.0), line_cells=96, offset_cells=48,
                            sphere_order=12)
    assert hi["measure"].value >= lo["measure"].value * (1 - 1e-9)


def test_rotation_measure_agrees_with_pair_mc(bump2):
    rec = C.rotation_measure(bump2, line_cells=160, offset_cells=64, sphere_order=24)
    mc = C.rotation_measure_mc(bump2, 150_000, Q.RandomStream(11, 3))
    sig = math.hypot(rec["measure"].error_estimate, mc.error_estimate)
    assert abs(rec["measure"].value - mc.value) <= 3 * sig
    assert rec["holds"]


def test_holder_containment_zero_field_vacuous():
    z = F.make_bump([0.0], 1.0, 0.0)
    rec = C.holder_containment_check(z, 1.0, 1.0, 500, Q.RandomStream(2, 2))
    assert rec["members"] == 0 and rec["violations"] == 0


@pytest.mark.parametrize("p", [1.0, 2.0])
@pytest.mark.parametrize("name", ["bump1", "plateau1", "bump2"])
def test_holder_containment_no_violations(cat, name, p):
    f = cat[name]
    rec = C.holder_containment_check(f, p, f.lip_bound, 10_000, Q.RandomStream(21, int(p)))
    assert rec["members"] > 0
    assert rec["violations"] == 0
