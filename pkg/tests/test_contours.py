"""
Tests de l'analyse des contours: E_x, intérieurs, Omega^alpha, recensement
"""
import numpy as np
import pytest

from app.exceptions import InvalidParameterError, NoInteriorError, NotApplicableError
from app.schemas import BarConfiguration
from app.services.chain_model import build_geometry, build_grid, random_configuration
from app.services.contours import (
    census_to_csv,
    classify_loops,
    contour_census,
    contour_geometry,
    event_Ex,
    external_contours,
    has_e2_jump,
    interior_contains,
    is_enclosed,
    omega_alpha_member,
    omega_alpha_members,
    surrounds,
    window_slots,
    winding_filter,
)
from app.services.loop_engine import LoopSet, trace_loops


@pytest.fixture
def big_loop(five_bar_loops):
    return five_bar_loops.loops[five_bar_loops.loop_at(0, 0)]


# ---------- classification ----------

def test_classify_five_bar_loops(five_bar_loops):
    assert classify_loops(five_bar_loops) == {0: "long", 1: "short", 2: "short"}
    assert winding_filter(five_bar_loops) == []


def test_empty_configuration_only_has_winding_loops(geometry2, grid14):
    loop_set = LoopSet(geometry2, grid14, {})
    assert len(winding_filter(loop_set)) == 4


# ---------- intérieurs et E_x ----------

def test_interior_points_of_contour(five_bar_loops, big_loop):
    assert interior_contains(five_bar_loops, big_loop, -0.5, 0)
    assert interior_contains(five_bar_loops, big_loop, 1.5, 0)
    # Le créneau E2 sous la barre du temps 1/n est hors de l'intérieur
    assert not interior_contains(five_bar_loops, big_loop, 0.5, 0)
    assert not interior_contains(five_bar_loops, big_loop, 3, 0)


def test_points_on_loop_are_not_interior(five_bar_loops, big_loop):
    assert not interior_contains(five_bar_loops, big_loop, 0, 0)


@pytest.mark.parametrize("x", [-1, 0, 1, 2])
def test_five_bar_contour_surrounds_every_site(five_bar_loops, x):
    assert surrounds(five_bar_loops, x)


@pytest.mark.parametrize("x", [-1, 0, 1, 2])
def test_short_loops_surround_nothing(geometry2, grid14, dimer_config, x):
    assert not event_Ex(geometry2, grid14, dimer_config, x)


def test_event_Ex_on_configuration(geometry2, grid14, five_bar_config):
    assert event_Ex(geometry2, grid14, five_bar_config, 0)
    with pytest.raises(InvalidParameterError):
        event_Ex(geometry2, grid14, five_bar_config, 5)


def test_winding_loops_make_Ex_undefined(geometry2, grid14):
    loop_set = LoopSet(geometry2, grid14, {})
    with pytest.raises(NotApplicableError):
        surrounds(loop_set, 0)
    with pytest.raises(NoInteriorError):
        interior_contains(loop_set, loop_set.loops[0], 0.5, 0)


# ---------- Omega^alpha ----------

def test_window_slots(grid14):
    assert window_slots(grid14, 0) == [1, 2, 3, 4]
    assert window_slots(grid14, -1) == [-3, -2, -1, 4]
    with pytest.raises(InvalidParameterError):
        window_slots(grid14, 1)


def test_omega_alpha_of_dimer_pattern(geometry2, grid14, dimer_config):
    assert omega_alpha_members(geometry2, grid14, dimer_config.by_slot()) == [0]
    assert omega_alpha_member(geometry2, grid14, dimer_config, 0)
    assert not omega_alpha_member(geometry2, grid14, dimer_config, -1)


def test_omega_alpha_is_shift_covariant(geometry2, grid14, dimer_config):
    shifted = dimer_config.shifted(grid14, grid14.n)
    assert omega_alpha_members(geometry2, grid14, shifted.by_slot()) == [-1]


def test_e2_bar_excludes_window(geometry2, grid14, five_bar_config):
    assert omega_alpha_members(geometry2, grid14, five_bar_config.by_slot()) == [-1]


# ---------- géométrie et recensement ----------

def test_five_bar_contour_geometry(geometry2, grid14, five_bar_loops, big_loop):
    info = contour_geometry(geometry2, grid14, big_loop, five_bar_loops)
    assert info.n_bars == 5
    assert info.int1_size == 8
    assert info.int2_size == 0
    assert info.length_L == pytest.approx(4.0)
    assert info.leg_length == pytest.approx(4.0)
    assert info.legs_consistent
    assert info.support == [-1, 0, 1]
    assert info.has_e2_jump
    assert info.is_external
    assert info.encloses_origin


def test_short_and_winding_loops_have_no_contour(geometry2, grid14, dimer_config):
    loop_set = trace_loops(geometry2, grid14, dimer_config)
    with pytest.raises(NoInteriorError):
        contour_geometry(geometry2, grid14, loop_set.loops[0], loop_set)

    empty = LoopSet(geometry2, grid14, {})
    with pytest.raises(NoInteriorError):
        contour_geometry(geometry2, grid14, empty.loops[0], empty)


def test_census(five_bar_loops, big_loop):
    census = contour_census(five_bar_loops)
    assert [info.loop_id for info in census] == [big_loop.id]
    assert has_e2_jump(five_bar_loops, big_loop)
    assert len(external_contours(five_bar_loops)) == 1


def test_census_skips_winding_loops(geometry2, grid14):
    assert contour_census(LoopSet(geometry2, grid14, {})) == []


def test_census_to_csv(five_bar_loops):
    lines = census_to_csv(contour_census(five_bar_loops), sample=3).splitlines()
    assert lines[0] == "sample,loop_id,n_bars,length_L,int1,int2,external,encloses_origin"
    assert lines[1] == "3,0,5,4.0,8,0,1,1"
    assert census_to_csv([]) == "loop_id,n_bars,length_L,int1,int2,external,encloses_origin\n"


def test_contour_without_e2_jump_is_not_counted(geometry2, grid14):
    # Deux barres sur -1 et deux sur 1 sans barre E2: boucles courtes uniquement
    config = BarConfiguration.from_pairs([(-1, -2), (-1, 3), (1, -1), (1, 2)])
    loop_set = trace_loops(geometry2, grid14, config)
    assert all(loop.is_short for loop in loop_set.loops)
    assert contour_census(loop_set) == []


# ---------- contours imbriqués (ell = 3) ----------

@pytest.fixture
def geometry3():
    """Six sites {-2, ..., 3}: E1 = {-2, 0, 2}, E2 = {-1, 1}"""
    return build_geometry(3)


@pytest.fixture
def grid24():
    """beta = 2, n = 4: créneaux -7..8 sauf 0"""
    return build_grid(2, 4)


@pytest.fixture
def nested_loops(geometry3, grid24):
    """
    Contour à cinq barres sur les sites -1..2 (arêtes -1 et 1 aux créneaux -4/4 et -3/3,
    arête 0 au créneau 1) entouré d'un contour sur les sites -2..3
    """
    config = BarConfiguration.from_pairs([
        (-2, -7), (0, -6), (2, -5), (-1, -4), (1, -3),
        (0, 1),
        (1, 3), (-1, 4), (-2, 5), (0, 6), (2, 7),
    ])
    return trace_loops(geometry3, grid24, config)


def test_nested_contours_loops(nested_loops):
    assert nested_loops.total_loops == 5
    assert sorted(len(loop.site_support) for loop in nested_loops.loops if not loop.is_short) == [4, 6]


def test_inner_contour_is_enclosed(geometry3, grid24, nested_loops):
    outer = nested_loops.loops[nested_loops.loop_at(-2, 0)]
    inner = nested_loops.loops[nested_loops.loop_at(-1, 0)]
    assert outer.site_support == frozenset(range(-2, 4))
    assert inner.site_support == frozenset(range(-1, 3))

    assert is_enclosed(nested_loops, inner)
    assert not is_enclosed(nested_loops, outer)

    outer_info = contour_geometry(geometry3, grid24, outer, nested_loops)
    inner_info = contour_geometry(geometry3, grid24, inner, nested_loops)
    assert outer_info.is_external
    assert not inner_info.is_external
    assert (outer_info.int1_size, outer_info.int2_size) == (36, 14)
    assert (inner_info.int1_size, inner_info.int2_size) == (0, 14)
    assert outer_info.length_L == pytest.approx(11.0)
    assert inner_info.length_L == pytest.approx(-7.0)
    assert outer_info.legs_consistent and inner_info.legs_consistent


def test_only_outer_contour_is_external(nested_loops):
    assert len(contour_census(nested_loops)) == 2
    assert [info.support for info in external_contours(nested_loops)] == [[-2, -1, 0, 1, 2]]


@pytest.mark.parametrize("a,c,e,d,b", [
    (-2, -1, 1, 2, 3),
    (-4, -3, -2, -1, 1),
    (1, 2, 4, 6, 7),
    (-7, -6, -5, 5, 8),
])
def test_rectangle_interior_matches_legs(geometry3, grid24, a, c, e, d, b):
    # Montants sur les arêtes E1 -2 (créneaux a, b) et 0 (c, d), saut E2 sur -1 au créneau e
    config = BarConfiguration.from_pairs([(-2, a), (0, c), (-1, e), (0, d), (-2, b)])
    loop_set = trace_loops(geometry3, grid24, config)
    loop = loop_set.loops[loop_set.loop_at(-2, a + 0.5)]
    info = contour_geometry(geometry3, grid24, loop, loop_set)
    m = (b - a) + (d - c)
    assert (info.int1_size, info.int2_size) == (m, 0)
    assert info.int1_size - info.int2_size == loop.vertical_extent // 2
    assert info.length_L == pytest.approx(2 * m / grid24.n)
    assert info.is_external


# ---------- covariance par translation ----------

def test_omega_alpha_follows_unit_time_shift():
    hits = 0
    for ell, beta, n in [(1, 2, 2), (2, 2, 2), (2, 2, 3)]:
        geometry, grid = build_geometry(ell), build_grid(beta, n)
        boundary = grid.wrap(-grid.n)
        for seed in range(25):
            config = random_configuration(geometry, grid, np.random.default_rng(seed))
            # Une barre en -n tomberait au temps 0 après translation
            config = BarConfiguration(bars=tuple(b for b in config.bars if b.slot != boundary))
            members = omega_alpha_members(geometry, grid, config.by_slot())
            shifted = omega_alpha_members(geometry, grid, config.shifted(grid, grid.n).by_slot())
            assert set(shifted) == {(alpha + 1 + beta) % (2 * beta) - beta for alpha in members}
            hits += len(members)
    assert hits > 0
