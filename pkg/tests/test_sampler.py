"""
Tests de l'échantillonneur Metropolis-Hastings
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import InvalidParameterError
from app.schemas import ObservableRequest, SamplerParams
from app.services.chain_model import build_geometry, build_grid
from app.services.enumerator import ExactEnumerator
from app.services.loop_engine import LoopSet
from app.services.sampler import ChainState, make_rng, mcmc_step, run, run_parallel, spawn_seeds


def _params(**overrides) -> SamplerParams:
    values = dict(twice_S=1, ell=2, beta=1, n=4, n_sweeps=400, n_burnin=40, seed=12345)
    values.update(overrides)
    return SamplerParams(**values)


# ---------- graines ----------

def test_spawn_seeds_are_reproducible_and_distinct():
    seeds = spawn_seeds(42, 4)
    assert seeds == spawn_seeds(42, 4)
    assert len(set(seeds)) == 4
    assert seeds != spawn_seeds(43, 4)


def test_make_rng_is_deterministic():
    assert make_rng(7).random(5).tolist() == make_rng(7).random(5).tolist()


# ---------- paramètres ----------

def test_sweeps_must_exceed_burnin():
    with pytest.raises(ValidationError):
        _params(n_sweeps=10, n_burnin=10)


@pytest.mark.parametrize("p_insert", [0.0, 1.0])
def test_insert_probability_is_open_interval(p_insert):
    with pytest.raises(ValidationError):
        _params(p_insert=p_insert)


def test_observables_outside_chain_are_rejected():
    with pytest.raises(InvalidParameterError):
        run(_params(), ObservableRequest(pairs=[(0, 5)]))


# ---------- rapports d'acceptation ----------

@pytest.mark.parametrize("p_insert", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("delta", [-1, 1])
@pytest.mark.parametrize("m", [0, 1, 5])
def test_insert_and_delete_ratios_are_reciprocal(p_insert, delta, m):
    state = ChainState(_params(p_insert=p_insert, twice_S=3))
    assert state.log_insert_ratio(delta, m) + state.log_delete_ratio(-delta, m + 1) == pytest.approx(0.0, abs=1e-12)


def test_insert_ratio_matches_weight_ratio():
    state = ChainState(_params())
    m, n_loops, delta = 3, 4, -1
    weight_ratio = state.log_weight(m + 1, n_loops + delta) - state.log_weight(m, n_loops)
    proposal = math.log(state.n_cells * state.params.p_delete / ((m + 1) * state.params.p_insert))
    assert state.log_insert_ratio(delta, m) == pytest.approx(weight_ratio + proposal)


def test_detailed_balance_audit():
    result = run(_params(twice_S=2, n_sweeps=200, n_burnin=20), audit=True)
    audit = result.derived["audit"]
    assert audit["transitions"] > 0
    assert audit["max_residual"] <= 1e-9


# ---------- dynamique ----------

def test_incremental_loop_count_matches_retrace():
    state = ChainState(_params(twice_S=2))
    rng = make_rng(99)
    for _ in range(2000):
        mcmc_step(state, rng)
        full = LoopSet(state.geometry, state.grid, state.by_slot)
        assert state.n_loops == full.total_loops
        assert len(state.bar_slots) == len(state.by_slot)


def test_run_is_reproducible():
    request = ObservableRequest(pairs=[(0, 1)], surround_sites=[0])
    first = run(_params(), request)
    second = run(_params(), request)
    assert first.model_dump() == second.model_dump()
    assert run(_params(seed=1), request).model_dump() != first.model_dump()


def test_run_result_contents():
    result = run(_params(), ObservableRequest(pairs=[(0, 1)], keep_traces=True))
    assert result.n_measurements == 360
    assert result.provenance["params"]["seed"] == 12345
    assert {"loop_count", "n_bars", "conn_0_1", "bond_-1", "bond_0", "bond_1"} <= set(result.estimates)
    assert len(result.traces["loop_count"]) == 360
    assert "traces" not in result.model_dump()
    assert 0 < result.acceptance["overall"] <= 1


def test_mean_loop_count_matches_enumeration():
    geometry, grid, q = build_geometry(1), build_grid(1, 2), 2
    distribution = ExactEnumerator(geometry, grid, q).distribution()
    exact = sum(
        float(p) * LoopSet(geometry, grid, dict(key)).total_loops for key, p in distribution.items()
    )
    result = run(_params(ell=1, n=2, n_sweeps=20000, n_burnin=1000), ObservableRequest(dimer_profile=False))
    estimate = result.estimates["loop_count"]
    assert abs(estimate.mean - exact) <= 5 * estimate.error + 0.01


def test_run_parallel_merges_in_seed_order():
    params = _params(n_sweeps=200, n_burnin=20)
    seeds = spawn_seeds(params.seed, 2)
    merged = run_parallel(params, seeds, workers=1)
    assert merged.provenance["chain_seeds"] == seeds
    assert merged.provenance["params"]["seed"] == params.seed
    assert merged.n_measurements == 2 * 180

    singles = [run(params.model_copy(update={"seed": s})) for s in seeds]
    mean = np.mean([r.estimates["loop_count"].mean for r in singles])
    assert merged.estimates["loop_count"].mean == pytest.approx(mean)
