"""
Échantillonneur Metropolis-Hastings de la mesure de boucles (insertion / suppression de barres)
"""
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.exceptions import NonFiniteAccumulatorError
from app.schemas import ObservableEstimate, ObservableRequest, RunResult, SamplerParams
from app.services.chain_model import build_geometry, build_grid
from app.services.loop_engine import LoopSet, LoopTracker
from app.services.observables import decay_fit, derive_estimates, measure, observable_names, validate_request
from app.services.statistics import binned_error
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Générateur à compteur Philox (64 bits) initialisé par la graine"""
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, n_chains: int) -> List[int]:
    """Graines indépendantes des chaînes parallèles, dérivées par SeedSequence.spawn"""
    children = np.random.SeedSequence(seed).spawn(n_chains)
    return [int(child.generate_state(1, np.uint64)[0]) for child in children]


class ChainState:
    """
    État d'une chaîne de Markov: configuration, cache des boucles et compteurs

    Les barres sont indexées par créneau; `bar_slots` permet un tirage uniforme
    en O(1) et `_position` une suppression par échange avec le dernier élément.
    Les variations de L viennent de `tracker` (parcours d'une seule boucle); la
    décomposition complète n'est reconstruite que pour les mesures.
    """

    def __init__(self, params: SamplerParams, audit: bool = False):
        self.params = params
        self.geometry = build_geometry(params.ell)
        self.grid = build_grid(params.beta, params.n)
        self.slots = self.grid.slots
        self.n_cells = self.geometry.n_edges * self.grid.n_slots
        self.log_q = math.log(params.q)
        self.log_n = math.log(params.n)
        # log(N_cells p_del / p_ins): correction de Hastings entre insertion et suppression
        self.log_hastings = math.log(self.n_cells * params.p_delete / params.p_insert)

        self.tracker = LoopTracker(self.geometry, self.grid)
        self.by_slot: Dict[int, int] = self.tracker.by_slot
        self.bar_slots: List[int] = []
        self._position: Dict[int, int] = {}
        self.n_loops = self.geometry.n_sites
        self._loop_set: Optional[LoopSet] = None

        self.proposed = {"insert": 0, "delete": 0}
        self.accepted = {"insert": 0, "delete": 0}
        self.audit = audit
        self.audit_max_residual = 0.0
        self.audit_transitions = 0

    # ---------- cache ----------

    @property
    def loop_set(self) -> LoopSet:
        """Décomposition courante, reconstruite paresseusement (mesures seulement)"""
        if self._loop_set is None:
            self._loop_set = LoopSet(self.geometry, self.grid, self.by_slot)
            if self._loop_set.total_loops != self.n_loops:
                raise RuntimeError(
                    f"Compteur incrémental L={self.n_loops} différent du tracé {self._loop_set.total_loops}"
                )
        return self._loop_set

    def _add(self, slot: int, edge: int, delta: int) -> None:
        self.tracker.add(edge, slot)
        self._position[slot] = len(self.bar_slots)
        self.bar_slots.append(slot)
        self.n_loops += delta
        self._loop_set = None

    def _remove(self, slot: int, delta: int) -> None:
        i = self._position.pop(slot)
        last = self.bar_slots.pop()
        if last != slot:
            self.bar_slots[i] = last
            self._position[last] = i
        self.tracker.remove(slot)
        self.n_loops += delta
        self._loop_set = None

    # ---------- poids ----------

    def log_weight(self, n_bars: int, n_loops: int) -> float:
        """log du poids non normalisé (1/n)^|omega| q^(L - |omega|)"""
        return -n_bars * self.log_n + (n_loops - n_bars) * self.log_q

    def log_insert_ratio(self, delta: int, n_bars: int) -> float:
        """log R = log(1/n) + (dL - 1) log q + log(N_cells p_del / ((|omega|+1) p_ins))"""
        return -self.log_n + (delta - 1) * self.log_q + self.log_hastings - math.log(n_bars + 1)

    def log_delete_ratio(self, delta: int, n_bars: int) -> float:
        """Rapport réciproque: log n + (dL + 1) log q + log(|omega| p_ins / (N_cells p_del))"""
        return self.log_n + (delta + 1) * self.log_q - self.log_hastings + math.log(n_bars)

    # ---------- audit ----------

    def _audit_transition(self, forward_log_ratio: float, insert: bool, slot: int, edge: int) -> None:
        """
        Vérifie mu(w) p(w -> w') = mu(w') p(w' -> w) à partir de tracés complets
        """
        before = LoopSet(self.geometry, self.grid, self.by_slot)
        after_map = dict(self.by_slot)
        if insert:
            after_map[slot] = edge
        else:
            del after_map[slot]
        after = LoopSet(self.geometry, self.grid, after_map)

        m, m2 = len(self.by_slot), len(after_map)
        log_mu, log_mu2 = self.log_weight(m, before.total_loops), self.log_weight(m2, after.total_loops)
        p = self.params
        if insert:
            prop_fwd = p.p_insert / self.n_cells
            prop_bwd = p.p_delete / m2
            backward = self.log_delete_ratio(before.total_loops - after.total_loops, m2)
        else:
            prop_fwd = p.p_delete / m
            prop_bwd = p.p_insert / self.n_cells
            backward = self.log_insert_ratio(before.total_loops - after.total_loops, m2)

        lhs = log_mu + math.log(prop_fwd) + min(0.0, forward_log_ratio)
        rhs = log_mu2 + math.log(prop_bwd) + min(0.0, backward)
        residual = abs(math.expm1(lhs - rhs))
        self.audit_max_residual = max(self.audit_max_residual, residual)
        self.audit_transitions += 1

    # ---------- mouvements ----------

    def propose_insert(self, rng: np.random.Generator) -> bool:
        self.proposed["insert"] += 1
        cell = int(rng.integers(self.n_cells))
        edge = self.geometry.edges[cell // self.grid.n_slots]
        slot = self.slots[cell % self.grid.n_slots]
        u = rng.random()
        if slot in self.by_slot:
            # Exclusion globale: cellule dont le créneau est occupé
            return False
        delta = self.tracker.delta_insert(edge, slot)
        log_r = self.log_insert_ratio(delta, len(self.bar_slots))
        if self.audit:
            self._audit_transition(log_r, True, slot, edge)
        if log_r >= 0 or u < math.exp(log_r):
            self._add(slot, edge, delta)
            self.accepted["insert"] += 1
            return True
        return False

    def propose_delete(self, rng: np.random.Generator) -> bool:
        self.proposed["delete"] += 1
        m = len(self.bar_slots)
        if m == 0:
            rng.random()
            return False
        slot = self.bar_slots[int(rng.integers(m))]
        u = rng.random()
        delta = self.tracker.delta_delete(slot)
        log_r = self.log_delete_ratio(delta, m)
        if self.audit:
            self._audit_transition(log_r, False, slot, self.by_slot[slot])
        if log_r >= 0 or u < math.exp(log_r):
            self._remove(slot, delta)
            self.accepted["delete"] += 1
            return True
        return False

    def acceptance_rates(self) -> Dict[str, float]:
        rates = {
            move: self.accepted[move] / self.proposed[move] if self.proposed[move] else 0.0
            for move in ("insert", "delete")
        }
        total = sum(self.proposed.values())
        rates["overall"] = sum(self.accepted.values()) / total if total else 0.0
        return rates

    def configuration_key(self) -> frozenset:
        return frozenset(self.by_slot.items())


def mcmc_step(state: ChainState, rng: np.random.Generator) -> ChainState:
    """
    Une proposition Metropolis-Hastings (insertion avec probabilité p_insert, sinon suppression)

    Args:
        state: État courant (modifié en place)
        rng: Générateur de la chaîne

    Returns:
        L'état
    """
    if rng.random() < state.params.p_insert:
        state.propose_insert(rng)
    else:
        state.propose_delete(rng)
    return state


def iter_samples(state: ChainState, rng: np.random.Generator) -> Iterator[ChainState]:
    """
    Fait tourner la chaîne et rend l'état à chaque mesure (après thermalisation)

    Un balayage = N_slots propositions.
    """
    p = state.params
    n_steps = state.grid.n_slots
    report_every = max(1, p.n_sweeps // 10)
    for sweep in range(p.n_sweeps):
        for _ in range(n_steps):
            mcmc_step(state, rng)
        if sweep % report_every == 0:
            logger.debug(f"Balayage {sweep}/{p.n_sweeps}: |omega|={len(state.bar_slots)}, L={state.n_loops}")
        if sweep >= p.n_burnin and (sweep - p.n_burnin) % p.measure_every == 0:
            yield state


def run(
    params: SamplerParams,
    observables: Optional[ObservableRequest] = None,
    audit: bool = False,
) -> RunResult:
    """
    Simule une chaîne et estime les observables demandées

    Args:
        params: Paramètres de la chaîne
        observables: Observables à mesurer
        audit: Vérifier le bilan détaillé sur chaque transition proposée

    Returns:
        RunResult avec provenance complète
    """
    request = observables or ObservableRequest()
    state = ChainState(params, audit=audit)
    validate_request(state.geometry, request)
    rng = make_rng(params.seed)
    names = observable_names(state.geometry, state.grid, request)

    logger.info(
        f"🚀 Simulation: 2S={params.twice_S}, ell={params.ell}, beta={params.beta}, n={params.n}, "
        f"{params.n_sweeps} balayages, graine {params.seed}"
    )
    series: Dict[str, List[float]] = {name: [] for name in names}
    for current in iter_samples(state, rng):
        values = measure(current.loop_set, request)
        for name in names:
            series[name].append(values[name])

    traces = {name: np.asarray(values, dtype=float) for name, values in series.items()}
    for name, trace in traces.items():
        if not np.all(np.isfinite(trace)):
            raise NonFiniteAccumulatorError(f"Valeur non finie dans la série {name}")

    estimates = {}
    for name, trace in traces.items():
        report = binned_error(trace)
        estimates[name] = ObservableEstimate(
            name=name,
            mean=report.mean,
            error=report.error,
            tau_int=report.tau_int,
            n_samples=report.n_samples,
        )

    derived = derive_estimates(traces, state.geometry, params.twice_S, request)
    if audit:
        derived["audit"] = {
            "max_residual": state.audit_max_residual,
            "transitions": state.audit_transitions,
        }

    n_measurements = len(next(iter(traces.values()))) if traces else 0
    logger.info(f"✅ Simulation terminée: {n_measurements} mesures, acceptation {state.acceptance_rates()}")
    return RunResult(
        estimates=estimates,
        derived=derived,
        acceptance=state.acceptance_rates(),
        n_measurements=n_measurements,
        provenance={
            "params": params.model_dump(),
            "observables": request.model_dump(mode="json"),
            "version": settings.APP_VERSION,
            "rng": "numpy Philox",
        },
        traces={name: trace.tolist() for name, trace in traces.items()} if request.keep_traces else None,
    )


def _run_chain(args) -> RunResult:
    params, request, audit = args
    return run(params, request, audit)


def _merge_value(values: Sequence[Dict[str, float]]) -> Dict[str, float]:
    k = len(values)
    return {
        "mean": sum(v["mean"] for v in values) / k,
        "error": math.sqrt(sum(v["error"] ** 2 for v in values)) / k,
    }


def merge_results(results: Sequence[RunResult], seeds: Sequence[int]) -> RunResult:
    """
    Fusion de chaînes indépendantes de même longueur, dans l'ordre des graines

    Moyenne des moyennes, erreurs combinées en quadrature.
    """
    first = results[0]
    estimates = {}
    for name in first.estimates:
        chain = [r.estimates[name] for r in results]
        merged = _merge_value([{"mean": e.mean, "error": e.error} for e in chain])
        estimates[name] = ObservableEstimate(
            name=name,
            mean=merged["mean"],
            error=merged["error"],
            tau_int=sum(e.tau_int for e in chain) / len(chain),
            n_samples=sum(e.n_samples for e in chain),
        )

    derived: Dict[str, object] = {}
    for key, value in first.derived.items():
        if key == "audit":
            derived[key] = {
                "max_residual": max(r.derived[key]["max_residual"] for r in results),
                "transitions": sum(r.derived[key]["transitions"] for r in results),
            }
        elif isinstance(value, dict) and all(isinstance(v, dict) and "mean" in v for v in value.values()):
            derived[key] = {
                sub: _merge_value([r.derived[key][sub] for r in results if sub in r.derived.get(key, {})])
                for sub in value
            }
        elif isinstance(value, float):
            derived[key] = sum(r.derived[key] for r in results) / len(results)
        else:
            derived[key] = value

    if "decay_fit" in derived:
        far = [
            (abs(x - y), estimates[f"conn_{x}_{y}"].mean)
            for x, y in first.provenance["observables"]["pairs"]
            if x != y
        ]
        derived["decay_fit"] = decay_fit([d for d, _ in far], [p for _, p in far])

    acceptance = {
        k: sum(r.acceptance[k] for r in results) / len(results) for k in first.acceptance
    }
    provenance = dict(first.provenance)
    provenance["params"] = dict(first.provenance["params"])
    provenance["chain_seeds"] = list(seeds)
    return RunResult(
        estimates=estimates,
        derived=derived,
        acceptance=acceptance,
        n_measurements=sum(r.n_measurements for r in results),
        provenance=provenance,
    )


def run_parallel(
    params: SamplerParams,
    seeds: Sequence[int],
    observables: Optional[ObservableRequest] = None,
    workers: Optional[int] = None,
    audit: bool = False,
) -> RunResult:
    """
    Chaînes indépendantes sur un pool de processus, fusionnées dans l'ordre des graines

    Args:
        params: Paramètres communs (la graine est remplacée par chaque élément de `seeds`)
        seeds: Graines des chaînes
        observables: Observables à mesurer
        workers: Nombre de processus (défaut: settings.THREADS)
        audit: Audit du bilan détaillé
    """
    workers = workers or settings.THREADS
    jobs = [(params.model_copy(update={"seed": s}), observables, audit) for s in seeds]
    logger.info(f"{len(jobs)} chaîne(s) indépendante(s) sur {workers} processus")
    if workers <= 1 or len(jobs) == 1:
        results = [_run_chain(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_chain, jobs))
    merged = merge_results(results, seeds)
    merged.provenance["params"]["seed"] = params.seed
    return merged
