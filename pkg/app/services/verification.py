"""
Suite de vérification: identités d'opérateurs, limite de Trotter, pont boucles/quantique,
état fondamental, exactitude de l'échantillonneur, lois des boucles, bornes de Peierls
"""
import math
import time
from collections import Counter
from typing import Callable, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.exceptions import LoopModelError
from app.schemas import ObservableRequest, SamplerParams, VerificationCheck, VerificationReport
from app.services import bounds as bounds_service
from app.services.chain_model import build_geometry, build_grid, random_configuration
from app.services.ed_oracle import (
    PROJECTOR_BUILDERS,
    Spectrum,
    bond_projector,
    build_hamiltonian,
    ground_state_expectation,
    power_iteration_ground_energy,
    spin_algebra_residuals,
    spin_correlation_ed,
    total_spin_commutator_residual,
    verify_polynomial_identities,
)
from app.services.enumerator import (
    ExactEnumerator,
    TransferMatrixOracle,
    connected_event,
    enumeration_size,
    two_site_closed_form,
)
from app.services.loop_engine import LoopSet
from app.services.sampler import ChainState, iter_samples, make_rng, run, run_parallel, spawn_seeds
from app.services.statistics import decorrelation_stride, pooled_chisquare
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

KNOWN_MUTATIONS = ("singlet-projector",)
TROTTER_RESOLUTIONS = (1, 2, 4, 8, 16)
EXACTNESS_P_MIN = 0.001


def _timed(name: str, func: Callable[[], VerificationCheck]) -> VerificationCheck:
    start = time.perf_counter()
    try:
        check = func()
    except LoopModelError as e:
        logger.error(f"❌ {name}: {e.code}: {e.message}")
        check = VerificationCheck(name=name, passed=False, detail={"error": e.code, "message": e.message})
    check.runtime_s = round(time.perf_counter() - start, 3)
    status = "✅" if check.passed else "❌"
    logger.info(f"{status} {check.name} ({check.runtime_s} s)")
    return check


def exactness_verdict(
    per_seed_p_values: Sequence[float],
    pooled_p_value: float,
    threshold: float = EXACTNESS_P_MIN,
) -> bool:
    """Chaque graine et le cumul doivent dépasser le seuil du chi-deux"""
    return bool(per_seed_p_values) and all(p > threshold for p in per_seed_p_values) and pooled_p_value > threshold


def _richardson(coarse: float, fine: float) -> float:
    """Extrapolation d'une erreur en O(1/n) à partir de n et 2n"""
    return 2 * fine - coarse


class VerificationSuite:
    """
    Vérifications nommées; `mutations` remplace certains constructeurs par des versions fautives

    Args:
        full: Inclure les critères lourds (dimérisation, décroissance, Omega^alpha)
        mutations: Fautes injectées (ex. "singlet-projector")
        sweeps: Balayages par chaîne pour les contrôles Monte Carlo
        n_seeds: Nombre de graines du test de stationnarité
        seed: Graine de base
    """

    def __init__(
        self,
        full: bool = False,
        mutations: Sequence[str] = (),
        sweeps: Optional[int] = None,
        n_seeds: Optional[int] = None,
        seed: Optional[int] = None,
    ):
        unknown = set(mutations) - set(KNOWN_MUTATIONS)
        if unknown:
            raise ValueError(f"Mutations inconnues: {sorted(unknown)}")
        self.full = full
        self.mutations = tuple(mutations)
        self.sweeps = sweeps or (10 ** 6 if full else settings.VERIFY_SWEEPS)
        self.n_seeds = n_seeds or settings.VERIFY_SEEDS
        self.seed = settings.DEFAULT_SEED if seed is None else seed
        self.projector_builder = PROJECTOR_BUILDERS[
            "corrupted" if "singlet-projector" in self.mutations else "exact"
        ]

    # ---------- identités d'opérateurs ----------

    def polynomial_identity(self, twice_S: int) -> VerificationCheck:
        return verify_polynomial_identities(twice_S, projector_builder=self.projector_builder)

    def spin_algebra(self) -> VerificationCheck:
        residuals = {
            f"2S={t}": max(spin_algebra_residuals(t).values()) for t in (1, 2, 3)
        }
        symmetry = total_spin_commutator_residual(2, 2)
        value = max(residuals.values())
        return VerificationCheck(
            name="spin-algebra",
            passed=value <= 1e-12 and symmetry <= 1e-10,
            value=value,
            tolerance=1e-12,
            detail={"residuals": residuals, "total_spin_commutator": symmetry},
        )

    # ---------- limite de Trotter ----------

    def trotter_identity(self, q: int, beta: int = 1) -> VerificationCheck:
        geometry = build_geometry(1)
        trace = math.exp(2 * beta) + q * q - 1
        raw, closed_gap = {}, 0.0
        values = {}
        for n in TROTTER_RESOLUTIONS:
            grid = build_grid(beta, n)
            z_closed = two_site_closed_form(q, beta, n)
            if enumeration_fits(geometry, grid):
                z_enum = float(ExactEnumerator(geometry, grid, q).partition_function())
                closed_gap = max(closed_gap, abs(z_enum - z_closed) / z_closed)
            values[n] = z_closed
            raw[n] = abs(z_closed - trace) / trace
        errors = [raw[n] for n in TROTTER_RESOLUTIONS]
        decreasing = all(a > b for a, b in zip(errors, errors[1:]))
        extrapolated = abs(_richardson(values[8], values[16]) - trace) / trace
        return VerificationCheck(
            name=f"trotter-identity-q={q}",
            passed=decreasing and extrapolated <= 0.02 and closed_gap <= 1e-12,
            value=extrapolated,
            tolerance=0.02,
            detail={"relative_errors": raw, "closed_form_vs_enumeration": closed_gap, "trace": trace},
        )

    # ---------- pont boucles / quantique ----------

    def bond_bridge(self, ell: int = 2, q: int = 2, beta: int = 1) -> VerificationCheck:
        """<P0_{x,x+1}> quantique à beta_q = 2 beta contre 1/q^2 + (1-1/q^2) P_n(x<->x+1)"""
        geometry = build_geometry(ell)
        h = build_hamiltonian(ell, q, projector=self.projector_builder(q))
        spectrum = Spectrum(h)
        quantum = [spectrum.expectation(bond_projector(x, ell, q), 2 * beta) for x in geometry.edges]

        inv = 1 / q ** 2
        loop_side, errors = {}, {}
        for n in (2, 4, 8, 16):
            oracle = TransferMatrixOracle(geometry, build_grid(beta, n), q)
            loop_side[n] = [inv + (1 - inv) * oracle.nearest_neighbour_connectivity(x) for x in geometry.edges]
            errors[n] = max(abs(a - b) for a, b in zip(loop_side[n], quantum))

        # Contrôle de la matrice de transfert par énumération sur la plus petite grille
        small = build_grid(beta, 2)
        exact = ExactEnumerator(geometry, small, q).probabilities(
            [connected_event(x, x + 1) for x in geometry.edges]
        )
        oracle = TransferMatrixOracle(geometry, small, q)
        tm_gap = max(
            abs(float(exact[f"{x}<->{x + 1}"]) - oracle.nearest_neighbour_connectivity(x))
            for x in geometry.edges
        )
        extrapolated = max(
            abs(_richardson(a, b) - c) for a, b, c in zip(loop_side[8], loop_side[16], quantum)
        )
        return VerificationCheck(
            name="bond-connectivity-bridge",
            passed=extrapolated <= 0.02 and tm_gap <= 1e-10,
            value=extrapolated,
            tolerance=0.02,
            detail={"max_error_by_n": errors, "transfer_matrix_vs_enumeration": tm_gap, "quantum": quantum},
        )

    # ---------- état fondamental ----------

    def ground_state(self, ell: int = 2, q: int = 2) -> VerificationCheck:
        """Énergie fondamentale par itération de la puissance contre eigh, profil <P0> dimérisé"""
        geometry = build_geometry(ell)
        h = build_hamiltonian(ell, q, projector=self.projector_builder(q))
        spectrum = Spectrum(h)
        energy_gap = abs(power_iteration_ground_energy(h) - spectrum.ground_energy)
        profile = {
            x: ground_state_expectation(h, bond_projector(x, ell, q), spectrum) for x in geometry.edges
        }
        weakest_e1 = min(v for x, v in profile.items() if geometry.is_e1(x))
        strongest_e2 = max(v for x, v in profile.items() if not geometry.is_e1(x))
        return VerificationCheck(
            name="ground-state",
            passed=energy_gap <= 1e-8 and weakest_e1 > strongest_e2,
            value=energy_gap,
            tolerance=1e-8,
            detail={"ground_energy": spectrum.ground_energy, "bond_profile": profile},
        )

    # ---------- échantillonneur ----------

    def sampler_exactness(self, ell: int = 1, beta: int = 1, n: int = 4, twice_S: int = 1) -> VerificationCheck:
        """
        Histogramme des configurations contre la loi exacte, graine par graine

        Chaque chaîne est mesurée à chaque balayage puis éclaircie au pas ceil(2 tau_int)
        estimé sur |omega| et L, pour que le chi-deux porte sur des tirages quasi indépendants.
        """
        geometry, grid = build_geometry(ell), build_grid(beta, n)
        exact = ExactEnumerator(geometry, grid, twice_S + 1).distribution()
        keys = sorted(exact, key=lambda k: sorted(k))
        probabilities = [float(exact[k]) for k in keys]
        pooled: Counter = Counter()
        per_seed = []
        for seed in spawn_seeds(self.seed, self.n_seeds):
            params = SamplerParams(
                twice_S=twice_S, ell=ell, beta=beta, n=n,
                n_sweeps=self.sweeps, n_burnin=min(1000, self.sweeps // 10), seed=seed,
            )
            samples, n_bars, n_loops = [], [], []
            for state in iter_samples(ChainState(params), make_rng(seed)):
                samples.append(state.configuration_key())
                n_bars.append(len(state.bar_slots))
                n_loops.append(state.n_loops)
            stride = decorrelation_stride(n_bars, n_loops)
            counts = Counter(samples[::stride])
            test = pooled_chisquare([counts.get(k, 0) for k in keys], probabilities)
            per_seed.append({"seed": seed, "stride": stride, "n_samples": sum(counts.values()), **test})
            pooled.update(counts)
        pooled_test = pooled_chisquare([pooled.get(k, 0) for k in keys], probabilities)
        p_values = [s["p_value"] for s in per_seed]
        return VerificationCheck(
            name="sampler-exactness",
            passed=exactness_verdict(p_values, pooled_test["p_value"]),
            value=min(p_values + [pooled_test["p_value"]]),
            tolerance=EXACTNESS_P_MIN,
            detail={
                **pooled_test,
                "per_seed_p_values": p_values,
                "per_seed": per_seed,
                "n_configurations": len(keys),
            },
        )

    def detailed_balance(self) -> VerificationCheck:
        params = SamplerParams(
            twice_S=2, ell=2, beta=1, n=4, n_sweeps=200, n_burnin=0, seed=self.seed,
        )
        result = run(params, ObservableRequest(dimer_profile=False), audit=True)
        audit = result.derived["audit"]
        return VerificationCheck(
            name="detailed-balance",
            passed=audit["max_residual"] <= 1e-12 and audit["transitions"] > 0,
            value=audit["max_residual"],
            tolerance=1e-12,
            detail=audit,
        )

    # ---------- lois des boucles ----------

    def loop_laws(self, n_configs: int = 10000) -> VerificationCheck:
        rng = make_rng(self.seed)
        failures: Counter = Counter()
        shapes = [(1, 1, 4), (2, 1, 4), (3, 1, 3), (2, 2, 3), (4, 1, 2)]
        for i in range(n_configs):
            ell, beta, n = shapes[i % len(shapes)]
            geometry, grid = build_geometry(ell), build_grid(beta, n)
            config = random_configuration(geometry, grid, rng, n_bars=int(rng.integers(0, grid.n_slots)))
            by_slot = config.by_slot()
            loop_set = LoopSet(geometry, grid, by_slot)
            if not 1 <= loop_set.total_loops <= geometry.n_sites + len(by_slot):
                failures["bound"] += 1
            if not math.isclose(loop_set.total_vertical_extent, 4 * beta * ell):
                failures["extent"] += 1
            free = [t for t in grid.slots if t not in by_slot]
            t = free[int(rng.integers(len(free)))]
            edge = geometry.edges[int(rng.integers(geometry.n_edges))]
            delta = loop_set.delta_insert(edge, t)
            recount = LoopSet(geometry, grid, {**by_slot, t: edge}).total_loops - loop_set.total_loops
            if recount != delta or abs(recount) != 1:
                failures["delta"] += 1
            if (recount == 1) != (loop_set.loop_at(edge, t) == loop_set.loop_at(edge + 1, t)):
                failures["connectivity"] += 1
        total = sum(failures.values())
        return VerificationCheck(
            name="loop-laws",
            passed=total == 0,
            value=float(total),
            tolerance=0.0,
            detail={"configurations": n_configs, "failures": dict(failures)},
        )

    # ---------- bornes ----------

    def bounds_numbers(self) -> VerificationCheck:
        threshold = bounds_service.dimerization_threshold()
        scan = bounds_service.threshold_grid_scan()
        grid = [8, 10, 20, 39.2, 40, 100]
        closed_vs_truncated = max(
            abs(bounds_service.peierls_bound(S) - bounds_service.peierls_bound_truncated(S))
            / bounds_service.peierls_bound(S)
            for S in grid
        )
        c_positive = all(bounds_service.c_of_S(S) > 0 for S in np.arange(40, 200.5, 0.5))
        divergent = []
        for S in (0.5, 3.0, 7.0, 7.5):
            try:
                bounds_service.peierls_bound(S)
                divergent.append(False)
            except LoopModelError:
                divergent.append(True)
        decay_finite = all(math.isfinite(bounds_service.decay_rate(S)) for S in np.arange(8, 101, 1.0))
        # Minoration d'une couche de dimères: dans ]0, 1[ et décroissante avec ell
        suppression = {
            ell: bounds_service.winding_suppression_bound(81, ell, 64) for ell in (1, 2, 4, 16)
        }
        values = list(suppression.values())
        suppression_ok = all(0 < v < 1 for v in values) and all(a > b for a, b in zip(values, values[1:]))
        checks = {
            "threshold": abs(threshold - 39.2) <= 0.1,
            "bisection_vs_scan": abs(threshold - scan) <= 1e-4,
            "closed_vs_truncated": closed_vs_truncated <= 1e-10,
            "c_positive_from_40": c_positive,
            "divergent_up_to_7.5": all(divergent),
            "decay_finite_from_8": decay_finite,
            "winding_suppression": suppression_ok,
        }
        return VerificationCheck(
            name="bounds-reference-values",
            passed=all(checks.values()),
            value=threshold,
            tolerance=0.1,
            detail={
                **checks, "S_star": threshold, "scan": scan, "c_40": bounds_service.c_of_S(40),
                "winding_suppression_by_ell": suppression,
            },
        )

    # ---------- convention de température ----------

    def correlation_convention(self, ell: int = 2, q: int = 3, beta: int = 1) -> VerificationCheck:
        """
        Estimateur de boucles (1/3) S(S+1) (-1)^(x-y) P(x<->y) contre <S3_x S3_y> quantique
        à beta_q = 2 beta et beta_q = beta
        """
        geometry = build_geometry(ell)
        S = (q - 1) / 2
        pairs = [(geometry.sites[0], y) for y in geometry.sites[1:]]
        oracle = TransferMatrixOracle(geometry, build_grid(beta, 64), q)
        spectrum = Spectrum(build_hamiltonian(ell, q))
        loop = {
            f"{x},{y}": S * (S + 1) / 3 * (-1) ** abs(x - y) * oracle.pair_connectivity(x, y) for x, y in pairs
        }
        gaps = {}
        for label, beta_q in (("2beta", 2 * beta), ("beta", beta)):
            gaps[label] = max(
                abs(loop[f"{x},{y}"] - spin_correlation_ed(ell, q, x, y, 3, 3, beta_q, spectrum)) for x, y in pairs
            )

        params = SamplerParams(
            twice_S=q - 1, ell=ell, beta=beta, n=16,
            n_sweeps=self.sweeps, n_burnin=min(1000, self.sweeps // 10), seed=self.seed,
        )
        mc = run(params, ObservableRequest(pairs=pairs, dimer_profile=False))
        mc_ok = True
        mc_detail = {}
        for x, y in pairs:
            est = mc.derived["spin_correlation"][f"{x},{y}"]
            target = spin_correlation_ed(ell, q, x, y, 3, 3, 2 * beta, spectrum)
            mc_detail[f"{x},{y}"] = {**est, "ed": target}
            mc_ok &= abs(est["mean"] - target) <= max(3 * est["error"], 0.02)

        convention = min(gaps, key=gaps.get)
        return VerificationCheck(
            name="correlation-convention",
            passed=convention == "2beta" and gaps["2beta"] <= 0.02 and mc_ok,
            value=gaps["2beta"],
            tolerance=0.02,
            detail={"matching_convention": convention, "max_gap": gaps, "monte_carlo": mc_detail},
        )

    # ---------- critères lourds ----------

    def _large_run(self, ell: int, beta: int, n: int, twice_S: int, request: ObservableRequest, n_chains: int):
        params = SamplerParams(
            twice_S=twice_S, ell=ell, beta=beta, n=n,
            n_sweeps=max(self.sweeps // n_chains, 2000), n_burnin=1000, seed=self.seed,
        )
        return run_parallel(params, spawn_seeds(self.seed, n_chains), request)

    def dimerization_and_decay(self) -> List[VerificationCheck]:
        ell, x0 = 16, -5
        pairs = [(x0, x0 + d) for d in range(2, 11)]
        result = self._large_run(ell, 8, 64, 80, ObservableRequest(pairs=pairs), n_chains=8)
        c40 = bounds_service.c_of_S(40)
        dimer = result.derived["dimerization"]
        significant = all(v["mean"] > 3 * v["error"] for v in dimer.values())
        minimum = min(v["mean"] for v in dimer.values())
        dimer_check = VerificationCheck(
            name="dimerization-proxy",
            passed=significant and minimum >= 0.5 * c40,
            value=minimum,
            tolerance=0.5 * c40,
            detail={"D": dimer, "c_40": c40},
        )
        fit = result.derived.get("decay_fit", {"rate": float("nan")})
        target = 0.5 / bounds_service.decay_rate(40)
        decay_check = VerificationCheck(
            name="decay-proxy",
            passed=bool(fit["rate"] >= target),
            value=fit["rate"],
            tolerance=target,
            detail={"fit": fit},
        )
        return [dimer_check, decay_check]

    def omega_alpha_saturation(self) -> VerificationCheck:
        ell = 8
        fractions, margins_ok = {}, True
        geometry = build_geometry(ell)
        sites = [x for x in geometry.interior_e1_edges()]
        for beta in (2, 4, 8):
            result = self._large_run(ell, beta, 64, 80, ObservableRequest(omega_alpha=True, surround_sites=sites), 4)
            fractions[beta] = result.derived["omega_fraction"]
            for v in result.derived.get("surround_margin", {}).values():
                margins_ok &= v["mean"] >= -3 * v["error"]
        increasing = fractions[2] <= fractions[4] <= fractions[8]
        return VerificationCheck(
            name="omega-alpha-saturation",
            passed=increasing and fractions[8] >= 0.9 and margins_ok,
            value=fractions[8],
            tolerance=0.9,
            detail={"fractions": fractions, "surround_margins_ok": margins_ok},
        )

    # ---------- exécution ----------

    def checks(self) -> List[tuple]:
        registry = [
            ("polynomial-identity-S=1/2", lambda: self.polynomial_identity(1)),
            ("polynomial-identity-S=1", lambda: self.polynomial_identity(2)),
            ("polynomial-identity-S=3/2", lambda: self.polynomial_identity(3)),
            ("spin-algebra", self.spin_algebra),
            ("trotter-identity-q=2", lambda: self.trotter_identity(2)),
            ("trotter-identity-q=3", lambda: self.trotter_identity(3)),
            ("bond-connectivity-bridge", self.bond_bridge),
            ("ground-state", self.ground_state),
            ("sampler-exactness", self.sampler_exactness),
            ("detailed-balance", self.detailed_balance),
            ("loop-laws", self.loop_laws),
            ("bounds-reference-values", self.bounds_numbers),
            ("correlation-convention", self.correlation_convention),
        ]
        return registry

    def run(self) -> VerificationReport:
        logger.info(f"🔎 Vérification ({'complète' if self.full else 'bureau'}), mutations={list(self.mutations)}")
        results = [_timed(name, func) for name, func in self.checks()]
        if self.full:
            start = time.perf_counter()
            try:
                heavy = self.dimerization_and_decay()
            except LoopModelError as e:
                heavy = [
                    VerificationCheck(name=name, passed=False, detail={"error": e.code, "message": e.message})
                    for name in ("dimerization-proxy", "decay-proxy")
                ]
            for check in heavy:
                check.runtime_s = round(time.perf_counter() - start, 3)
            results.extend(heavy)
            results.append(_timed("omega-alpha-saturation", self.omega_alpha_saturation))

        failures = [c.name for c in results if not c.passed]
        if failures:
            logger.error(f"❌ Vérifications en échec: {failures}")
        else:
            logger.info("✅ Toutes les vérifications sont passées")
        return VerificationReport(
            passed=not failures,
            checks=results,
            failures=failures,
            provenance={
                "full": self.full,
                "mutations": list(self.mutations),
                "sweeps": self.sweeps,
                "seeds": self.n_seeds,
                "seed": self.seed,
                "version": settings.APP_VERSION,
            },
        )


def enumeration_fits(geometry, grid, limit: int = 2 ** 15) -> bool:
    """Énumération exécutée seulement en dessous d'une taille de bureau"""
    return enumeration_size(geometry, grid) <= min(limit, settings.ENUM_BUDGET)


def run_verify(
    full: bool = False,
    mutations: Sequence[str] = (),
    sweeps: Optional[int] = None,
    n_seeds: Optional[int] = None,
    seed: Optional[int] = None,
) -> VerificationReport:
    """
    Exécute la suite de vérification

    Returns:
        VerificationReport (passed vrai si toutes les vérifications passent)
    """
    suite = VerificationSuite(full=full, mutations=mutations, sweeps=sweeps, n_seeds=n_seeds, seed=seed)
    return suite.run()
