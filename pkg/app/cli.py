"""
Interface en ligne de commande: simulate, enumerate, ed, contours, bounds, verify

Codes de sortie: 0 succès, 1 échec de vérification, 2 erreur d'usage ou de contrainte,
3 erreur d'exécution (système de fichiers, accumulateur non fini...).
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from app.config import settings
from app.exceptions import (
    ConfigParseError,
    DivergentSeriesError,
    InvalidConfigurationError,
    InvalidParameterError,
    LoopModelError,
    TooLargeInstanceError,
)
from app.schemas import ObservableRequest, RunConfig
from app.services import bounds as bounds_service
from app.services.chain_model import build_geometry, build_grid, parse_config_lines
from app.services.contours import CENSUS_HEADER, census_rows, contour_census
from app.services.ed_oracle import Spectrum, bond_profile, build_hamiltonian, spin_correlation_ed
from app.services.enumerator import (
    TransferMatrixOracle,
    connected_event,
    empty_event,
    enumerate_Z,
    omega_alpha_event,
    omega_union_event,
    surround_event,
)
from app.services.loop_engine import trace_loops
from app.services.run_config import config_from_mapping, split_lines
from app.services.sampler import ChainState, iter_samples, make_rng, run, run_parallel, spawn_seeds
from app.services.verification import KNOWN_MUTATIONS, run_verify
from app.services.writer import ResultWriter
from app.utils.logger import set_console_level, setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

USAGE_ERRORS = (
    ConfigParseError,
    InvalidParameterError,
    InvalidConfigurationError,
    TooLargeInstanceError,
    DivergentSeriesError,
)

DEFAULT_S_GRID = "8:100:0.5"

# Option CLI -> clé du fichier de configuration
FLAG_KEYS = {
    "twice_S": "twice_S",
    "ell": "ell",
    "beta": "beta",
    "n": "n",
    "seed": "seed",
    "sweeps": "n_sweeps",
    "burnin": "n_burnin",
    "measure_every": "measure_every",
    "chains": "n_chains",
    "p_insert": "p_insert",
    "pairs": "pairs",
    "surround_sites": "surround_sites",
    "omega_alpha": "omega_alpha",
    "beta_q": "beta_q",
    "S_grid": "S_grid",
    "bars": "config_file",
    "full": "full",
    "output_dir": "output_dir",
    "formats": "formats",
}


# ============ Analyse des arguments ============

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Fichier de configuration 'clé = valeur'")
    parser.add_argument("--output-dir", dest="output_dir", help="Répertoire de sortie (doit exister)")
    parser.add_argument("--formats", help="Formats de sortie, ex. 'json,csv'")
    parser.add_argument("--archive", action="store_true", help="Archiver l'exécution dans la base SQLite")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Logs de débogage sur stderr")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Seulement les erreurs sur stderr")


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--twice-S", dest="twice_S", help="2S (fugacité q = 2S+1)")
    parser.add_argument("--ell", help="Demi-longueur de la chaîne")
    parser.add_argument("--beta", help="Beta entier")
    parser.add_argument("-n", "--n", dest="n", help="Résolution de Trotter")
    parser.add_argument("--pairs", help="Paires de sites 'x:y, x:y'")


def _add_sampler(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", help="Graine Philox")
    parser.add_argument("--sweeps", help="Nombre de balayages")
    parser.add_argument("--burnin", help="Balayages de thermalisation")
    parser.add_argument("--measure-every", dest="measure_every", help="Balayages entre deux mesures")
    parser.add_argument("--chains", help="Chaînes indépendantes (graines dérivées)")
    parser.add_argument("--p-insert", dest="p_insert", help="Probabilité de proposer une insertion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loop-lab",
        description=settings.APP_DESCRIPTION,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Simulation Monte Carlo de la mesure de boucles")
    _add_common(simulate)
    _add_model(simulate)
    _add_sampler(simulate)
    simulate.add_argument("--surround-sites", dest="surround_sites", help="Sites x pour E_x, ex. '-1,1'")
    simulate.add_argument("--omega-alpha", dest="omega_alpha", action="store_const", const="true",
                          help="Mesurer l'appartenance aux Omega^alpha")

    enumerate_ = sub.add_parser("enumerate", help="Fonction de partition exacte par énumération")
    _add_common(enumerate_)
    _add_model(enumerate_)
    enumerate_.add_argument("--surround-sites", dest="surround_sites")
    enumerate_.add_argument("--omega-alpha", dest="omega_alpha", action="store_const", const="true")

    ed = sub.add_parser("ed", help="Diagonalisation exacte de H")
    _add_common(ed)
    _add_model(ed)
    ed.add_argument("--beta-q", dest="beta_q", help="Beta quantique (défaut: 2 beta)")

    contours = sub.add_parser("contours", help="Recensement des contours")
    _add_common(contours)
    _add_model(contours)
    _add_sampler(contours)
    contours.add_argument("--bars", help="Fichier de barres 'edge,slot' (sinon échantillonnage)")

    bounds = sub.add_parser("bounds", help="Bornes de Peierls sur une grille de S")
    _add_common(bounds)
    bounds.add_argument("--S-grid", dest="S_grid", help=f"Grille 'debut:fin:pas' ou 'a,b,c' (défaut {DEFAULT_S_GRID})")

    verify = sub.add_parser("verify", help="Suite de vérification")
    _add_common(verify)
    verify.add_argument("--full", action="store_const", const="true",
                        help="Inclure les critères lourds (10^6 balayages, plusieurs heures à ell=16; voir --sweeps)")
    verify.add_argument("--seed")
    verify.add_argument("--sweeps", help="Balayages par chaîne (défaut: VERIFY_SWEEPS, 10^6 avec --full)")
    verify.add_argument("--mutation", action="append", default=[], choices=KNOWN_MUTATIONS,
                        help="Injection de faute (répétable)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Fusionne le fichier de configuration et les options (les options sont prioritaires)

    Raises:
        ConfigParseError: avec toutes les erreurs
    """
    raw: Dict[str, Any] = {}
    errors: List[str] = []
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                raw, errors = split_lines(f.read())
        except OSError as e:
            raise ConfigParseError([f"lecture de {args.config} impossible: {e}"])

    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = value
    raw["command"] = args.command
    if args.command == "bounds" and "S_grid" not in raw:
        raw["S_grid"] = DEFAULT_S_GRID
    return config_from_mapping(raw, errors)


# ============ Sous-commandes ============

def _request(config: RunConfig, keep_traces: bool = False) -> ObservableRequest:
    return ObservableRequest(
        pairs=config.pairs,
        surround_sites=config.surround_sites,
        omega_alpha=config.omega_alpha,
        keep_traces=keep_traces,
    )


def cmd_simulate(config: RunConfig, writer: ResultWriter) -> Dict[str, Any]:
    params = config.sampler_params()
    if config.n_chains > 1:
        result = run_parallel(params, spawn_seeds(config.seed, config.n_chains), _request(config))
    else:
        result = run(params, _request(config, keep_traces=True))

    payload = result.model_dump(mode="json")
    writer.write_json("simulate.json", payload)
    writer.write_csv(
        "estimates.csv",
        ["observable", "mean", "error", "tau_int", "n_samples"],
        [[e.name, e.mean, e.error, e.tau_int, e.n_samples] for e in result.estimates.values()],
    )
    if result.traces:
        rows = (
            [name, params.n_burnin + i * params.measure_every, value]
            for name, trace in result.traces.items()
            for i, value in enumerate(trace)
        )
        writer.write_csv("traces.csv", ["observable", "sweep", "value"], rows)
    return payload


def cmd_enumerate(config: RunConfig, writer: ResultWriter) -> Dict[str, Any]:
    geometry, grid = build_geometry(config.ell), build_grid(config.beta, config.n)
    q = config.twice_S + 1
    events = [empty_event()]
    events += [connected_event(x, y) for x, y in config.pairs]
    events += [surround_event(x) for x in config.surround_sites]
    if config.omega_alpha:
        events += [omega_alpha_event(a) for a in range(-grid.beta, grid.beta)] + [omega_union_event()]

    result = enumerate_Z(geometry, grid, q, events)
    payload = result.model_dump(mode="json")
    try:
        oracle = TransferMatrixOracle(geometry, grid, q)
        payload["transfer_matrix"] = oracle.result(config.pairs).model_dump(mode="json")
    except TooLargeInstanceError as e:
        logger.warning(f"⚠️ Matrice de transfert ignorée: {e.message}")

    writer.write_json("enumerate.json", payload)
    writer.write_csv(
        "enumerate.csv",
        ["event", "probability"],
        [["Z", result.Z]] + [[name, p] for name, p in result.event_probabilities.items()],
    )
    return payload


def cmd_ed(config: RunConfig, writer: ResultWriter) -> Dict[str, Any]:
    geometry = build_geometry(config.ell)
    q = config.twice_S + 1
    beta_q = config.beta_q if config.beta_q is not None else 2.0 * config.beta
    spectrum = Spectrum(build_hamiltonian(config.ell, q))
    pairs = config.pairs or [(geometry.sites[0], y) for y in geometry.sites[1:]]

    profile = bond_profile(config.ell, q, beta_q, spectrum)
    correlations = [
        (x, y, spin_correlation_ed(config.ell, q, x, y, 3, 3, beta_q, spectrum)) for x, y in pairs
    ]
    payload = {
        "ell": config.ell,
        "q": q,
        "beta_q": beta_q,
        "ground_energy": spectrum.ground_energy,
        "partition_function": spectrum.partition_function(beta_q),
        "residual": spectrum.residual,
        "bond_profile": {str(x): v for x, v in zip(geometry.edges, profile)},
        "spin_correlation": {f"{x},{y}": v for x, y, v in correlations},
    }
    writer.write_json("ed.json", payload)
    writer.write_csv("spectrum.csv", ["index", "energy"], enumerate(spectrum.energies.tolist()))
    writer.write_csv("bond_profile.csv", ["edge", "P0"], zip(geometry.edges, profile))
    writer.write_csv("correlations.csv", ["x", "y", "S3S3"], correlations)
    return payload


def cmd_contours(config: RunConfig, writer: ResultWriter) -> Dict[str, Any]:
    geometry, grid = build_geometry(config.ell), build_grid(config.beta, config.n)
    rows: List[list] = []
    if config.config_file:
        try:
            with open(config.config_file, encoding="utf-8") as f:
                bars = parse_config_lines(f.read())
        except OSError as e:
            raise ConfigParseError([f"lecture de {config.config_file} impossible: {e}"])
        census = contour_census(trace_loops(geometry, grid, bars))
        rows = census_rows(census, sample=0)
        n_samples = 1
    else:
        params = config.sampler_params()
        state = ChainState(params)
        n_samples = 0
        for n_samples, current in enumerate(iter_samples(state, make_rng(params.seed)), start=1):
            if current.loop_set.winding_loops():
                continue
            rows.extend(census_rows(contour_census(current.loop_set), sample=n_samples - 1))

    writer.write_csv("contours.csv", ["sample"] + CENSUS_HEADER, rows)
    payload = {
        "n_samples": n_samples,
        "n_contours": len(rows),
        "n_external": sum(1 for r in rows if r[6]),
    }
    writer.write_json("contours.json", payload)
    return payload


def cmd_bounds(config: RunConfig, writer: ResultWriter) -> Dict[str, Any]:
    reports = bounds_service.bounds_table(config.S_grid)
    threshold = bounds_service.dimerization_threshold()
    payload = {
        "threshold_S": threshold,
        "reports": [r.model_dump(mode="json") for r in reports],
    }
    writer.write_json("bounds.json", payload)
    writer.write_csv(
        "bounds.csv",
        ["S", "q", "peierls_bound", "c_of_S", "eta_min"],
        [[r.S, r.q, r.peierls_bound, r.c_of_S, r.eta_min] for r in reports],
    )
    return payload


def cmd_verify(config: RunConfig, writer: ResultWriter, args: argparse.Namespace) -> Dict[str, Any]:
    report = run_verify(
        full=config.full,
        mutations=args.mutation,
        sweeps=config.n_sweeps if getattr(args, "sweeps", None) else None,
        seed=config.seed if getattr(args, "seed", None) else None,
    )
    payload = report.model_dump(mode="json")
    writer.write_json("verify.json", payload)
    return payload


COMMANDS = {
    "simulate": cmd_simulate,
    "enumerate": cmd_enumerate,
    "ed": cmd_ed,
    "contours": cmd_contours,
    "bounds": cmd_bounds,
}


def _archive(config: RunConfig, payload: Dict[str, Any]) -> None:
    from app.database import get_db_context, init_db
    from app.services.archive import archive_run

    init_db()
    with get_db_context() as db:
        archive_run(db, config.command, config.model_dump(mode="json"), payload, seed=config.seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.verbose:
        set_console_level(logging.DEBUG)
    elif args.quiet:
        set_console_level(logging.ERROR)

    try:
        config = resolve_config(args)
        writer = ResultWriter(config)
        logger.info(f"🚀 Commande {config.command} (sortie: {writer.output_dir})")
        if config.command == "verify":
            payload = cmd_verify(config, writer, args)
        else:
            payload = COMMANDS[config.command](config, writer)
        if args.archive:
            _archive(config, payload)
    except USAGE_ERRORS as e:
        for line in getattr(e, "errors", None) or getattr(e, "violations", None) or [e.message]:
            print(f"erreur: {line}", file=sys.stderr)
        logger.error(f"❌ {e.code}: {e.message}")
        return EXIT_USAGE
    except (LoopModelError, OSError) as e:
        print(f"erreur d'exécution: {e}", file=sys.stderr)
        logger.error(f"❌ Erreur d'exécution: {e}")
        return EXIT_RUNTIME

    for path in writer.written:
        print(path)
    if config.command == "verify" and not payload["passed"]:
        print("vérifications en échec: " + ", ".join(payload["failures"]), file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    logger.info(f"✅ Commande {config.command} terminée")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
