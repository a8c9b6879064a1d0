"""
Analyse statistique des séries Monte Carlo: erreurs par blocs, estimateurs de rapport,
test du chi-deux
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.exceptions import SeriesTooShortError
from app.schemas import ErrorReport
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

MIN_BINS = 16


def default_bin_sizes(length: int) -> List[int]:
    """Tailles 1, 2, 4, ... gardant au moins MIN_BINS blocs"""
    sizes = [1]
    while length // (sizes[-1] * 2) >= MIN_BINS:
        sizes.append(sizes[-1] * 2)
    return sizes


def binned_error(series: Sequence[float], bin_sizes: Optional[Sequence[int]] = None) -> ErrorReport:
    """
    Erreur standard par blocs (Flyvbjerg-Petersen)

    Le plateau est le premier niveau compatible avec les deux suivants à 3 sigma
    près; à défaut, le maximum sur les niveaux d'au moins MIN_BINS blocs.

    Args:
        series: Série temporelle
        bin_sizes: Tailles de blocs croissantes (défaut: puissances de 2)

    Returns:
        ErrorReport
    """
    data = np.asarray(series, dtype=float)
    if bin_sizes is None:
        bin_sizes = default_bin_sizes(len(data))
    bin_sizes = sorted(int(b) for b in bin_sizes)
    if len(data) < 2 or len(data) < 2 * bin_sizes[-1]:
        raise SeriesTooShortError(
            f"Série de longueur {len(data)} trop courte pour des blocs de taille {bin_sizes[-1]}"
        )

    mean = float(data.mean())
    sig, dsig, nbins = [], [], []
    for size in bin_sizes:
        count = len(data) // size
        blocks = data[: count * size].reshape(count, size).mean(axis=1)
        s = float(blocks.std(ddof=1) / math.sqrt(count))
        sig.append(s)
        dsig.append(s / math.sqrt(2.0 * (count - 1)))
        nbins.append(count)

    plateau = None
    for k in range(len(sig) - 2):
        if all(abs(sig[k] - sig[j]) <= 3 * max(dsig[k], dsig[j]) for j in (k + 1, k + 2)):
            plateau = sig[k]
            break
    converged = plateau is not None
    if plateau is None:
        eligible = [s for s, c in zip(sig, nbins) if c >= MIN_BINS] or sig
        plateau = max(eligible)

    naive = sig[0]
    tau = 0.5 * (plateau / naive) ** 2 if naive > 0 else 0.0
    return ErrorReport(
        n_samples=len(data),
        mean=mean,
        naive_error=naive,
        error=plateau,
        tau_int=tau,
        bin_sizes=list(bin_sizes),
        errors=sig,
        converged=converged,
    )


def ratio_estimate(numerator: Sequence[float], denominator: Sequence[float]) -> Tuple[float, float]:
    """
    Estimateur de rapport a/b avec erreur par la méthode delta (série linéarisée analysée par blocs)

    Returns:
        (rapport, erreur); (nan, nan) si le dénominateur est nul
    """
    a = np.asarray(numerator, dtype=float)
    b = np.asarray(denominator, dtype=float)
    b_mean = b.mean()
    if b_mean == 0:
        return float("nan"), float("nan")
    r = a.mean() / b_mean
    linearized = (a - r * b) / b_mean
    return float(r), binned_error(linearized).error


def pooled_chisquare(
    observed: Sequence[float],
    expected_probabilities: Sequence[float],
    min_expected: float = 5.0,
) -> Dict[str, float]:
    """
    Test du chi-deux d'adéquation; les classes d'effectif attendu < min_expected sont regroupées

    Returns:
        {"statistic", "p_value", "dof"}
    """
    obs = np.asarray(observed, dtype=float)
    total = obs.sum()
    exp = np.asarray(expected_probabilities, dtype=float) * total

    order = np.argsort(exp)[::-1]
    pooled_obs, pooled_exp = [], []
    acc_o, acc_e = 0.0, 0.0
    for i in order:
        if exp[i] >= min_expected:
            pooled_obs.append(obs[i])
            pooled_exp.append(exp[i])
        else:
            acc_o += obs[i]
            acc_e += exp[i]
    if acc_e > 0:
        if acc_e >= min_expected or not pooled_exp:
            pooled_obs.append(acc_o)
            pooled_exp.append(acc_e)
        else:
            pooled_obs[-1] += acc_o
            pooled_exp[-1] += acc_e

    if len(pooled_obs) < 2:
        return {"statistic": 0.0, "p_value": 1.0, "dof": 0}
    pooled_exp = np.asarray(pooled_exp)
    pooled_exp *= np.sum(pooled_obs) / pooled_exp.sum()
    result = stats.chisquare(pooled_obs, pooled_exp)
    return {
        "statistic": float(result.statistic),
        "p_value": float(result.pvalue),
        "dof": len(pooled_obs) - 1,
    }


def decorrelation_stride(*series: Sequence[float]) -> int:
    """
    Pas d'éclaircissement ceil(2 tau_int), tau_int étant le plus grand des temps
    d'autocorrélation intégrés (analyse par blocs) des séries scalaires fournies

    Args:
        series: Séries mesurées sur la même chaîne (ex. |omega| et L)

    Returns:
        Pas >= 1 entre deux échantillons conservés
    """
    tau = max(binned_error(s).tau_int for s in series)
    return max(1, math.ceil(2 * tau))
