"""
Routes API pour la diagonalisation exacte
"""
from typing import Optional

from fastapi import APIRouter, HTTPException, Query

from app.exceptions import LoopModelError
from app.services.chain_model import build_geometry, make_spin
from app.services.ed_oracle import Spectrum, bond_profile, build_hamiltonian, spin_correlation_ed
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter(prefix="/api/diagonalization", tags=["Diagonalisation"])


def _spectrum(twice_S: int, ell: int) -> Spectrum:
    spin = make_spin(twice_S)
    build_geometry(ell)
    return Spectrum(build_hamiltonian(ell, spin.q))


@router.get(
    "/spectrum",
    summary="Spectre de H",
    description="Valeurs propres de H = -somme des projecteurs singulets"
)
def get_spectrum(
    twice_S: int = Query(1, ge=1, description="2S"),
    ell: int = Query(1, ge=1, description="Demi-longueur"),
):
    try:
        spectrum = _spectrum(twice_S, ell)
        return {
            "ground_energy": spectrum.ground_energy,
            "energies": spectrum.energies.tolist(),
            "residual": spectrum.residual,
        }
    except LoopModelError:
        raise
    except Exception as e:
        logger.error(f"Erreur lors de la diagonalisation: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors de la diagonalisation")


@router.get(
    "/bond-profile",
    summary="Profil d'énergie de liaison",
    description="<P0_{x,x+1}> de Gibbs pour chaque arête"
)
def get_bond_profile(
    twice_S: int = Query(1, ge=1),
    ell: int = Query(2, ge=1),
    beta_q: float = Query(2.0, ge=0, description="Beta quantique"),
):
    try:
        spectrum = _spectrum(twice_S, ell)
        geometry = build_geometry(ell)
        profile = bond_profile(ell, twice_S + 1, beta_q, spectrum)
        return {"beta_q": beta_q, "profile": {str(x): v for x, v in zip(geometry.edges, profile)}}
    except LoopModelError:
        raise
    except Exception as e:
        logger.error(f"Erreur lors du calcul du profil: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du calcul du profil")


@router.get(
    "/correlation",
    summary="Corrélation de spins",
    description="<S^i_x S^j_y> de Gibbs"
)
def get_correlation(
    x: int,
    y: int,
    twice_S: int = Query(1, ge=1),
    ell: int = Query(2, ge=1),
    beta_q: float = Query(2.0, ge=0),
    i: int = Query(3, ge=1, le=3),
    j: Optional[int] = Query(None, ge=1, le=3),
):
    """
    **Erreurs:**
    - 400: Site hors de la chaîne, dimension au-delà du budget dense
    """
    try:
        geometry = build_geometry(ell)
        if not (geometry.has_site(x) and geometry.has_site(y)):
            raise HTTPException(status_code=400, detail=f"Sites ({x}, {y}) hors de la chaîne")
        j = i if j is None else j
        value = spin_correlation_ed(ell, twice_S + 1, x, y, i, j, beta_q, _spectrum(twice_S, ell))
        return {"x": x, "y": y, "i": i, "j": j, "beta_q": beta_q, "value": value}
    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors du calcul de la corrélation: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du calcul de la corrélation")
