"""
Schémas Pydantic pour validation et sérialisation des données
"""
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings


# ============ Schémas Chaîne ============

class SpinWeight(BaseModel):
    """Spin S (stocké comme 2S entier) et fugacité des boucles q = 2S+1"""
    model_config = ConfigDict(frozen=True)

    twice_S: int = Field(..., ge=1, description="Deux fois le spin S")

    @property
    def S(self) -> float:
        return self.twice_S / 2

    @property
    def q(self) -> int:
        return self.twice_S + 1

    @property
    def casimir(self) -> float:
        """S(S+1)"""
        return self.S * (self.S + 1)


class ChainGeometry(BaseModel):
    """Chaîne paire de 2*ell sites {-ell+1, ..., ell}; une arête est repérée par son site gauche"""
    model_config = ConfigDict(frozen=True)

    ell: int = Field(..., ge=1, description="Demi-longueur de la chaîne")
    sites: Tuple[int, ...] = Field(..., description="Sites ordonnés")
    edges: Tuple[int, ...] = Field(..., description="Site gauche x de chaque arête {x, x+1}")
    edge_classes: Tuple[Literal["E1", "E2"], ...] = Field(..., description="Classe de chaque arête")

    @model_validator(mode="after")
    def check_invariants(self) -> "ChainGeometry":
        ell = self.ell
        if self.sites != tuple(range(-ell + 1, ell + 1)):
            raise ValueError("Les sites doivent être {-ell+1, ..., ell}")
        if self.edges != tuple(range(-ell + 1, ell)):
            raise ValueError("Les arêtes doivent être {x, x+1} pour -ell+1 <= x <= ell-1")
        expected = tuple("E1" if (x + ell - 1) % 2 == 0 else "E2" for x in self.edges)
        if self.edge_classes != expected:
            raise ValueError("Les classes E1/E2 doivent alterner en commençant par E1")
        return self

    @property
    def n_sites(self) -> int:
        return 2 * self.ell

    @property
    def n_edges(self) -> int:
        return 2 * self.ell - 1

    @property
    def e1_edges(self) -> Tuple[int, ...]:
        return tuple(x for x, c in zip(self.edges, self.edge_classes) if c == "E1")

    @property
    def e2_edges(self) -> Tuple[int, ...]:
        return tuple(x for x, c in zip(self.edges, self.edge_classes) if c == "E2")

    def has_site(self, x: int) -> bool:
        return -self.ell + 1 <= x <= self.ell

    def has_edge(self, x: int) -> bool:
        return -self.ell + 1 <= x <= self.ell - 1

    def is_e1(self, x: int) -> bool:
        return (x + self.ell - 1) % 2 == 0

    def interior_e1_edges(self) -> Tuple[int, ...]:
        """Liaisons E1 {x, x+1} avec x dans {-ell+3, -ell+5, ..., ell-1}"""
        return tuple(x for x in self.e1_edges if x >= -self.ell + 3)


class TimeGrid(BaseModel):
    """Cercle temporel discret [-beta, beta] de pas 1/n, créneau 0 exclu"""
    model_config = ConfigDict(frozen=True)

    beta: int = Field(..., ge=1, description="Beta entier du modèle de boucles")
    n: int = Field(..., ge=1, description="Résolution de Trotter")

    @property
    def half(self) -> int:
        """beta * n: le créneau beta*n représente le point identifié -beta = beta"""
        return self.beta * self.n

    @property
    def circumference(self) -> int:
        """Nombre de points du cercle (en unités de 1/n)"""
        return 2 * self.half

    @property
    def n_slots(self) -> int:
        return 2 * self.half - 1

    @property
    def slots(self) -> Tuple[int, ...]:
        return tuple(k for k in range(-self.half + 1, self.half + 1) if k != 0)

    def has_slot(self, k: int) -> bool:
        return -self.half + 1 <= k <= self.half and k != 0

    def wrap(self, k: int) -> int:
        """Ramène un indice de créneau dans (-beta*n, beta*n]"""
        c = self.circumference
        k = (k + self.half - 1) % c - self.half + 1
        return k


class Bar(BaseModel):
    """Double barre sur l'arête {edge, edge+1} au créneau `slot`"""
    model_config = ConfigDict(frozen=True)

    edge: int = Field(..., description="Site gauche de l'arête")
    slot: int = Field(..., description="Indice du créneau temporel")

    def to_line(self) -> str:
        return f"{self.edge},{self.slot}"


class BarConfiguration(BaseModel):
    """Ensemble de doubles barres trié canoniquement par (slot, edge)"""
    model_config = ConfigDict(frozen=True)

    bars: Tuple[Bar, ...] = Field(default=(), description="Barres triées par (slot, edge)")

    @field_validator("bars", mode="after")
    @classmethod
    def canonical_order(cls, v: Tuple[Bar, ...]) -> Tuple[Bar, ...]:
        return tuple(sorted(set(v), key=lambda b: (b.slot, b.edge)))

    @classmethod
    def from_pairs(cls, pairs) -> "BarConfiguration":
        """Construit depuis des couples (edge, slot)"""
        return cls(bars=tuple(Bar(edge=e, slot=s) for e, s in pairs))

    def __len__(self) -> int:
        return len(self.bars)

    def by_slot(self) -> Dict[int, int]:
        """Dictionnaire slot -> edge (suppose la configuration valide)"""
        return {b.slot: b.edge for b in self.bars}

    def shifted(self, grid: TimeGrid, offset: int) -> "BarConfiguration":
        """Translation de toutes les barres de `offset` créneaux sur le cercle"""
        return BarConfiguration(
            bars=tuple(Bar(edge=b.edge, slot=grid.wrap(b.slot + offset)) for b in self.bars)
        )

    def to_lines(self) -> List[str]:
        return [b.to_line() for b in self.bars]


# ============ Schémas Rapports ============

class Violation(BaseModel):
    """Violation d'une contrainte de Omega"""
    kind: Literal["zero-time-bar", "slot-collision", "unknown-edge", "unknown-slot"]
    bar: Bar
    message: str


class ValidityReport(BaseModel):
    """Résultat de validate_config: vide si et seulement si la configuration est dans Omega"""
    violations: List[Violation] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    @property
    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]


class ExactResult(BaseModel):
    """Résultat exact d'un oracle (énumération ou matrice de transfert)"""
    Z: float = Field(..., gt=0, description="Fonction de partition Z_n")
    Z_fraction: Optional[str] = Field(None, description="Z_n rationnel exact 'num/den' (énumération)")
    n_configs: int = Field(..., ge=0, description="Nombre de configurations énumérées")
    event_probabilities: Dict[str, float] = Field(default_factory=dict)
    method: Literal["enumeration", "transfer-matrix"] = "enumeration"
    provenance: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("event_probabilities")
    @classmethod
    def check_probabilities(cls, v: Dict[str, float]) -> Dict[str, float]:
        for name, p in v.items():
            if not -1e-12 <= p <= 1 + 1e-12:
                raise ValueError(f"Probabilité hors de [0, 1] pour {name}: {p}")
        return v


class ContourInfo(BaseModel):
    """Géométrie d'un contour (boucle longue sans enroulement)"""
    loop_id: int
    n_bars: int = Field(..., ge=0, description="|gamma|: doubles barres distinctes")
    int1_size: int = Field(..., ge=0, description="Cellules (arête E1, intervalle) intérieures")
    int2_size: int = Field(..., ge=0, description="Cellules (arête E2, intervalle) intérieures")
    length_L: float = Field(..., description="L(gamma) avec int1 - int2 = n L / 2")
    leg_length: float = Field(..., ge=0, description="Longueur totale des jambes verticales")
    legs_consistent: bool = Field(..., description="|L - jambes| <= |gamma|/n")
    support: List[int] = Field(default_factory=list, description="Arêtes ayant une extrémité sur la boucle")
    has_e2_jump: bool
    is_external: bool
    encloses_origin: bool = Field(..., description="(0, 0) sur la boucle ou à l'intérieur")


class BoundReport(BaseModel):
    """Bornes explicites de l'argument de Peierls pour un spin S"""
    S: float
    q: float
    series_convergent: bool
    peierls_bound: Optional[float] = None
    k5_term: Optional[float] = None
    k6_term: Optional[float] = None
    tail_term: Optional[float] = None
    c_of_S: Optional[float] = None
    eta_min: Optional[float] = None

    @model_validator(mode="after")
    def check_invariants(self) -> "BoundReport":
        if self.series_convergent and self.peierls_bound is not None and self.peierls_bound < 0:
            raise ValueError("La borne de Peierls doit être positive")
        if self.c_of_S is not None and self.c_of_S > 1:
            raise ValueError("c(S) ne peut dépasser 1")
        return self


class ErrorReport(BaseModel):
    """Analyse d'erreur par blocs (binning)"""
    n_samples: int
    mean: float
    naive_error: float = Field(..., ge=0)
    error: float = Field(..., ge=0, description="Valeur du plateau")
    tau_int: float = Field(..., ge=0)
    bin_sizes: List[int]
    errors: List[float]
    converged: bool


# ============ Schémas Simulation ============

class SamplerParams(BaseModel):
    """Paramètres d'une chaîne de Markov"""
    twice_S: int = Field(..., ge=1)
    ell: int = Field(..., ge=1)
    beta: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    n_sweeps: int = Field(..., ge=1)
    n_burnin: int = Field(0, ge=0)
    measure_every: int = Field(1, ge=1)
    seed: int = Field(..., ge=0, lt=2**64)
    p_insert: float = Field(0.5, gt=0, lt=1, description="Probabilité de proposer une insertion")

    @model_validator(mode="after")
    def check_sweeps(self) -> "SamplerParams":
        if self.n_sweeps <= self.n_burnin:
            raise ValueError("n_sweeps doit être strictement supérieur à n_burnin")
        return self

    @property
    def p_delete(self) -> float:
        return 1.0 - self.p_insert

    @property
    def q(self) -> int:
        return self.twice_S + 1


class ObservableRequest(BaseModel):
    """Observables à mesurer pendant une simulation"""
    pairs: List[Tuple[int, int]] = Field(default_factory=list, description="Paires (x, y) pour x <-> y")
    dimer_profile: bool = True
    surround_sites: List[int] = Field(default_factory=list, description="Sites x pour E_x")
    omega_alpha: bool = False
    keep_traces: bool = False


class ObservableEstimate(BaseModel):
    """Estimation Monte Carlo d'une observable"""
    name: str
    mean: float
    error: float = Field(..., ge=0)
    tau_int: float = Field(..., ge=0)
    n_samples: int = Field(..., ge=0)


class RunResult(BaseModel):
    """Estimations d'une simulation avec provenance complète"""
    estimates: Dict[str, ObservableEstimate] = Field(default_factory=dict)
    derived: Dict[str, Any] = Field(default_factory=dict)
    acceptance: Dict[str, float] = Field(default_factory=dict)
    n_measurements: int = 0
    provenance: Dict[str, Any] = Field(..., description="Paramètres, graine et version du code")
    traces: Optional[Dict[str, List[float]]] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def check_provenance(self) -> "RunResult":
        params = self.provenance.get("params") or {}
        if "seed" not in params:
            raise ValueError("Un résultat sans graine est invalide")
        return self


# ============ Schémas Configuration de run ============

Command = Literal["simulate", "enumerate", "ed", "contours", "bounds", "verify"]


class RunConfig(BaseModel):
    """Configuration plate d'une expérience (format clé = valeur)"""
    command: Command = "simulate"
    twice_S: int = Field(1, ge=1)
    ell: int = Field(1, ge=1)
    beta: int = Field(1, ge=1)
    n: int = Field(4, ge=1)
    n_sweeps: int = Field(20000, ge=1)
    n_burnin: int = Field(2000, ge=0)
    measure_every: int = Field(1, ge=1)
    seed: int = Field(20170101, ge=0, lt=2**64)
    n_chains: int = Field(1, ge=1)
    p_insert: float = Field(0.5, gt=0, lt=1)
    pairs: List[Tuple[int, int]] = Field(default_factory=list)
    surround_sites: List[int] = Field(default_factory=list)
    omega_alpha: bool = False
    beta_q: Optional[float] = Field(None, ge=0)
    S_grid: List[float] = Field(default_factory=list)
    config_file: Optional[str] = Field(None, description="Fichier de barres pour `contours`")
    full: bool = False
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["json", "csv"])

    def model_spin(self) -> SpinWeight:
        return SpinWeight(twice_S=self.twice_S)

    def sampler_params(self, seed: Optional[int] = None) -> SamplerParams:
        return SamplerParams(
            twice_S=self.twice_S,
            ell=self.ell,
            beta=self.beta,
            n=self.n,
            n_sweeps=self.n_sweeps,
            n_burnin=self.n_burnin,
            measure_every=self.measure_every,
            seed=self.seed if seed is None else seed,
            p_insert=self.p_insert,
        )


# ============ Schémas Vérification ============

class VerificationCheck(BaseModel):
    """Résultat d'une vérification nommée"""
    name: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: Dict[str, Any] = Field(default_factory=dict)
    runtime_s: float = 0.0


class VerificationReport(BaseModel):
    """Rapport de la suite de vérification"""
    passed: bool
    checks: List[VerificationCheck]
    failures: List[str] = Field(default_factory=list)
    provenance: Dict[str, Any] = Field(default_factory=dict)
    timestamp: datetime = Field(default_factory=datetime.now)


# ============ Schémas API ============

class ConfigurationPayload(BaseModel):
    """Modèle et configuration soumis à l'API"""
    ell: int = Field(..., ge=1)
    beta: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    bars: List[Tuple[int, int]] = Field(default_factory=list, description="Couples (edge, slot)")


class EnumerationRequest(BaseModel):
    """Demande d'évaluation exacte"""
    twice_S: int = Field(1, ge=1)
    ell: int = Field(1, ge=1)
    beta: int = Field(1, ge=1)
    n: int = Field(4, ge=1)
    pairs: List[Tuple[int, int]] = Field(default_factory=list)
    method: Literal["enumeration", "transfer-matrix"] = "enumeration"


class SimulationRequest(BaseModel):
    """Demande de simulation synchrone (petites tailles)"""
    params: SamplerParams
    observables: ObservableRequest = Field(default_factory=ObservableRequest)


class RunRecordResponse(BaseModel):
    """Schéma de réponse pour une exécution archivée"""
    model_config = ConfigDict(from_attributes=True)

    id: int
    command: str
    seed: Optional[int]
    config: Dict[str, Any]
    result: Dict[str, Any]
    created_at: datetime


class ErrorResponse(BaseModel):
    """Schéma de réponse en cas d'erreur"""
    error: str = Field(..., description="Type d'erreur")
    message: str = Field(..., description="Message d'erreur détaillé")
    timestamp: datetime = Field(default_factory=datetime.now)
