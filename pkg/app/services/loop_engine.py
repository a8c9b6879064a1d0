"""
Moteur de boucles: décomposition d'une configuration de barres en boucles,
comptage exact et incrémental, requêtes de connectivité
"""
import csv
import io
from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from app.exceptions import InvalidConfigurationError, SlotCollisionError
from app.schemas import Bar, BarConfiguration, ChainGeometry, TimeGrid
from app.services.chain_model import require_valid
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


class UnionFind:
    """
    Union-find sur les entiers 0..size-1, union par rang et compression de chemin

    Attributes:
        n_clusters: Nombre de composantes courantes
    """

    def __init__(self, size: int):
        self._leader = list(range(size))
        self._rank = [0] * size
        self.n_clusters = size

    def __repr__(self):
        return f"UnionFind: {self.n_clusters} composante(s)"

    def find(self, s: int) -> int:
        root = s
        while self._leader[root] != root:
            root = self._leader[root]
        while self._leader[s] != root:
            self._leader[s], s = root, self._leader[s]
        return root

    def union(self, a: int, b: int) -> None:
        s1, s2 = self.find(a), self.find(b)
        if s1 == s2:
            return
        r1, r2 = self._rank[s1], self._rank[s2]
        if r2 > r1:
            s1, s2 = s2, s1
        elif r1 == r2:
            self._rank[s1] += 1
        self._leader[s2] = s1
        self.n_clusters -= 1


@dataclass(frozen=True)
class Segment:
    """Arc vertical d'un site entre deux barres incidentes (lower/upper None: cercle complet)"""
    id: int
    site: int
    lower: Optional[int]
    upper: Optional[int]
    length: int

    @property
    def full_circle(self) -> bool:
        return self.lower is None

    def contains(self, t: float) -> bool:
        """t doit être un instant sans barre (0 ou un milieu de créneaux)"""
        if self.lower is None:
            return True
        if self.lower < self.upper:
            return self.lower < t < self.upper
        # Segment qui traverse l'identification -beta = beta
        return t > self.lower or t < self.upper


@dataclass(frozen=True)
class Loop:
    """Boucle: composante connexe de segments"""
    id: int
    segments: Tuple[Segment, ...]
    site_support: FrozenSet[int]
    winding: int
    n_bars: int
    n_jumps: int
    vertical_extent: int  # en créneaux (unités de 1/n)
    bar_slots: FrozenSet[int]

    @property
    def site_min(self) -> int:
        return min(self.site_support)

    @property
    def site_max(self) -> int:
        return max(self.site_support)

    @property
    def is_short(self) -> bool:
        return len(self.site_support) <= 2


class LoopSet:
    """
    Décomposition d'une configuration en boucles

    Construit à partir d'un dictionnaire slot -> site gauche de l'arête,
    une configuration valide étant supposée.
    """

    def __init__(self, geometry: ChainGeometry, grid: TimeGrid, by_slot: Dict[int, int]):
        self.geometry = geometry
        self.grid = grid
        self.by_slot = dict(by_slot)
        circumference = grid.circumference

        self.site_slots: Dict[int, List[int]] = {x: [] for x in geometry.sites}
        for t in sorted(self.by_slot):
            edge = self.by_slot[t]
            self.site_slots[edge].append(t)
            self.site_slots[edge + 1].append(t)
        self._slot_index = {
            x: {t: j for j, t in enumerate(slots)} for x, slots in self.site_slots.items()
        }

        self.segments: List[Segment] = []
        self._offset: Dict[int, int] = {}
        for x in geometry.sites:
            self._offset[x] = len(self.segments)
            slots = self.site_slots[x]
            m = len(slots)
            if m == 0:
                self.segments.append(Segment(len(self.segments), x, None, None, circumference))
                continue
            for j in range(m):
                lo, hi = slots[j], slots[(j + 1) % m]
                length = (hi - lo) % circumference or circumference
                self.segments.append(Segment(len(self.segments), x, lo, hi, length))

        # Deux unions par barre: dessous avec dessous, dessus avec dessus
        uf = UnionFind(len(self.segments))
        for t, edge in self.by_slot.items():
            uf.union(self._below(edge, t), self._below(edge + 1, t))
            uf.union(self._above(edge, t), self._above(edge + 1, t))

        components: Dict[int, List[int]] = {}
        for seg in self.segments:
            components.setdefault(uf.find(seg.id), []).append(seg.id)

        self.segment_loop: List[int] = [0] * len(self.segments)
        self.loops: List[Loop] = []
        for loop_id, members in enumerate(sorted(components.values(), key=min)):
            for s in members:
                self.segment_loop[s] = loop_id
            self.loops.append(self._walk(loop_id, min(members), members))

        self._check_invariants()

    # ---------- indexation des segments ----------

    def _above(self, x: int, t: int) -> int:
        return self._offset[x] + self._slot_index[x][t]

    def _below(self, x: int, t: int) -> int:
        m = len(self.site_slots[x])
        return self._offset[x] + (self._slot_index[x][t] - 1) % m

    def segment_at(self, x: int, t: float) -> Segment:
        """Segment du site x contenant l'instant t (t ne doit pas être un créneau occupé sur x)"""
        slots = self.site_slots[x]
        if not slots:
            return self.segments[self._offset[x]]
        j = (bisect_left(slots, t) - 1) % len(slots)
        return self.segments[self._offset[x] + j]

    def loop_at(self, x: int, t: float = 0) -> int:
        return self.segment_loop[self.segment_at(x, t).id]

    # ---------- parcours ----------

    def _walk(self, loop_id: int, start: int, members: List[int]) -> Loop:
        """
        Parcourt la boucle depuis son premier segment en montant; le relevé
        dans le revêtement universel du cercle donne l'enroulement
        """
        circumference = self.grid.circumference
        displacement = 0
        n_jumps = 0
        bars = set()
        seg_id = start
        going_up = True

        for _ in range(2 * len(members) + 1):
            seg = self.segments[seg_id]
            if seg.full_circle:
                displacement += circumference
                break
            if going_up:
                displacement += seg.length
                t = seg.upper
            else:
                displacement -= seg.length
                t = seg.lower
            edge = self.by_slot[t]
            partner = edge + 1 if edge == seg.site else edge
            n_jumps += 1
            bars.add(t)
            # Le sens de parcours s'inverse à chaque saut
            going_up = not going_up
            seg_id = self._above(partner, t) if going_up else self._below(partner, t)
            if seg_id == start and going_up:
                break
        else:
            raise RuntimeError(f"Parcours de la boucle {loop_id} non refermé")

        if displacement % circumference:
            raise RuntimeError(f"Déplacement {displacement} non multiple de {circumference}")

        segments = tuple(self.segments[s] for s in sorted(members))
        return Loop(
            id=loop_id,
            segments=segments,
            site_support=frozenset(s.site for s in segments),
            winding=displacement // circumference,
            n_bars=len(bars),
            n_jumps=n_jumps,
            vertical_extent=sum(s.length for s in segments),
            bar_slots=frozenset(bars),
        )

    def _check_invariants(self) -> None:
        n_bars = len(self.by_slot)
        assert 1 <= self.total_loops <= self.geometry.n_sites + n_bars, "Borne 1 <= L <= 2ell + |omega| violée"
        total = sum(loop.vertical_extent for loop in self.loops)
        assert total == self.geometry.n_sites * self.grid.circumference, "Conservation de l'extension verticale violée"

    # ---------- requêtes ----------

    @property
    def total_loops(self) -> int:
        return len(self.loops)

    @property
    def total_vertical_extent(self) -> float:
        """Extension verticale totale en unités de temps (4 beta ell)"""
        return sum(loop.vertical_extent for loop in self.loops) / self.grid.n

    def connected(self, x: int, y: int) -> bool:
        return self.loop_at(x, 0) == self.loop_at(y, 0)

    def delta_insert(self, edge: int, t: int) -> int:
        """+1 si les deux extrémités de la nouvelle barre sont sur la même boucle, -1 sinon"""
        if t in self.by_slot:
            raise SlotCollisionError(f"Créneau {t} déjà occupé par l'arête {self.by_slot[t]}")
        return 1 if self.loop_at(edge, t) == self.loop_at(edge + 1, t) else -1

    def delta_delete(self, t: int) -> int:
        """+1 si l'arc sous la barre et l'arc au-dessus appartiennent à la même boucle, -1 sinon"""
        edge = self.by_slot[t]
        same = self.segment_loop[self._below(edge, t)] == self.segment_loop[self._above(edge, t)]
        return 1 if same else -1

    def winding_loops(self) -> List[Loop]:
        return [loop for loop in self.loops if loop.winding != 0]

    def strands_left_of(self, loop_id: int, x: int, t: float) -> int:
        """Nombre de brins verticaux de la boucle aux sites < x couvrant l'instant t"""
        count = 0
        for seg in self.loops[loop_id].segments:
            if seg.site < x and seg.contains(t):
                count += 1
        return count


class LoopTracker:
    """
    Barres rangées par site pour les mises à jour de la chaîne de Markov

    Un segment est repéré par (site, créneau de la barre qui le borne par en dessous),
    (site, None) pour un site sans barre. delta_insert et delta_delete parcourent la seule
    boucle concernée: le coût est la longueur de cette boucle, pas celle de la configuration.
    """

    def __init__(self, geometry: ChainGeometry, grid: TimeGrid, by_slot: Optional[Dict[int, int]] = None):
        self.geometry = geometry
        self.grid = grid
        self.by_slot: Dict[int, int] = {}
        self.site_slots: Dict[int, List[int]] = {x: [] for x in geometry.sites}
        for t, edge in (by_slot or {}).items():
            self.add(edge, t)

    def add(self, edge: int, t: int) -> None:
        if t in self.by_slot:
            raise SlotCollisionError(f"Créneau {t} déjà occupé par l'arête {self.by_slot[t]}")
        self.by_slot[t] = edge
        insort(self.site_slots[edge], t)
        insort(self.site_slots[edge + 1], t)

    def remove(self, t: int) -> None:
        edge = self.by_slot.pop(t)
        for x in (edge, edge + 1):
            slots = self.site_slots[x]
            del slots[bisect_left(slots, t)]

    # ---------- segments ----------

    def _segment_containing(self, x: int, t: float) -> Tuple[int, Optional[int]]:
        slots = self.site_slots[x]
        if not slots:
            return x, None
        return x, slots[bisect_left(slots, t) - 1]

    def _upper_end(self, x: int, lower: int) -> int:
        slots = self.site_slots[x]
        return slots[(bisect_left(slots, lower) + 1) % len(slots)]

    def _partner(self, x: int, t: int) -> int:
        edge = self.by_slot[t]
        return edge + 1 if edge == x else edge

    def same_loop(self, start: Tuple[int, Optional[int]], target: Tuple[int, Optional[int]]) -> bool:
        """Parcourt la boucle du segment `start` (en montant) et cherche le segment `target`"""
        if start == target:
            return True
        x, lower = start
        if lower is None:
            return False
        going_up = True
        for _ in range(2 * (len(self.by_slot) + self.geometry.n_sites) + 2):
            if going_up:
                t = self._upper_end(x, lower)
                x = self._partner(x, t)
                slots = self.site_slots[x]
                lower = slots[bisect_left(slots, t) - 1]
            else:
                t = lower
                x = self._partner(x, t)
                lower = t
            # Le sens de parcours s'inverse à chaque saut
            going_up = not going_up
            if (x, lower) == target:
                return True
            if (x, lower) == start and going_up:
                return False
        raise RuntimeError(f"Parcours depuis {start} non refermé")

    # ---------- variations de L ----------

    def delta_insert(self, edge: int, t: int) -> int:
        """+1 si les deux extrémités de la nouvelle barre sont sur la même boucle, -1 sinon"""
        if t in self.by_slot:
            raise SlotCollisionError(f"Créneau {t} déjà occupé par l'arête {self.by_slot[t]}")
        same = self.same_loop(self._segment_containing(edge, t), self._segment_containing(edge + 1, t))
        return 1 if same else -1

    def delta_delete(self, t: int) -> int:
        """+1 si l'arc sous la barre et l'arc au-dessus appartiennent à la même boucle, -1 sinon"""
        edge = self.by_slot[t]
        slots = self.site_slots[edge]
        below = (edge, slots[bisect_left(slots, t) - 1])
        return 1 if self.same_loop((edge, t), below) else -1


# ============ Fonctions du module ============

def trace_loops(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
    validate: bool = True,
) -> LoopSet:
    """
    Décompose une configuration en boucles

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        config: Configuration de barres
        validate: Valider la configuration avant le tracé

    Returns:
        LoopSet
    """
    if validate:
        require_valid(geometry, grid, config)
    return LoopSet(geometry, grid, config.by_slot())


def loop_count(geometry: ChainGeometry, grid: TimeGrid, config: BarConfiguration) -> int:
    return trace_loops(geometry, grid, config).total_loops


def delta_loops(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
    new_bar: Bar,
    loop_set: Optional[LoopSet] = None,
) -> int:
    """
    Variation du nombre de boucles à l'insertion d'une barre, sans retracer

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        config: Configuration courante
        new_bar: Barre à insérer
        loop_set: Décomposition déjà calculée de `config` (cache)

    Returns:
        +1 ou -1
    """
    if any(b.slot == new_bar.slot for b in config.bars):
        raise SlotCollisionError(f"Créneau {new_bar.slot} déjà occupé")
    if not grid.has_slot(new_bar.slot) or not geometry.has_edge(new_bar.edge):
        raise InvalidConfigurationError([f"Barre hors de la grille: {new_bar.to_line()}"])
    if loop_set is None:
        loop_set = trace_loops(geometry, grid, config)
    return loop_set.delta_insert(new_bar.edge, new_bar.slot)


def connected(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
    x: int,
    y: int,
) -> bool:
    """Vrai si (x, 0) et (y, 0) sont sur la même boucle"""
    return trace_loops(geometry, grid, config).connected(x, y)


def on_loop(loop_set: LoopSet, loop: Loop, site: int, t: float = 0) -> bool:
    """Vrai si le point (site, t) appartient à la boucle"""
    return loop_set.loop_at(site, t) == loop.id


def loops_to_csv(loop_set: LoopSet) -> str:
    """Export de débogage: une ligne par boucle"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", "winding", "n_bars", "site_min", "site_max", "vertical_extent"])
    for loop in loop_set.loops:
        writer.writerow([
            loop.id, loop.winding, loop.n_bars, loop.site_min, loop.site_max, loop.vertical_extent,
        ])
    return buffer.getvalue()
