"""Branch-and-prune enclosure of all stationary points in a box"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass
from functools import reduce
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from . import interval as iv
from .interval import Interval, Box, ONE, ZERO
from .expressions import GradientSystem, eval_interval
from .errors import ExtremaError, DimensionMismatch, UnboundedBox, BudgetExhausted
from .utils import UnionFind

logger = logging.getLogger(__name__)

Status = Literal['verified-unique', 'possible']
Flag = Literal['complete', 'truncated']

# Krawczyk iterations used to tighten a box known to hold a unique zero
TIGHTEN_STEPS = 16
# Surviving boxes beyond this share of the budget suggest a continuum
CONTINUUM_SHARE = 0.1


@dataclass(frozen=True)
class SolveConfig:
    """Configuration of `solve_stationary`.

    Arguments:
        tol_x: Leaves are refined until every axis is at most `tol_x / 2` wide,
            so that a cluster of neighbouring leaves stays within `tol_x`.
        max_boxes: Number of boxes the solver may process.
        use_newton_contraction: Whether to apply the Krawczyk operator to each
            box, which both prunes and proves uniqueness.
    """
    tol_x: float = 1e-6
    max_boxes: int = 200000
    use_newton_contraction: bool = True

    def __post_init__(self):
        if not (self.tol_x > 0 and np.isfinite(self.tol_x)):
            raise ValueError(f'tol_x must be a positive finite number, got {self.tol_x!r}.')
        if self.max_boxes < 1:
            raise ValueError(f'max_boxes must be at least 1, got {self.max_boxes!r}.')


@dataclass(frozen=True)
class Candidate:
    """Verified enclosure of one or more stationary points.

    `status` is `'verified-unique'` when the box provably contains exactly one
    stationary point, `'possible'` when it may contain any number of them
    (including none).
    """
    enclosure: Box
    status: Status
    value: Interval

    @property
    def dim(self) -> int:
        return self.enclosure.dim

    def midpoint(self) -> List[float]:
        return self.enclosure.midpoint()


@dataclass(frozen=True)
class Completeness:
    """Outcome of a solve.

    With `flag == 'complete'` every stationary point in the domain lies in
    one of the returned candidates.
    """
    flag: Flag
    boxes_processed: int
    diagnostic: Optional[str] = None

    @property
    def complete(self) -> bool:
        return self.flag == 'complete'


# Interval Newton (Krawczyk) step
def krawczyk(system: GradientSystem, box: Box) -> Optional[Tuple[Box, bool]]:
    """One Krawczyk step for `grad f = 0` on `box`.

    Computes `K = m - Y g(m) + (I - Y J(X)) (X - m)` with `Y` the inverse of
    the Hessian at the midpoint `m`.
    Returns:
        `None` if `box` provably holds no stationary point, otherwise the pair
        `(box & K, K inside interior of box)`. The flag proves that `box`
        holds exactly one stationary point.
    """
    n = box.dim
    m = box.midpoint()
    try:
        y = np.linalg.inv(system.hessian_real(m))
        gm = system.gradient_intervals(Box.from_point(m))
        jx = system.hessian_intervals(box)
    except (np.linalg.LinAlgError, ExtremaError, OverflowError):
        return box, False
    if not np.all(np.isfinite(y)):
        return box, False

    yi = [[Interval(float(y[i, j])) for j in range(n)] for i in range(n)]
    dx = [iv.sub(box[j], Interval(m[j])) for j in range(n)]
    coords = []
    for i in range(n):
        acc = Interval(m[i])
        for j in range(n):
            acc = acc - yi[i][j] * gm[j]
        for j in range(n):
            row = ONE if i == j else ZERO
            for l in range(n):
                row = row - yi[i][l] * jx[l][j]
            acc = acc + row * dx[j]
        coords.append(acc)
    k = Box(coords)
    contracted = box.intersection(k)
    if contracted is None:
        return None
    return contracted, k.interior(box)


def _tighten(system: GradientSystem, box: Box) -> Box:
    for _ in range(TIGHTEN_STEPS):
        step = krawczyk(system, box)
        if step is None or step[0] == box:
            break
        box = step[0]
    return box


def _inflate(box: Box) -> Box:
    coords = []
    for c in box:
        r = 0.1 * iv.width(c) + 1e-12 * max(1.0, abs(c.lo), abs(c.hi))
        coords.append(Interval(c.lo - r, c.hi + r))
    return Box(coords)


def _verify_cluster(system: GradientSystem, hull: Box) -> Tuple[Optional[Box], Status]:
    """Tries to prove that `hull` holds exactly one stationary point.

    Returns the (possibly contracted) enclosure and its status, or `None` when
    the Krawczyk operator shows the cluster holds no stationary point.
    """
    inflated = _inflate(hull)
    step = krawczyk(system, inflated)
    if step is None:
        return None, 'possible'
    box, unique = step
    if not unique:
        return hull.intersection(box), 'possible'
    box = _tighten(system, box)
    if box.subset(hull):
        return box, 'verified-unique'
    inside = box.intersection(hull)
    if inside is None:
        return None, 'possible'
    return hull, 'possible'


# Clustering
def _canonical_key(box: Box):
    return tuple(c.lo for c in box) + tuple(c.hi for c in box)


def cluster_boxes(boxes: Sequence[Box]) -> List[List[Box]]:
    """Groups boxes that overlap or share a face (within one ulp) into clusters.

    Boxes are sorted canonically first, so the result does not depend on the
    order in which they were produced.
    """
    boxes = sorted(boxes, key=_canonical_key)
    if not boxes:
        return []
    lo = np.array([[c.lo for c in b] for b in boxes])
    hi = np.array([[c.hi for c in b] for b in boxes])
    uf = UnionFind(len(boxes))
    for i in range(len(boxes) - 1):
        upper = np.nextafter(np.minimum(hi[i], hi[i + 1:]), np.inf)
        touching = np.all(np.maximum(lo[i], lo[i + 1:]) <= upper, axis=1)
        for j in np.nonzero(touching)[0]:
            uf.merge(i, i + 1 + int(j))
    return [[boxes[k] for k in members] for members in uf.components()]


def split_cluster(system: GradientSystem, members: Sequence[Box],
                  use_newton_contraction: bool = True) -> List[List[Box]]:
    """Bisects every member of a cluster once and regroups the halves that
    may still hold a stationary point.

    Returns the new clusters, possibly none when every half is pruned.
    """
    kept = []
    for box in members:
        axis = box.widest_axis()
        halves = box.bisect(axis) if box.can_bisect(axis) else (box,)
        for half in halves:
            if any(not g.lo <= 0 <= g.hi for g in system.gradient_intervals(half)):
                continue
            if use_newton_contraction and krawczyk(system, half) is None:
                continue
            kept.append(half)
    return cluster_boxes(kept)


# Solver
def solve_stationary(
    system: GradientSystem,
    domain: Box,
    cfg: SolveConfig = None
) -> Tuple[List[Candidate], Completeness]:
    """Encloses every solution of `grad f = 0` inside `domain`.

    Boxes are processed first in, first out. A box is discarded when the
    interval value of some gradient component excludes 0 (or when the Krawczyk
    operator proves it empty); otherwise it is bisected along its widest axis
    until it is at most `tol_x / 2` wide. Surviving leaves that touch are
    merged into one candidate each. A cluster wider than `tol_x` is bisected
    once more before it becomes a candidate.

    Arguments:
        system: Gradient system of `f`.
        domain: Bounded search box.
        cfg: `SolveConfig`, defaults when `None`.
    Returns:
        Candidates sorted by the lexicographic order of their midpoints, and
        the `Completeness` of the search. When the box budget runs out a
        `BudgetExhausted` warning is issued and all unfinished boxes are
        returned as `'possible'` candidates.
    """
    cfg = cfg or SolveConfig()
    if domain.dim != system.dim:
        raise DimensionMismatch(f'Domain of dimension {domain.dim} for a function of {system.dim} variables.')
    if not domain.is_bounded():
        raise UnboundedBox(f'Domain {domain} must be bounded.')

    half_tol = cfg.tol_x / 2
    queue = deque([domain])
    leaves: List[Box] = []
    unique: List[Box] = []
    processed = 0

    while queue:
        if processed >= cfg.max_boxes:
            break
        box = queue.popleft()
        processed += 1
        if any(not g.lo <= 0 <= g.hi for g in system.gradient_intervals(box)):
            continue
        if cfg.use_newton_contraction:
            step = krawczyk(system, box)
            if step is None:
                continue
            box, is_unique = step
            if is_unique:
                box = _tighten(system, box)
                if box.max_width() <= half_tol:
                    unique.append(box)
                    continue
        axis = box.widest_axis()
        if box.max_width() <= half_tol or not box.can_bisect(axis):
            leaves.append(box)
        else:
            queue.extend(box.bisect(axis))

    diagnostic = None
    flag = 'complete'
    if queue:
        flag = 'truncated'
        survivors = len(queue) + len(leaves) + len(unique)
        if survivors > CONTINUUM_SHARE * cfg.max_boxes:
            diagnostic = (
                f'{survivors} boxes survive after {processed} steps without shrinking to tol_x; '
                'the stationary points may form a continuum.'
            )
        warnings.warn(
            f'Box budget of {cfg.max_boxes} exhausted with {len(queue)} boxes left; '
            'the candidate list may be incomplete.', BudgetExhausted)
        leaves.extend(queue)

    unique_set = set(unique)
    clusters = []
    for members in cluster_boxes(leaves + unique):
        # one more bisection pass for clusters grown past tol_x
        if flag == 'complete' and reduce(Box.hull, members).max_width() > cfg.tol_x:
            clusters.extend(split_cluster(system, members, cfg.use_newton_contraction))
        else:
            clusters.append(members)

    candidates = []
    for members in clusters:
        hull = reduce(Box.hull, members)
        if len(members) == 1 and members[0] in unique_set:
            enclosure, status = hull, 'verified-unique'
        elif cfg.use_newton_contraction and flag == 'complete':
            enclosure, status = _verify_cluster(system, hull)
            if enclosure is None:
                logger.debug('Dropped cluster %s without stationary points', hull)
                continue
        else:
            enclosure, status = hull, 'possible'
        if flag == 'complete' and enclosure.max_width() > cfg.tol_x:
            warnings.warn(
                f'Candidate {enclosure} is wider than tol_x={cfg.tol_x!r}; '
                'it may hold several stationary points.')
        candidates.append(Candidate(enclosure, status, eval_interval(system.f, enclosure)))

    candidates.sort(key=lambda c: tuple(c.midpoint()))
    logger.info(
        'Found %d candidates (%d verified unique) after %d boxes, %s',
        len(candidates), sum(c.status == 'verified-unique' for c in candidates), processed, flag)
    return candidates, Completeness(flag, processed, diagnostic)


def separation_distances(cands: Sequence[Union[Candidate, Box]], domain: Box = None) -> List[float]:
    """Distance `D_k` from each candidate to its nearest neighbour.

    Distances are taken in the infinity norm between midpoints and rounded
    downward. A lone candidate gets the distance from its midpoint to the
    nearest face of `domain` instead.
    """
    boxes = [c.enclosure if isinstance(c, Candidate) else c for c in cands]
    if not boxes:
        return []
    if len(boxes) == 1:
        if domain is None:
            raise ValueError('A single candidate needs the domain to define its separation.')
        return [boxes[0].margin_to(domain)]
    dists = []
    for k, bk in enumerate(boxes):
        dists.append(min(
            iv.distance(bk, bj)
            for j, bj in enumerate(boxes) if j != k
        ))
    return dists
