"""Classification of stationary points by probing the surface of a cube around them"""

import math
import itertools
import logging
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import interval as iv
from .interval import Interval, Box
from .expressions import Expression, GradientSystem, build_gradient_system, eval_interval
from .solver import Candidate, separation_distances
from .errors import ExtremaError, NonPositiveEpsilon, ProbeOutsideDomain, NonSeparatedCandidate

logger = logging.getLogger(__name__)

Verdict = Literal['Minimum', 'Maximum', 'Saddle', 'Inflection', 'Undecided']
VERDICTS = ('Minimum', 'Maximum', 'Saddle', 'Inflection', 'Undecided')


@dataclass(frozen=True)
class ProbeConfig:
    """Configuration of the surface probe.

    Arguments:
        epsilon: Half size of the probe cube. `None` uses
            `min(D_k / 2, distance to the domain boundary)`.
        retry_limit: Number of retries with a smaller cube after an
            undecided attempt.
        epsilon_floor: Smallest admissible `epsilon`. `None` uses half the
            width of the candidate enclosure.
        refine: Whether undecided attempts split every face into sub-faces
            bounded with a second-order centered form.
        face_splits: Number of parts per axis when splitting a face.
        max_pieces: Upper bound on the total number of sub-faces.
    """
    epsilon: Optional[float] = None
    retry_limit: int = 4
    epsilon_floor: Optional[float] = None
    refine: bool = True
    face_splits: int = 4
    max_pieces: int = 512

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise NonPositiveEpsilon(f'epsilon must be positive, got {self.epsilon!r}.')
        if self.epsilon_floor is not None and not self.epsilon_floor >= 0:
            raise ValueError(f'epsilon_floor must be non-negative, got {self.epsilon_floor!r}.')
        if self.retry_limit < 0:
            raise ValueError(f'retry_limit must be non-negative, got {self.retry_limit!r}.')
        if self.face_splits < 2:
            raise ValueError(f'face_splits must be at least 2, got {self.face_splits!r}.')
        if self.max_pieces < 1:
            raise ValueError(f'max_pieces must be at least 1, got {self.max_pieces!r}.')


@dataclass(frozen=True)
class ClassificationEvidence:
    """Interval evidence behind a verdict.

    `faces` are ordered `F1+, F1-, F2+, F2-, ...`. `n_less` counts faces whose
    range lies strictly above the reference `V` (V < F), `n_greater` faces
    strictly below it, `n_intersect` the rest, so the three add up to `2n`.
    `pieces*` describe the sub-face refinement and are 0 when it did not run.
    """
    reference: Interval
    faces: Tuple[Interval, ...]
    n_intersect: int
    n_greater: int
    n_less: int
    epsilon_used: float
    retries: int
    pieces: int = 0
    pieces_greater: int = 0
    pieces_less: int = 0


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    evidence: Optional[ClassificationEvidence] = None
    error: Optional[str] = None
    evaluations: int = 0
    refine_evaluations: int = 0

    @property
    def decided(self) -> bool:
        return self.verdict != 'Undecided'


# Probe construction
def build_probe_boxes(center: Sequence[float], epsilon: float, n: int = None) -> List[Box]:
    """Builds the 2n thin boxes covering the surface of the cube `center +- epsilon`.

    Box `2j` is the face `x_j = center_j + epsilon`, box `2j + 1` the face
    `x_j = center_j - epsilon`. Each face is degenerate along `j` (up to outward
    rounding of `center_j +- epsilon`) and spans `[center_i - epsilon,
    center_i + epsilon]` along every other axis.
    """
    n = len(center) if n is None else n
    if len(center) != n:
        raise ValueError(f'Center of dimension {len(center)} for n={n}.')
    if not epsilon > 0:
        raise NonPositiveEpsilon(f'epsilon must be positive, got {epsilon!r}.')
    if not all(math.isfinite(c) for c in center):
        raise ValueError(f'Center {center} must be finite.')
    eps = Interval(float(epsilon))
    upper = [Interval(float(c)) + eps for c in center]
    lower = [Interval(float(c)) - eps for c in center]
    spans = [Interval(lo.lo, hi.hi) for lo, hi in zip(lower, upper)]
    boxes = []
    for j in range(n):
        for face in (upper[j], lower[j]):
            coords = list(spans)
            coords[j] = face
            boxes.append(Box(coords))
    return boxes


# Decision table
def count_relations(reference: Interval, faces: Sequence[Interval]) -> Tuple[int, int, int]:
    """Returns `(n_intersect, n_greater, n_less)` of the faces against `reference`."""
    n_greater = n_less = n_intersect = 0
    for face in faces:
        if iv.strictly_less(reference, face):
            n_less += 1
        elif iv.strictly_less(face, reference):
            n_greater += 1
        else:
            n_intersect += 1
    return n_intersect, n_greater, n_less


def decide(n_greater: int, n_less: int, total: int, n: int) -> Verdict:
    if n_less == total:
        return 'Minimum'
    if n_greater == total:
        return 'Maximum'
    if n_greater and n_less:
        return 'Inflection' if n == 1 else 'Saddle'
    return 'Undecided'


# Sub-face refinement
def _splits(c: Interval, k: int) -> List[Interval]:
    points = np.linspace(c.lo, c.hi, k + 1)
    points[0], points[-1] = c.lo, c.hi
    points = np.maximum.accumulate(points)
    return [Interval(float(a), float(b)) for a, b in zip(points[:-1], points[1:])]


def _sub_faces(face: Box, axis: int, k: int) -> List[Box]:
    pieces = [[]]
    for i, c in enumerate(face):
        parts = [c] if i == axis else _splits(c, k)
        pieces = [p + [part] for p in pieces for part in parts]
    return [Box(p) for p in pieces]


def centered_form(system: GradientSystem, center: Sequence[float], box: Box) -> Interval:
    """Second-order centered form of `f` over `box` around the point `center`.

    `f(c) + grad f(c) . d + 1/2 d^T H(hull(c, box)) d` with `d = x - c`, every
    term evaluated in interval arithmetic.
    """
    n = system.dim
    point = Box.from_point(center)
    fc = eval_interval(system.f, point)
    gc = system.gradient_intervals(point)
    hh = system.hessian_intervals(box.hull(point))
    d = [box[i] - Interval(float(center[i])) for i in range(n)]
    linear = fc
    for i in range(n):
        linear = linear + gc[i] * d[i]
    quadratic = iv.ZERO
    for i in range(n):
        quadratic = quadratic + Interval(0.5) * hh[i][i] * iv.sqr(d[i])
        for j in range(i + 1, n):
            quadratic = quadratic + hh[i][j] * (d[i] * d[j])
    return linear + quadratic


def _pieces_per_axis(n: int, cfg: ProbeConfig) -> int:
    """Largest split count within `max_pieces`, 0 if even 2 parts are too many."""
    if n == 1:
        return 1 if 2 <= cfg.max_pieces else 0
    k = cfg.face_splits
    while k >= 2 and 2 * n * k ** (n - 1) > cfg.max_pieces:
        k -= 1
    return k if k >= 2 else 0


def _relation(reference: Interval, rng: Interval) -> int:
    """+1 if `rng` lies strictly above `reference`, -1 if strictly below, else 0."""
    if iv.strictly_less(reference, rng):
        return 1
    if iv.strictly_less(rng, reference):
        return -1
    return 0


def _refine(system, center, probes, faces, reference, cfg):
    """Bounds sub-faces of every face against `reference`.

    Faces start out split uniformly; pieces whose range still meets the
    reference are bisected further (first in, first out) until a piece above
    and a piece below the reference are known, none is left, or `max_pieces`
    is reached.
    Returns:
        `(face ranges, (pieces, pieces below, pieces above), evaluations)`,
        `None` if the uniform split alone exceeds `max_pieces`.
    """
    n = system.dim
    k = _pieces_per_axis(n, cfg)
    if not k:
        return None
    evaluations = 0
    leaves = {}
    pending = deque()
    counts = {1: 0, -1: 0, 0: 0}
    ids = itertools.count()

    def add(index, piece):
        nonlocal evaluations
        rng = eval_interval(system.f, piece)
        evaluations += 1
        try:
            tighter = iv.intersection(rng, centered_form(system, center, piece))
            evaluations += 1
        except ExtremaError:
            tighter = iv.EMPTY
        if not tighter.is_empty:
            rng = tighter
        rel = _relation(reference, rng)
        key = next(ids)
        leaves[key] = (index, piece, rng, rel)
        counts[rel] += 1
        if rel == 0:
            pending.append(key)

    for index, probe in enumerate(probes):
        for piece in _sub_faces(probe, index // 2, k):
            add(index, piece)

    while pending and len(leaves) < cfg.max_pieces and not (counts[1] and counts[-1]):
        key = pending.popleft()
        index, piece, _, _ = leaves[key]
        axes = [i for i in range(n) if i != index // 2]
        if not axes:
            continue
        widths = piece.widths()
        axis = max(axes, key=lambda i: (widths[i], -i))
        if not piece.can_bisect(axis):
            continue
        del leaves[key]
        counts[0] -= 1
        for child in piece.bisect(axis):
            add(index, child)

    refined = []
    for index, natural in enumerate(faces):
        hull = iv.EMPTY
        for face_index, _, rng, _ in leaves.values():
            if face_index == index:
                hull = iv.hull(hull, rng)
        face = iv.intersection(hull, natural)
        refined.append(natural if face.is_empty else face)
    return refined, (len(leaves), counts[-1], counts[1]), evaluations


# Classification
def _admissible_epsilon(enclosure: Box, cfg: ProbeConfig, domain: Optional[Box],
                        separation: Optional[float]) -> Tuple[float, float]:
    """Returns `(epsilon, floor)` within the band `[floor, min(D/2, margin)]`."""
    floor = cfg.epsilon_floor
    if floor is None:
        floor = 0.5 * enclosure.max_width()
    margin = enclosure.margin_to(domain) if domain is not None else math.inf
    half_separation = 0.5 * separation if separation is not None else math.inf

    if cfg.epsilon is None:
        if math.isinf(margin) and math.isinf(half_separation):
            raise ValueError('Default epsilon needs the domain or the candidate separation.')
        if margin <= 0:
            raise ProbeOutsideDomain(f'Candidate {enclosure} lies on the domain boundary.')
        epsilon = min(half_separation, margin)
        if margin < half_separation:
            warnings.warn(
                f'epsilon clamped to the domain margin {margin!r} (D/2 = {half_separation!r}).')
    else:
        epsilon = cfg.epsilon
        if epsilon > margin:
            raise ProbeOutsideDomain(
                f'Probe cube of half size {epsilon!r} leaves the domain (margin {margin!r}).')
        if epsilon > half_separation:
            raise NonSeparatedCandidate(
                f'epsilon {epsilon!r} exceeds half the distance {half_separation!r} to the nearest candidate.')
    if epsilon < floor:
        raise NonSeparatedCandidate(
            f'epsilon {epsilon!r} is below half the enclosure width {floor!r}.')
    if not epsilon > 0:
        raise NonPositiveEpsilon(f'epsilon must be positive, got {epsilon!r}.')
    return epsilon, floor


def classify_candidate(
    f: Expression,
    cand: Union[Candidate, Box],
    cfg: ProbeConfig = None,
    domain: Box = None,
    separation: float = None,
    system: GradientSystem = None
) -> Classification:
    """Classifies one candidate by comparing `f` on the surface of a cube around it
    with `f` on the candidate enclosure.

    Arguments:
        f: Function to classify.
        cand: Candidate (or bare enclosure box) of a stationary point.
        cfg: `ProbeConfig`, defaults when `None`.
        domain: Problem domain; the probe cube must stay inside it.
        separation: Distance `D_k` to the nearest other candidate.
        system: Gradient system of `f`, built on demand for the refinement.
    Returns:
        `Classification` whose evidence stems from the last attempt.
    """
    cfg = cfg or ProbeConfig()
    enclosure = cand.enclosure if isinstance(cand, Candidate) else cand
    n = f.dim
    epsilon, floor = _admissible_epsilon(enclosure, cfg, domain, separation)
    center = enclosure.midpoint()

    evaluations = refine_evaluations = 0
    attempts = 0
    while True:
        attempts += 1
        probes = build_probe_boxes(center, epsilon, n)
        reference = eval_interval(f, enclosure)
        faces = [eval_interval(f, b) for b in probes]
        evaluations += 2 * n + 1
        n_intersect, n_greater, n_less = count_relations(reference, faces)
        verdict = decide(n_greater, n_less, 2 * n, n)
        pieces = (0, 0, 0)

        if verdict == 'Undecided' and cfg.refine:
            if system is None:
                system = build_gradient_system(f)
            refined = _refine(system, center, probes, faces, reference, cfg)
            if refined is not None:
                faces, pieces, count = refined
                refine_evaluations += count
                n_intersect, n_greater, n_less = count_relations(reference, faces)
                verdict = decide(pieces[1], pieces[2], pieces[0], n)

        logger.debug(
            'Attempt %d at %s with epsilon=%r: N0=%d N>=%d N<=%d -> %s',
            attempts, center, epsilon, n_intersect, n_greater, n_less, verdict)
        if verdict != 'Undecided' or attempts > cfg.retry_limit:
            break
        shrunk = 0.5 * (epsilon + floor)
        if shrunk < floor or shrunk >= epsilon or not shrunk > 0:
            break
        epsilon = shrunk

    evidence = ClassificationEvidence(
        reference=reference,
        faces=tuple(faces),
        n_intersect=n_intersect,
        n_greater=n_greater,
        n_less=n_less,
        epsilon_used=epsilon,
        retries=attempts - 1,
        pieces=pieces[0],
        pieces_greater=pieces[1],
        pieces_less=pieces[2],
    )
    return Classification(verdict, evidence, None, evaluations, refine_evaluations)


def classify_all(
    f: Expression,
    cands: Sequence[Union[Candidate, Box]],
    domain: Box = None,
    cfg: ProbeConfig = None,
    overrides: Mapping[int, float] = None,
    n_jobs: int = 1
) -> List[Classification]:
    """Classifies every candidate independently.

    Arguments:
        f: Function to classify.
        cands: Candidates, pairwise separated.
        domain: Problem domain; gives the separation of a lone candidate and
            keeps every probe cube inside.
        cfg: Shared `ProbeConfig`.
        overrides: Map from candidate index (0-based) to its `epsilon`.
        n_jobs: Number of worker threads.
    Returns:
        One `Classification` per candidate, in input order. Errors of a single
        candidate are reported in its entry (`error` set, verdict
        `'Undecided'`) and never abort the batch.
    """
    cfg = cfg or ProbeConfig()
    overrides = overrides or {}
    if not cands:
        return []
    boxes = [c.enclosure if isinstance(c, Candidate) else c for c in cands]
    if len(boxes) == 1 and domain is None:
        distances = [None]
    else:
        distances = separation_distances(boxes, domain)
    system = build_gradient_system(f) if cfg.refine else None

    def run(k: int) -> Classification:
        cfg_k = cfg
        try:
            if k in overrides:
                cfg_k = replace(cfg, epsilon=overrides[k])
            return classify_candidate(f, boxes[k], cfg_k, domain, distances[k], system)
        except ExtremaError as e:
            logger.info('Candidate %d failed: %s', k, e)
            return Classification('Undecided', None, f'{type(e).__name__}: {e}')

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(len(boxes))))
    else:
        results = [run(k) for k in range(len(boxes))]
    logger.info(
        'Classified %d candidates: %s', len(results),
        ', '.join(f'{v}={sum(r.verdict == v for r in results)}' for v in VERDICTS))
    return results
