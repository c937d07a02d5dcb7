"""Command line front-end: solve, classify and report on a problem file"""

import re
import sys
import json
import time
import logging
import argparse
import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .interval import Interval, Box
from .expressions import parse, build_gradient_system
from .solver import SolveConfig, Candidate, Completeness, solve_stationary
from .classifier import ProbeConfig, Classification, classify_all
from .hessian import HessianReport, hessian_verdict, baseline_agrees
from .errors import ExtremaError, ProblemFileError
from .utils import format_float, format_pair

logger = logging.getLogger(__name__)

SECTION = 'problem'
OPTION_KEYS = ('formula', 'dimension', 'domain', 'tol_x', 'max_boxes', 'retry_limit',
               'zero_tol', 'epsilon', 'newton')
_PAIR_RE = re.compile(r'\[\s*([^,\[\]]+?)\s*,\s*([^,\[\]]+?)\s*\]')
_OVERRIDE_RE = re.compile(r'epsilon\.([1-9][0-9]*)')


@dataclass(frozen=True)
class ProblemFile:
    """Contents of a problem file.

    `overrides` maps 0-based candidate indices to their `epsilon`.
    """
    formula: str
    dimension: int
    domain: Box
    solve: SolveConfig = field(default_factory=SolveConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    zero_tol: float = 1e-9
    overrides: Dict[int, float] = field(default_factory=dict)


def _number(key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ProblemFileError(f'{key} = {text!r} is not a valid {kind.__name__}.') from None


def _parse_domain(text: str, n: Optional[int]) -> List[Interval]:
    pairs = _PAIR_RE.findall(text)
    if not pairs or _PAIR_RE.sub('', text).replace(',', '').strip():
        raise ProblemFileError(f'domain = {text!r} must be a list of [lo, hi] pairs.')
    coords = []
    for lo_text, hi_text in pairs:
        try:
            lo, hi = Interval.enclose(lo_text).lo, Interval.enclose(hi_text).hi
        except ValueError:
            raise ProblemFileError(f'Domain pair [{lo_text}, {hi_text}] is not numeric.') from None
        if not (-float('inf') < lo < hi < float('inf')):
            raise ProblemFileError(f'Domain pair [{lo_text}, {hi_text}] needs finite lo < hi.')
        coords.append(Interval(lo, hi))
    if n is not None and len(coords) == 1:
        coords = coords * n
    return coords


def parse_problem(text: str, source: str = '<string>') -> ProblemFile:
    """Reads a problem from `key = value` lines.

    Keys: `formula` (required), `dimension`, `domain` (`[lo, hi], ...`, a
    single pair applies to every axis), `tol_x`, `max_boxes`, `retry_limit`,
    `zero_tol`, `epsilon`, `epsilon.<k>` (candidate k, 1-based), `newton`.
    """
    config = configparser.ConfigParser(interpolation=None)
    try:
        config.read_string(f'[{SECTION}]\n' + text, source=source)
    except configparser.Error as e:
        raise ProblemFileError(f'{source}: {e}') from None
    options = config[SECTION]

    overrides = {}
    for key in options:
        match = _OVERRIDE_RE.fullmatch(key)
        if match:
            overrides[int(match.group(1)) - 1] = _number(key, options[key])
        elif key not in OPTION_KEYS:
            raise ProblemFileError(f'{source}: unknown key {key!r}.')
    if 'formula' not in options:
        raise ProblemFileError(f'{source}: missing key formula.')
    if 'domain' not in options:
        raise ProblemFileError(f'{source}: missing key domain.')

    n = _number('dimension', options['dimension'], int) if 'dimension' in options else None
    coords = _parse_domain(options['domain'], n)
    if n is None:
        n = max(parse(options['formula']).dim, len(coords))
        if len(coords) == 1:
            coords = coords * n
    if len(coords) != n:
        raise ProblemFileError(f'{source}: domain has {len(coords)} pairs for dimension {n}.')
    f = parse(options['formula'], n)

    solve = SolveConfig(
        tol_x=_number('tol_x', options.get('tol_x', '1e-6')),
        max_boxes=_number('max_boxes', options.get('max_boxes', '200000'), int),
        use_newton_contraction=options.getboolean('newton', fallback=True),
    )
    epsilon = _number('epsilon', options['epsilon']) if 'epsilon' in options else None
    probe = ProbeConfig(
        epsilon=epsilon,
        retry_limit=_number('retry_limit', options.get('retry_limit', '4'), int),
    )
    zero_tol = _number('zero_tol', options.get('zero_tol', '1e-9'))
    return ProblemFile(options['formula'], f.dim, Box(coords), solve, probe, zero_tol, overrides)


def read_problem(path) -> ProblemFile:
    path = Path(path)
    return parse_problem(path.read_text('utf-8'), source=str(path))


# Report
def _interval_record(a: Interval) -> List[str]:
    return list(format_pair(a.lo, a.hi))


def _box_record(b: Box) -> List[List[str]]:
    return [_interval_record(c) for c in b]


def _baseline_record(report: Optional[HessianReport], verdict: str) -> Optional[dict]:
    if report is None:
        return None
    record = {
        'verdict': report.verdict,
        'eigen_signs': report.eigen_signs,
        'minors': [format_float(m) for m in report.minors],
        'matrix': [[format_float(v) for v in row] for row in report.matrix],
        'agrees': baseline_agrees(report, verdict),
    }
    if report.conditions is not None:
        record['conditions'] = [format_float(v) for v in report.conditions]
        record['eigenvalues'] = [format_float(v) for v in report.eigenvalues]
    return record


def _candidate_record(index: int, cand: Candidate, result: Classification,
                      baseline: Optional[HessianReport]) -> dict:
    evidence = None
    if result.evidence is not None:
        ev = result.evidence
        evidence = {
            'reference': _interval_record(ev.reference),
            'faces': [_interval_record(face) for face in ev.faces],
            'n_intersect': ev.n_intersect,
            'n_greater': ev.n_greater,
            'n_less': ev.n_less,
            'epsilon_used': format_float(ev.epsilon_used),
            'retries': ev.retries,
            'pieces': ev.pieces,
            'pieces_greater': ev.pieces_greater,
            'pieces_less': ev.pieces_less,
        }
    return {
        'index': index,
        'enclosure': _box_record(cand.enclosure),
        'midpoint': [format_float(v) for v in cand.midpoint()],
        'status': cand.status,
        'value': _interval_record(cand.value),
        'verdict': result.verdict,
        'error': result.error,
        'evidence': evidence,
        'baseline': _baseline_record(baseline, result.verdict),
    }


def build_report(problem: ProblemFile, candidates: Sequence[Candidate], completeness: Completeness,
                 results: Sequence[Classification], baselines: Sequence[Optional[HessianReport]]) -> dict:
    """Assembles the JSON report; identical inputs give an identical report."""
    return {
        'metadata': {
            'formula': problem.formula,
            'dimension': problem.dimension,
            'domain': _box_record(problem.domain),
            'norm': 'infinity',
            'separation_fallback': 'domain-boundary',
            'config': {
                'tol_x': format_float(problem.solve.tol_x),
                'max_boxes': problem.solve.max_boxes,
                'newton': problem.solve.use_newton_contraction,
                'epsilon': None if problem.probe.epsilon is None else format_float(problem.probe.epsilon),
                'epsilon_overrides': {str(k + 1): format_float(v) for k, v in problem.overrides.items()},
                'retry_limit': problem.probe.retry_limit,
                'refine': problem.probe.refine,
                'zero_tol': format_float(problem.zero_tol),
            },
            'completeness': {
                'flag': completeness.flag,
                'boxes_processed': completeness.boxes_processed,
                'diagnostic': completeness.diagnostic,
            },
        },
        'candidates': [
            _candidate_record(k + 1, c, r, b)
            for k, (c, r, b) in enumerate(zip(candidates, results, baselines))
        ],
    }


def format_table(report: dict) -> str:
    meta = report['metadata']
    lines = [
        f"f = {meta['formula']}  (n = {meta['dimension']})",
        f"search: {meta['completeness']['flag']}, {meta['completeness']['boxes_processed']} boxes",
    ]
    if meta['completeness']['diagnostic']:
        lines.append(f"note: {meta['completeness']['diagnostic']}")
    lines.append(f"{'#':>3}  {'midpoint':<40} {'status':<16} {'verdict':<11} "
                 f"{'N0/N>/N<':<10} {'pieces >/<':<14} {'epsilon':<12} {'retries':>7}  baseline")
    for rec in report['candidates']:
        midpoint = '(' + ', '.join(f'{float(v):.6g}' for v in rec['midpoint']) + ')'
        ev = rec['evidence']
        counts = f"{ev['n_intersect']}/{ev['n_greater']}/{ev['n_less']}" if ev else '-'
        pieces = f"{ev['pieces_greater']}/{ev['pieces_less']} of {ev['pieces']}" if ev and ev['pieces'] else '-'
        eps = f"{float(ev['epsilon_used']):.4g}" if ev else '-'
        retries = ev['retries'] if ev else '-'
        baseline = rec['baseline']['verdict'] if rec['baseline'] else '-'
        lines.append(f"{rec['index']:>3}  {midpoint:<40} {rec['status']:<16} {rec['verdict']:<11} "
                     f"{counts:<10} {pieces:<14} {eps:<12} {retries:>7}  {baseline}")
        if rec['error']:
            lines.append(f"     error: {rec['error']}")
    if not report['candidates']:
        lines.append('  no stationary points in the domain')
    return '\n'.join(lines)


def run(problem: ProblemFile, no_baseline: bool = False, n_jobs: int = 1, counters: bool = False) -> dict:
    """Runs solve, classify and baseline on a problem and returns the report."""
    f = parse(problem.formula, problem.dimension)
    system = build_gradient_system(f)

    start = time.perf_counter()
    candidates, completeness = solve_stationary(system, problem.domain, problem.solve)
    solved = time.perf_counter()
    results = classify_all(f, candidates, problem.domain, problem.probe, problem.overrides, n_jobs)
    classified = time.perf_counter()

    baselines = []
    for cand in candidates:
        report = None
        if not no_baseline:
            try:
                report = hessian_verdict(system, cand.midpoint(), problem.zero_tol)
            except ExtremaError as e:
                logger.warning('Baseline failed at %s: %s', cand.midpoint(), e)
        baselines.append(report)

    report = build_report(problem, candidates, completeness, results, baselines)
    if counters:
        report['counters'] = {
            'boxes_processed': completeness.boxes_processed,
            'evaluations': sum(r.evaluations for r in results),
            'refine_evaluations': sum(r.refine_evaluations for r in results),
        }
        report['timing'] = {
            'solve_seconds': solved - start,
            'classify_seconds': classified - solved,
        }
    return report


def _parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog='classify',
        description='Find and classify all stationary points of a function in a box.')
    parser.add_argument('problem', help='problem file with key = value lines')
    parser.add_argument('--json', metavar='PATH', help='write the structured report to PATH')
    parser.add_argument('--epsilon', type=float, help='probe half size for every candidate')
    parser.add_argument('--retries', type=int, help='retries with a smaller probe cube')
    parser.add_argument('--no-baseline', action='store_true', help='skip the Hessian baseline')
    parser.add_argument('--counters', action='store_true', help='add evaluation counters and timing')
    parser.add_argument('--jobs', type=int, default=1, help='threads used for classification')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='more logging (-vv for debug)')
    return parser.parse_args(argv)


def main(argv=None) -> int:
    """Exit status: 0 when every candidate is decided, 2 when some is Undecided, 1 on error."""
    args = _parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)

    try:
        problem = read_problem(args.problem)
        probe = problem.probe
        if args.epsilon is not None:
            probe = replace(probe, epsilon=args.epsilon)
        if args.retries is not None:
            probe = replace(probe, retry_limit=args.retries)
        problem = replace(problem, probe=probe)
        report = run(problem, no_baseline=args.no_baseline, n_jobs=args.jobs, counters=args.counters)
        if args.json:
            Path(args.json).write_text(json.dumps(report, sort_keys=True, indent=2) + '\n', 'utf-8')
    except (ValueError, OSError) as e:
        print(f'classify: error: {e}', file=sys.stderr)
        return 1

    print(format_table(report))
    return 2 if any(rec['verdict'] == 'Undecided' for rec in report['candidates']) else 0
