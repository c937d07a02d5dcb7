import json
import itertools
import pytest
import numpy as np
from pathlib import Path
from extrema.cli import *
from extrema.errors import ProblemFileError, ExpressionSyntaxError

PROBLEMS = Path(__file__).parent / 'problems'
HIMMELBLAU_TYPES = [
    ((3.0, 2.0), 'Minimum'),
    ((-2.805118, 3.131312), 'Minimum'),
    ((-3.779310, -3.283186), 'Minimum'),
    ((3.584428, -1.848127), 'Minimum'),
    ((-0.270845, -0.923039), 'Maximum'),
    ((0.086678, 2.884255), 'Saddle'),
    ((3.385154, 0.073852), 'Saddle'),
    ((-3.073026, -0.081353), 'Saddle'),
    ((-0.127961, -1.953715), 'Saddle'),
]


def write_problem(tmp_path, text, name='problem.txt'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_problem():
    problem = parse_problem('formula = x1^2 + x2^4\ndomain = [-2, 2]\ntol_x = 1e-4\nepsilon.2 = 0.25\n')
    assert problem.dimension == 2
    assert problem.domain == Box([(-2, 2), (-2, 2)])
    assert problem.solve.tol_x == 1e-4
    assert problem.solve.use_newton_contraction
    assert problem.probe.epsilon is None
    assert problem.overrides == {1: 0.25}
    problem = parse_problem('formula = x1\ndimension = 3\ndomain = [0.1, 0.3]\nnewton = no\n')
    assert problem.dimension == 3
    assert problem.domain[2].lo <= 0.1 and problem.domain[2].hi >= 0.3
    assert not problem.solve.use_newton_contraction


@pytest.mark.parametrize('text', [
    'domain = [-1, 1]\n',
    'formula = x1\n',
    'formula = x1\ndomain = [-1, 1]\ncolour = red\n',
    'formula = x1\ndomain = [1, -1]\n',
    'formula = x1\ndomain = -1, 1\n',
    'formula = x1 + x2\ndimension = 2\ndomain = [-1, 1], [-1, 1], [-1, 1]\n',
    'formula = x1\ndomain = [-1, 1]\nmax_boxes = many\n',
])
def test_invalid_problems(text):
    with pytest.raises(ProblemFileError):
        parse_problem(text)


def test_formula_errors_surface():
    with pytest.raises(ExpressionSyntaxError):
        parse_problem('formula = x1 + * x2\ndomain = [-1, 1]\n')


def test_degenerate_minimum(tmp_path, capsys):
    out = tmp_path / 'report.json'
    assert main([str(PROBLEMS / 'degenerate_minimum.txt'), '--json', str(out)]) == 0
    report = json.loads(out.read_text())
    assert report['metadata']['norm'] == 'infinity'
    assert report['metadata']['completeness']['flag'] == 'complete'
    (cand,) = report['candidates']
    assert cand['verdict'] == 'Minimum'
    assert cand['baseline']['verdict'] == 'Inconclusive-or-Saddle'
    assert cand['baseline']['agrees'] is None
    assert cand['evidence']['n_less'] == 4
    assert abs(float(cand['evidence']['epsilon_used']) - 1) < 1e-5
    lo, hi = cand['enclosure'][0]
    assert float(lo) <= 0 <= float(hi)
    assert 'Minimum' in capsys.readouterr().out


def test_saddle(tmp_path, capsys):
    report = tmp_path / 'report.json'
    assert main([str(PROBLEMS / 'saddle.txt'), '--no-baseline', '--json', str(report)]) == 0
    out = capsys.readouterr().out
    assert 'Saddle' in out
    # the face ranges all meet the reference, refinement decides
    (cand,) = json.loads(report.read_text())['candidates']
    ev = cand['evidence']
    assert ev['n_intersect'] == 4
    assert ev['pieces_greater'] > 0 and ev['pieces_less'] > 0
    assert f"{ev['pieces_greater']}/{ev['pieces_less']} of {ev['pieces']}" in out


def test_himmelblau():
    report = run(read_problem(PROBLEMS / 'himmelblau.txt'))
    assert report['metadata']['completeness']['flag'] == 'complete'
    assert len(report['candidates']) == 9
    for rec in report['candidates']:
        mid = np.array([float(v) for v in rec['midpoint']])
        point, expected = min(HIMMELBLAU_TYPES, key=lambda t: np.max(np.abs(mid - t[0])))
        assert np.max(np.abs(mid - point)) < 1e-4
        assert rec['verdict'] == expected
        if rec['baseline']['agrees'] is not None:
            assert rec['baseline']['agrees']
    verdicts = [rec['verdict'] for rec in report['candidates']]
    assert sorted(verdicts) == sorted(v for _, v in HIMMELBLAU_TYPES)
    boxes = [[(float(lo), float(hi)) for lo, hi in rec['enclosure']] for rec in report['candidates']]
    for a, b in itertools.combinations(boxes, 2):
        assert any(ha < lb or hb < la for (la, ha), (lb, hb) in zip(a, b))


def test_report_is_deterministic(tmp_path):
    first, second = tmp_path / 'a.json', tmp_path / 'b.json'
    problem = str(PROBLEMS / 'saddle.txt')
    assert main([problem, '--json', str(first)]) == 0
    assert main([problem, '--json', str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_counters(tmp_path):
    out = tmp_path / 'report.json'
    main([str(PROBLEMS / 'degenerate_minimum.txt'), '--counters', '--json', str(out)])
    report = json.loads(out.read_text())
    assert report['counters']['evaluations'] == 5
    assert report['counters']['boxes_processed'] > 0
    assert report['timing']['solve_seconds'] >= 0


def test_undecided_exit_status(tmp_path, capsys):
    path = write_problem(tmp_path, 'formula = x1^2\ndomain = [-1, 1]\nepsilon.1 = 5\n')
    assert main([path]) == 2
    out = capsys.readouterr().out
    assert 'Undecided' in out
    assert 'ProbeOutsideDomain' in out


def test_epsilon_flag(tmp_path):
    out = tmp_path / 'report.json'
    path = write_problem(tmp_path, 'formula = x1^2\ndomain = [-1, 1]\n')
    assert main([path, '--epsilon', '0.25', '--retries', '0', '--json', str(out)]) == 0
    report = json.loads(out.read_text())
    assert report['metadata']['config']['epsilon'] == '0.25'
    assert report['metadata']['config']['retry_limit'] == 0
    assert report['candidates'][0]['evidence']['epsilon_used'] == '0.25'


def test_no_stationary_points(tmp_path, capsys):
    path = write_problem(tmp_path, 'formula = x1 + x2\ndomain = [-1, 1]\n')
    assert main([path]) == 0
    assert 'no stationary points' in capsys.readouterr().out


def test_errors_exit_with_one(tmp_path, capsys):
    assert main([str(tmp_path / 'missing.txt')]) == 1
    assert 'classify: error' in capsys.readouterr().err
    path = write_problem(tmp_path, 'formula = x1 +\ndomain = [-1, 1]\n')
    assert main([path]) == 1
    assert 'offset' in capsys.readouterr().err
