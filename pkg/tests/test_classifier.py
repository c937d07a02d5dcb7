import time
import pytest
import numpy as np
from fractions import Fraction
from extrema.interval import Interval, Box
from extrema.expressions import parse, eval_real, build_gradient_system
from extrema.solver import Candidate, SolveConfig, solve_stationary
from extrema.classifier import *
from extrema.errors import NonPositiveEpsilon, ProbeOutsideDomain, NonSeparatedCandidate

rng = np.random.default_rng(1234)
ORIGIN = Box([(-1e-9, 1e-9), (-1e-9, 1e-9)])
ROOT_GRID = [Fraction(k, 8) for k in range(-12, 13)]


def classify(text, cand, epsilon=None, **kwargs):
    n = cand.dim
    return classify_candidate(parse(text, n), cand, ProbeConfig(epsilon=epsilon, **kwargs))


def test_build_probe_boxes():
    boxes = build_probe_boxes([0, 0], 1)
    assert boxes == [
        Box([(1, 1), (-1, 1)]),
        Box([(-1, -1), (-1, 1)]),
        Box([(-1, 1), (1, 1)]),
        Box([(-1, 1), (-1, -1)]),
    ]
    assert build_probe_boxes([5], 0.5, 1) == [Box([(5.5, 5.5)]), Box([(4.5, 4.5)])]
    with pytest.raises(NonPositiveEpsilon):
        build_probe_boxes([0], 0)
    with pytest.raises(ValueError):
        build_probe_boxes([0, 0], 1, 3)


@pytest.mark.parametrize('n', [1, 2, 3, 5])
def test_probe_boxes_cover_the_cube_surface(n):
    for _ in range(200):
        center = [float(v) for v in rng.uniform(-10, 10, size=n)]
        epsilon = float(rng.uniform(1e-3, 2))
        boxes = build_probe_boxes(center, epsilon)
        assert len(boxes) == 2 * n
        for _ in range(10):
            # exact point on the surface of the cube center +- epsilon
            axis = int(rng.integers(n))
            sign = 1 if rng.random() < 0.5 else -1
            point = [Fraction(c) + Fraction(float(t)) * Fraction(epsilon)
                     for c, t in zip(center, rng.uniform(-1, 1, size=n))]
            point[axis] = Fraction(center[axis]) + sign * Fraction(epsilon)
            inside = [
                all(Fraction(c.lo) <= v <= Fraction(c.hi) for c, v in zip(b, point))
                for b in boxes
            ]
            assert any(inside)


def test_count_relations():
    faces = [Interval(2, 3), Interval(-2, -1), Interval(1, 2)]
    assert count_relations(Interval(0, 1), faces) == (1, 1, 1)


@pytest.mark.parametrize('n_greater,n_less,total,n,verdict', [
    (0, 4, 4, 2, 'Minimum'),
    (4, 0, 4, 2, 'Maximum'),
    (1, 1, 4, 2, 'Saddle'),
    (1, 1, 2, 1, 'Inflection'),
    (0, 3, 4, 2, 'Undecided'),
    (0, 0, 4, 2, 'Undecided'),
    (2, 0, 4, 2, 'Undecided'),
])
def test_decide(n_greater, n_less, total, n, verdict):
    assert decide(n_greater, n_less, total, n) == verdict


def test_degenerate_minimum():
    res = classify('x1^2 + x2^4', ORIGIN, 0.5)
    assert res.verdict == 'Minimum'
    assert res.evidence.n_less == 4
    assert res.evidence.retries == 0
    assert res.evaluations == 5
    assert res.refine_evaluations == 0


def test_maximum():
    res = classify('-x1^2 - x2^2', ORIGIN, 0.5)
    assert res.verdict == 'Maximum'
    assert res.evidence.n_greater == 4


def test_inflection():
    res = classify('x1^3', Box([(-1e-9, 1e-9)]), 0.5)
    assert res.verdict == 'Inflection'
    assert res.evidence.n_less == 1 and res.evidence.n_greater == 1


def test_saddle_needs_sub_faces():
    plain = classify('x1^2 - x2^2', ORIGIN, 0.5, refine=False, retry_limit=0)
    assert plain.verdict == 'Undecided'
    assert plain.evidence.n_intersect == 4
    assert plain.evidence.pieces == 0
    res = classify('x1^2 - x2^2', ORIGIN, 0.5)
    assert res.verdict == 'Saddle'
    ev = res.evidence
    assert ev.pieces_greater >= 1 and ev.pieces_less >= 1
    assert ev.n_intersect + ev.n_greater + ev.n_less == 4
    assert res.refine_evaluations > 0


def test_undecided_after_retries():
    res = classify('x1^2 * x2^2', ORIGIN, 0.5)
    assert res.verdict == 'Undecided'
    assert not res.decided
    assert res.evidence.retries == 4
    assert res.evidence.epsilon_used < 0.5
    assert res.evaluations == 5 * 5


def test_naive_axis_sampling_is_not_trusted():
    text = '(x2 - x1^2) * (x2 - 3*x1^2)'
    f = parse(text, 2)
    # every sample along the coordinate axes lies above f(0, 0) = 0
    for t in np.linspace(-0.5, 0.5, 11):
        if t:
            assert eval_real(f, [t, 0]) > 0 and eval_real(f, [0, t]) > 0
    # yet f(t, 2 t^2) = -t^4
    assert eval_real(f, [0.25, 0.125]) < 0
    for epsilon in (0.5, 0.25, 0.1):
        res = classify(text, ORIGIN, epsilon)
        assert res.verdict in ('Saddle', 'Undecided')
    assert classify(text, ORIGIN, 0.5).verdict == 'Saddle'


def test_classify_all_single_candidate():
    f = parse('x1^2', 1)
    res = classify_all(f, [Box([(-1e-9, 1e-9)])], Box([(-2, 2)]))
    assert [r.verdict for r in res] == ['Minimum']
    assert res[0].evidence.epsilon_used == 1


def test_classify_all_quartic():
    f = parse('x1^4/4 - x1^2/2', 1)
    cands = [Box.from_point([-1]), Box.from_point([1]), Box.from_point([0])]
    res = classify_all(f, cands, Box([(-2, 2)]))
    assert [r.verdict for r in res] == ['Minimum', 'Minimum', 'Maximum']
    assert all(r.evidence.epsilon_used == 0.5 for r in res)
    assert classify_all(f, []) == []


def test_classify_all_accepts_candidates_and_threads():
    f = parse('x1^2 - x2^2', 2)
    cands = [Candidate(ORIGIN, 'verified-unique', Interval(-1e-18, 1e-18))]
    domain = Box([(-1, 1), (-1, 1)])
    serial = classify_all(f, cands, domain)
    threaded = classify_all(f, cands, domain, n_jobs=2)
    assert serial[0].verdict == threaded[0].verdict == 'Saddle'


def test_overrides_and_errors():
    f = parse('(x1^2 - 1)^2', 1)
    domain = Box([(-2, 2)])
    cands = [Box.from_point([-1]), Box.from_point([1])]
    res = classify_all(f, cands, domain, overrides={1: 5.0})
    assert res[0].verdict == 'Minimum'
    assert res[1].verdict == 'Undecided'
    assert res[1].error.startswith('ProbeOutsideDomain')
    assert res[1].evidence is None


def test_epsilon_admissibility():
    cand = Box([(-0.1, 0.1)])
    domain = Box([(-2, 2)])
    f = parse('x1^2', 1)
    with pytest.raises(ProbeOutsideDomain):
        classify_candidate(f, cand, ProbeConfig(epsilon=3), domain)
    with pytest.raises(NonSeparatedCandidate):
        classify_candidate(f, cand, ProbeConfig(epsilon=1), domain, separation=1)
    with pytest.raises(NonSeparatedCandidate):
        classify_candidate(f, cand, ProbeConfig(epsilon=0.05), domain)
    with pytest.raises(NonPositiveEpsilon):
        ProbeConfig(epsilon=0)
    with pytest.raises(NonPositiveEpsilon):
        ProbeConfig(epsilon=-1)


def test_default_epsilon_is_clamped_to_the_domain():
    f = parse('x1^2', 1)
    cands = [Box.from_point([0]), Box.from_point([1.5])]
    with pytest.warns(UserWarning, match='clamped'):
        res = classify_all(f, cands, Box([(-2, 2)]))
    assert res[0].evidence.epsilon_used == 0.75
    assert res[1].evidence.epsilon_used == 0.5


def test_evaluations_grow_linearly_with_dimension():
    for n in (1, 2, 4, 8, 16, 32):
        text = ' + '.join(f'x{i + 1}^2' for i in range(n))
        res = classify(text, Box.from_point([0] * n), 0.5)
        assert res.verdict == 'Minimum'
        assert res.evaluations == 2 * n + 1


def test_cost_per_evaluation_is_linear():
    # Total time is quadratic in n: 2n + 1 evaluations of a function with n terms
    def best_time(n):
        text = ' + '.join(f'x{i + 1}^2' for i in range(n))
        f = parse(text, n)
        cand = Box.from_point([0] * n)
        cfg = ProbeConfig(epsilon=0.5)
        best = np.inf
        for _ in range(5):
            start = time.perf_counter()
            classify_candidate(f, cand, cfg)
            best = min(best, time.perf_counter() - start)
        return best
    t2, t32 = best_time(2), best_time(32)
    print(f't32 / t2 = {t32 / t2:.1f}')
    assert (t32 / 65) / (t2 / 5) < 64


# Soundness suite: separable polynomials f = sum p_i(x_i) whose stationary
# points are the products of the planted roots of every p_i'
def planted_roots(count):
    roots = []
    for r in rng.permutation(ROOT_GRID):
        if all(abs(r - s) >= Fraction(2, 5) for s in roots):
            roots.append(r)
        if len(roots) == count:
            break
    return sorted(roots)


def integrated(roots, scale):
    # coefficients of scale * prod(t - r), then of its antiderivative
    coeffs = [Fraction(scale)]
    for r in roots:
        shifted = [Fraction(0)] + coeffs
        for k in range(len(coeffs)):
            shifted[k] -= r * coeffs[k]
        coeffs = shifted
    return [Fraction(0)] + [c / (k + 1) for k, c in enumerate(coeffs)]


def poly(coeffs, t):
    return sum(c * t ** k for k, c in enumerate(coeffs))


def surface_range(polys, roots, center, epsilon):
    """Exact min and max of the separable function over the cube surface."""
    lows, highs, faces = [], [], []
    for p, rs, c in zip(polys, roots, center):
        ends = [Fraction(c) - epsilon, Fraction(c) + epsilon]
        inner = [r for r in rs if ends[0] < r < ends[1]]
        values = [poly(p, t) for t in ends + inner]
        lows.append(min(values))
        highs.append(max(values))
        faces.append([poly(p, t) for t in ends])
    low = min(min(faces[j]) + sum(lows) - lows[j] for j in range(len(polys)))
    high = max(max(faces[j]) + sum(highs) - highs[j] for j in range(len(polys)))
    return low, high


def planted_problem():
    n = int(rng.integers(1, 4))
    max_roots = {1: 5, 2: 2, 3: 2}[n]
    roots = [planted_roots(int(rng.integers(1, max_roots + 1))) for _ in range(n)]
    polys = [integrated(rs, 1 if rng.random() < 0.5 else -1) for rs in roots]
    terms = [
        f'({c.numerator}/{c.denominator})*x{i + 1}^{k}'
        for i, p in enumerate(polys) for k, c in enumerate(p) if c and k
    ]
    return n, roots, polys, ' + '.join(terms)


def test_soundness_on_planted_problems():
    decided = total = 0
    for _ in range(100):
        n, roots, polys, text = planted_problem()
        f = parse(text, n)
        points = [list(p) for p in np.array(np.meshgrid(*roots, indexing='ij'), dtype=object).reshape(n, -1).T]
        cands = [Box([(float(r) - 1e-9, float(r) + 1e-9) for r in p]) for p in points]
        results = classify_all(f, cands, Box([(-2, 2)] * n))
        for point, cand, res in zip(points, cands, results):
            total += 1
            assert res.error is None
            if not res.decided:
                continue
            decided += 1
            value = sum(poly(p, r) for p, r in zip(polys, point))
            epsilon = Fraction(res.evidence.epsilon_used)
            low, high = surface_range(polys, roots, cand.midpoint(), epsilon)
            if res.verdict == 'Minimum':
                assert low > value
            elif res.verdict == 'Maximum':
                assert high < value
            else:
                assert low < value < high
                assert res.verdict == ('Inflection' if n == 1 else 'Saddle')
    print(f'decided {decided} of {total} candidates')


# Soundness on quartics with mixed terms, checked against the sampled cube surface
def random_quartic():
    coeffs = {}
    for a in range(5):
        for b in range(5 - a):
            if a + b == 0:
                continue
            c = int(rng.integers(-3, 4))
            if (a, b) in ((4, 0), (0, 4)):
                c = int(rng.integers(1, 4))
            elif (a, b) in ((1, 1), (3, 1), (2, 2)) and c == 0:
                c = -1
            if c:
                coeffs[a, b] = c
    return coeffs


def quartic_text(coeffs):
    terms = []
    for (a, b), c in coeffs.items():
        factors = [f'x{i + 1}^{k}' for i, k in enumerate((a, b)) if k]
        terms.append(f'({c})*' + '*'.join(factors))
    return ' + '.join(terms)


def quartic_values(coeffs, x1, x2):
    return sum(c * x1 ** a * x2 ** b for (a, b), c in coeffs.items())


def cube_surface(center, epsilon, samples=301):
    t = np.linspace(-epsilon, epsilon, samples)
    points = []
    for axis in range(2):
        for side in (-epsilon, epsilon):
            face = np.empty((samples, 2))
            face[:, axis] = center[axis] + side
            face[:, 1 - axis] = center[1 - axis] + t
            points.append(face)
    return np.concatenate(points)


def test_soundness_on_mixed_quartics():
    domain = Box([(-2, 2), (-2, 2)])
    decided = 0
    for _ in range(20):
        coeffs = random_quartic()
        f = parse(quartic_text(coeffs), 2)
        cands, _ = solve_stationary(build_gradient_system(f), domain, SolveConfig(tol_x=1e-5))
        for cand, res in zip(cands, classify_all(f, cands, domain)):
            if res.error is not None or not res.decided:
                continue
            decided += 1
            center = cand.midpoint()
            surface = cube_surface(center, res.evidence.epsilon_used)
            vals = quartic_values(coeffs, surface[:, 0], surface[:, 1])
            fmid = quartic_values(coeffs, *center)
            tol = 1e-9 * (1 + np.max(np.abs(vals)))
            if res.verdict == 'Minimum':
                assert vals.min() > fmid - tol
            elif res.verdict == 'Maximum':
                assert vals.max() < fmid + tol
            else:
                assert res.verdict == 'Saddle'
                assert vals.max() > fmid - tol
                assert vals.min() < fmid + tol
    assert decided > 0
