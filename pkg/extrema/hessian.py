"""Classical second-derivative test at a point, kept as a baseline for the interval classifier"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .expressions import GradientSystem
from .errors import DimensionMismatch

logger = logging.getLogger(__name__)

EigenSigns = Literal['all-positive', 'all-negative', 'mixed', 'has-zero-within-tolerance']
BaselineVerdict = Literal['Minimum', 'Maximum', 'Inconclusive-or-Saddle']


@dataclass(frozen=True, eq=False)
class HessianReport:
    """Second-derivative test of `f` at one point.

    `conditions` (`f11`, `f22`, `f11 * f22 - f12 ** 2`) and the closed-form
    `eigenvalues` are only set for two variables.
    """
    matrix: np.ndarray
    minors: Tuple[float, ...]
    eigen_signs: EigenSigns
    verdict: BaselineVerdict
    conditions: Optional[Tuple[float, float, float]] = None
    eigenvalues: Optional[Tuple[float, float]] = None


def _determinant(rows: List[List[Fraction]]) -> Fraction:
    """Exact determinant by Gaussian elimination with row pivoting."""
    a = [list(r) for r in rows]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] / a[col][col]
            if factor:
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
    return det


def leading_minors(matrix: np.ndarray) -> Tuple[float, ...]:
    """Leading principal minors of `matrix`, computed exactly from its float entries."""
    exact = [[Fraction(float(v)) for v in row] for row in matrix]
    n = len(exact)
    return tuple(float(_determinant([row[:k] for row in exact[:k]])) for k in range(1, n + 1))


def sylvester(minors: Sequence[float], zero_tol: float) -> Tuple[EigenSigns, BaselineVerdict]:
    if any(abs(m) <= zero_tol for m in minors):
        return 'has-zero-within-tolerance', 'Inconclusive-or-Saddle'
    if all(m > zero_tol for m in minors):
        return 'all-positive', 'Minimum'
    # minor k (1-based) of a negative definite matrix has the sign of (-1)^k
    if all((m < 0) == (k % 2 == 1) for k, m in enumerate(minors, start=1)):
        return 'all-negative', 'Maximum'
    return 'mixed', 'Inconclusive-or-Saddle'


def eigenvalues_2x2(matrix: np.ndarray) -> Tuple[float, float]:
    """Closed-form eigenvalues of a symmetric 2x2 matrix, smaller first."""
    a, b, d = float(matrix[0, 0]), float(matrix[0, 1]), float(matrix[1, 1])
    mean = 0.5 * (a + d)
    radius = float(np.hypot(0.5 * (a - d), b))
    return mean - radius, mean + radius


def hessian_verdict(sys: GradientSystem, x: Sequence[float], zero_tol: float = 1e-9) -> HessianReport:
    """Classifies the point `x` by the signs of the leading principal minors of
    the Hessian evaluated there in floating point.

    Arguments:
        sys: Gradient system of `f`.
        x: Point, usually the midpoint of a candidate enclosure.
        zero_tol: Minors with magnitude at most `zero_tol` count as zero.
    Returns:
        `HessianReport`. Semi-definite Hessians give `'Inconclusive-or-Saddle'`
        even at true extrema.
    """
    if len(x) != sys.dim:
        raise DimensionMismatch(f'Point of dimension {len(x)} for a function of {sys.dim} variables.')
    if zero_tol < 0:
        raise ValueError(f'zero_tol must be non-negative, got {zero_tol!r}.')
    matrix = sys.hessian_real(x)
    minors = leading_minors(matrix)
    eigen_signs, verdict = sylvester(minors, zero_tol)
    conditions = eigenvalues = None
    if sys.dim == 2:
        f11, f12, f22 = matrix[0, 0], matrix[0, 1], matrix[1, 1]
        conditions = (float(f11), float(f22), float(f11 * f22 - f12 * f12))
        eigenvalues = eigenvalues_2x2(matrix)
    logger.debug('Hessian at %s has minors %s: %s', list(x), minors, verdict)
    return HessianReport(matrix, minors, eigen_signs, verdict, conditions, eigenvalues)


def baseline_agrees(report: HessianReport, verdict: str) -> Optional[bool]:
    """Whether a definite baseline verdict matches the interval verdict.

    `None` when the baseline makes no claim.
    """
    if report.verdict == 'Inconclusive-or-Saddle':
        return None
    return report.verdict == verdict
