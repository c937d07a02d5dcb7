"""Formula parsing, exact symbolic differentiation and evaluation over reals and boxes"""

import re
import math
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, singledispatch
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import interval as iv
from .interval import Interval, Box
from .errors import ExpressionSyntaxError, UnknownVariable, NonIntegerExponent
from .errors import DomainViolation, DimensionMismatch

logger = logging.getLogger(__name__)


# Nodes
class Node:
    """Base class of expression tree nodes. Nodes are immutable."""


@dataclass(frozen=True)
class Constant(Node):
    """Exact rational constant; `text` keeps the literal as written, if any."""
    value: Fraction
    text: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'value', Fraction(self.value))


@dataclass(frozen=True)
class Variable(Node):
    """Variable `x_{index+1}` (indices are 0-based)."""
    index: int


@dataclass(frozen=True)
class Unary(Node):
    op: str
    arg: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Power(Node):
    base: Node
    exponent: int


ZERO = Constant(0)
ONE = Constant(1)


# Simplifying constructors. Folding is exact (rational arithmetic), so a
# simplified tree evaluates to the same real function as the unsimplified one.
def _is_const(u: Node, value=None) -> bool:
    return isinstance(u, Constant) and (value is None or u.value == value)


def neg(u: Node) -> Node:
    if isinstance(u, Constant):
        return Constant(-u.value)
    if isinstance(u, Unary) and u.op == 'neg':
        return u.arg
    return Unary('neg', u)


def add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Constant(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Binary('add', a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Constant(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return Binary('sub', a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_const(b) and not _is_const(a):
        a, b = b, a
    if _is_const(a):
        if _is_const(b):
            return Constant(a.value * b.value)
        if a.value == 0:
            return ZERO
        if a.value == 1:
            return b
        if a.value == -1:
            return neg(b)
        if isinstance(b, Binary) and b.op == 'mul' and _is_const(b.left):
            return mul(Constant(a.value * b.left.value), b.right)
    return Binary('mul', a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(b, 1):
        return a
    if _is_const(a, 0) and not _is_const(b, 0):
        return ZERO
    if _is_const(a) and _is_const(b) and b.value != 0:
        return Constant(a.value / b.value)
    return Binary('div', a, b)


def power(base: Node, k: int) -> Node:
    if k == 0:
        return ONE
    if k == 1:
        return base
    if _is_const(base) and not (base.value == 0 and k < 0):
        return Constant(base.value ** k)
    return Power(base, k)


def apply(name: str, u: Node) -> Node:
    if name == 'neg':
        return neg(u)
    if name == 'sqr' and _is_const(u):
        return Constant(u.value * u.value)
    get(name)
    return Unary(name, u)


# Unary function registry
def _real_ln(v: float) -> float:
    if v <= 0:
        raise DomainViolation(f'ln is undefined at {v!r}.')
    return math.log(v)


def _real_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


class UnaryRule(NamedTuple):
    """Real, interval and derivative rule of one unary function.

    `derivative(u)` returns the derivative of the function at the node `u`
    (the chain rule factor is applied by `differentiate`).
    """
    real: Callable[[float], float]
    interval: Callable[[Interval], Interval]
    derivative: Callable[[Node], Node]


UNARY_FUNCTIONS = {
    'neg': UnaryRule(lambda v: -v, iv.neg, lambda u: Constant(-1)),
    'exp': UnaryRule(_real_exp, iv.exp, lambda u: apply('exp', u)),
    'ln': UnaryRule(_real_ln, iv.ln, lambda u: div(ONE, u)),
    'sin': UnaryRule(math.sin, iv.sin, lambda u: apply('cos', u)),
    'cos': UnaryRule(math.cos, iv.cos, lambda u: neg(apply('sin', u))),
    'sqr': UnaryRule(lambda v: v * v, iv.sqr, lambda u: mul(Constant(2), u)),
}

# Names usable in formulas as `name(...)`
FUNCTION_NAMES = tuple(name for name in UNARY_FUNCTIONS if name != 'neg')


def get(identifier: str) -> UnaryRule:
    """Returns the rule of a unary function
    Arguments:
        identifier: Function name, one of `UNARY_FUNCTIONS`.
    Returns:
        `UnaryRule` with the real, interval and derivative implementations.
    """
    if identifier in UNARY_FUNCTIONS:
        return UNARY_FUNCTIONS[identifier]
    raise ValueError(f'Unknown function {identifier!r}, expected one of {sorted(UNARY_FUNCTIONS)}.')


# Expressions
@dataclass(frozen=True)
class Expression:
    """Expression tree of a function of `dim` variables.

    Arguments:
        root: Root node of the tree.
        dim: Number of variables `n`. Every variable index is below `dim`.
    """
    root: Node
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f'Expression needs dim >= 1, got {self.dim}.')
        used = variables(self.root)
        if used and max(used) >= self.dim:
            raise UnknownVariable(f'x{max(used) + 1} used in a function of {self.dim} variables.')

    def __str__(self):
        return to_string(self)

    def __call__(self, x: Sequence[float]) -> float:
        return eval_real(self, x)

    def differentiate(self, j: int) -> 'Expression':
        return differentiate(self, j)

    def eval_real(self, x: Sequence[float]) -> float:
        return eval_real(self, x)

    def eval_interval(self, b: Box) -> Interval:
        return eval_interval(self, b)


@singledispatch
def variables(node: Node) -> frozenset:
    """Indices of the variables a node depends on."""
    raise TypeError(f'Not an expression node: {node!r}')


@variables.register(Constant)
def _(node):
    return frozenset()


@variables.register(Variable)
def _(node):
    return frozenset((node.index,))


@variables.register(Unary)
def _(node):
    return variables(node.arg)


@variables.register(Binary)
def _(node):
    return variables(node.left) | variables(node.right)


@variables.register(Power)
def _(node):
    return variables(node.base)


# Differentiation
def differentiate(e: Expression, j: int) -> Expression:
    """Exact partial derivative of `e` with respect to variable `j` (0-based)."""
    if not 0 <= j < e.dim:
        raise UnknownVariable(f'Cannot differentiate with respect to x{j + 1} in a function of {e.dim} variables.')
    return Expression(_derive(e.root, j), e.dim)


@singledispatch
def _derive(node: Node, j: int) -> Node:
    raise TypeError(f'Cannot differentiate a {type(node).__name__}')


@_derive.register(Constant)
def _(node, j):
    return ZERO


@_derive.register(Variable)
def _(node, j):
    return ONE if node.index == j else ZERO


@_derive.register(Unary)
def _(node, j):
    du = _derive(node.arg, j)
    if _is_const(du, 0):
        return ZERO
    if node.op == 'neg':
        return neg(du)
    return mul(get(node.op).derivative(node.arg), du)


@_derive.register(Binary)
def _(node, j):
    u, v = node.left, node.right
    du, dv = _derive(u, j), _derive(v, j)
    if node.op == 'add':
        return add(du, dv)
    if node.op == 'sub':
        return sub(du, dv)
    if node.op == 'mul':
        return add(mul(du, v), mul(u, dv))
    if node.op == 'div':
        return div(sub(mul(du, v), mul(u, dv)), power(v, 2))
    raise TypeError(f'Unknown binary operator {node.op!r}')


@_derive.register(Power)
def _(node, j):
    du = _derive(node.base, j)
    k = node.exponent
    return mul(mul(Constant(k), power(node.base, k - 1)), du)


# Real evaluation
def eval_real(e: Expression, x: Sequence[float]) -> float:
    """Nearest-rounded floating point value of `e` at the point `x`."""
    if len(x) != e.dim:
        raise DimensionMismatch(f'Point of dimension {len(x)} for a function of {e.dim} variables.')
    return _real(e.root, [float(v) for v in x])


@singledispatch
def _real(node: Node, x: List[float]) -> float:
    raise TypeError(f'Cannot evaluate a {type(node).__name__}')


@_real.register(Constant)
def _(node, x):
    return float(node.value)


@_real.register(Variable)
def _(node, x):
    return x[node.index]


@_real.register(Unary)
def _(node, x):
    return get(node.op).real(_real(node.arg, x))


@_real.register(Binary)
def _(node, x):
    a, b = _real(node.left, x), _real(node.right, x)
    if node.op == 'add':
        return a + b
    if node.op == 'sub':
        return a - b
    if node.op == 'mul':
        return a * b
    if b == 0:
        raise DomainViolation(f'Division by zero at {x}.')
    return a / b


@_real.register(Power)
def _(node, x):
    b, k = _real(node.base, x), node.exponent
    if b == 0 and k < 0:
        raise DomainViolation(f'Division by zero at {x}.')
    try:
        return b ** k
    except OverflowError:
        return math.inf if b > 0 or k % 2 == 0 else -math.inf


# Interval evaluation (natural extension)
def eval_interval(e: Expression, b: Box) -> Interval:
    """Natural interval extension of `e` over the box `b`.

    The result contains the range of `e` over `b`. Every occurrence of a
    variable is evaluated independently, so `x1 - x1` over `[0, 1]` gives
    `[-1, 1]`.
    """
    if b.dim != e.dim:
        raise DimensionMismatch(f'Box of dimension {b.dim} for a function of {e.dim} variables.')
    return _interval(e.root, b.coords)


@lru_cache(maxsize=4096)
def _enclose(value: Fraction) -> Interval:
    return Interval.enclose(value)


@singledispatch
def _interval(node: Node, x: Tuple[Interval, ...]) -> Interval:
    raise TypeError(f'Cannot evaluate a {type(node).__name__}')


@_interval.register(Constant)
def _(node, x):
    return _enclose(node.value)


@_interval.register(Variable)
def _(node, x):
    return x[node.index]


@_interval.register(Unary)
def _(node, x):
    return get(node.op).interval(_interval(node.arg, x))


_INTERVAL_OPS = {'add': iv.add, 'sub': iv.sub, 'mul': iv.mul, 'div': iv.div}


@_interval.register(Binary)
def _(node, x):
    return _INTERVAL_OPS[node.op](_interval(node.left, x), _interval(node.right, x))


@_interval.register(Power)
def _(node, x):
    return iv.pow_int(_interval(node.base, x), node.exponent)


# Printing
_PRECEDENCE = {'add': 1, 'sub': 1, 'mul': 2, 'div': 2}
_SYMBOLS = {'add': '+', 'sub': '-', 'mul': '*', 'div': '/'}
_NEG_PRECEDENCE = 3
_POW_PRECEDENCE = 4
_ATOM_PRECEDENCE = 5


def _format_fraction(q: Fraction) -> str:
    """Exact decimal text of `q` if it has one, else `(p/q)`."""
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f'({abs(q.numerator)}/{q.denominator})'
    digits = max(twos, fives)
    scaled = abs(q) * 10 ** digits
    text = str(scaled.numerator)
    if digits:
        text = text.rjust(digits + 1, '0')
        text = text[:-digits] + '.' + text[-digits:]
    return text


def to_string(e: Union[Expression, Node]) -> str:
    """Prints an expression in the formula grammar accepted by `parse`."""
    node = e.root if isinstance(e, Expression) else e
    return _print(node)[0]


@singledispatch
def _print(node: Node) -> Tuple[str, int]:
    raise TypeError(f'Cannot print a {type(node).__name__}')


@_print.register(Constant)
def _(node):
    q = node.value
    if node.text is not None and Fraction(node.text) == abs(q):
        text = node.text
    else:
        text = _format_fraction(q)
    if q < 0:
        return '-' + text, _NEG_PRECEDENCE
    return text, _ATOM_PRECEDENCE


@_print.register(Variable)
def _(node):
    return f'x{node.index + 1}', _ATOM_PRECEDENCE


@_print.register(Unary)
def _(node):
    arg, prec = _print(node.arg)
    if node.op == 'neg':
        if prec < _NEG_PRECEDENCE:
            arg = f'({arg})'
        return '-' + arg, _NEG_PRECEDENCE
    return f'{node.op}({arg})', _ATOM_PRECEDENCE


@_print.register(Binary)
def _(node):
    own = _PRECEDENCE[node.op]
    left, left_prec = _print(node.left)
    right, right_prec = _print(node.right)
    if left_prec < own:
        left = f'({left})'
    if right_prec <= own:
        right = f'({right})'
    return f'{left} {_SYMBOLS[node.op]} {right}', own


@_print.register(Power)
def _(node):
    base, prec = _print(node.base)
    if prec <= _POW_PRECEDENCE:
        base = f'({base})'
    return f'{base}^{node.exponent}', _POW_PRECEDENCE


# Parsing
class Token(NamedTuple):
    kind: str
    text: str
    position: int


_TOKEN_RE = re.compile(r'''
    (?P<space>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
''', re.VERBOSE)

# Binary operators as (precedence, associativity); unary minus binds at 3
BINARY_OPERATORS = {
    '+': (1, 'left'),
    '-': (1, 'left'),
    '*': (2, 'left'),
    '/': (2, 'left'),
    '^': (4, 'right'),
}
_BINARY_NODES = {'+': 'add', '-': 'sub', '*': 'mul', '/': 'div'}
_ALIASES = {'x': 0, 'y': 1, 'z': 2}
_VARIABLE_RE = re.compile(r'x([1-9][0-9]*)')


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f'Unexpected character {text[pos]!r}', pos)
        if match.lastgroup != 'space':
            tokens.append(Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    tokens.append(Token('end', '', len(text)))
    return tokens


class _Parser:
    """Precedence climbing over the token list of one formula."""

    def __init__(self, text: str, dim: Optional[int]):
        self.tokens = tokenize(text)
        self.index = 0
        self.dim = dim

    def peek(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str):
        token = self.advance()
        if token.text != text:
            found = 'end of input' if token.kind == 'end' else repr(token.text)
            raise ExpressionSyntaxError(f'Expected {text!r}, found {found}', token.position)

    def parse(self) -> Node:
        node = self.expression(0)
        token = self.peek()
        if token.kind != 'end':
            raise ExpressionSyntaxError(f'Unexpected {token.text!r}', token.position)
        return node

    def expression(self, min_prec: int) -> Node:
        left = self.atom()
        while True:
            token = self.peek()
            if token.kind != 'op' or token.text not in BINARY_OPERATORS:
                return left
            prec, assoc = BINARY_OPERATORS[token.text]
            if prec < min_prec:
                return left
            self.advance()
            right = self.expression(prec + 1 if assoc == 'left' else prec)
            if token.text == '^':
                left = Power(left, self.exponent(right, token))
            else:
                left = Binary(_BINARY_NODES[token.text], left, right)

    def exponent(self, node: Node, token: Token) -> int:
        value = _fold(node)
        if value is None or value.denominator != 1:
            raise NonIntegerExponent(
                f'Exponent {to_string(node)!r} at offset {token.position} is not an integer constant.')
        return int(value)

    def atom(self) -> Node:
        token = self.advance()
        if token.kind == 'number':
            return Constant(Fraction(token.text), token.text)
        if token.kind == 'name':
            return self.name(token)
        if token.text == '-':
            return Unary('neg', self.expression(3))
        if token.text == '+':
            return self.expression(3)
        if token.text == '(':
            node = self.expression(0)
            self.expect(')')
            return node
        if token.kind == 'end':
            raise ExpressionSyntaxError('Unexpected end of input', token.position)
        raise ExpressionSyntaxError(f'Unexpected operator {token.text!r}', token.position)

    def name(self, token: Token) -> Node:
        if token.text in FUNCTION_NAMES:
            self.expect('(')
            arg = self.expression(0)
            self.expect(')')
            return Unary(token.text, arg)
        return Variable(self.variable_index(token))

    def variable_index(self, token: Token) -> int:
        match = _VARIABLE_RE.fullmatch(token.text)
        if match is not None:
            index = int(match.group(1)) - 1
        elif token.text in _ALIASES and (self.dim is None or self.dim <= 3):
            index = _ALIASES[token.text]
        else:
            raise UnknownVariable(f'Unknown variable {token.text!r} at offset {token.position}.')
        if self.dim is not None and index >= self.dim:
            raise UnknownVariable(
                f'Variable {token.text!r} at offset {token.position} exceeds dimension {self.dim}.')
        return index


def _fold(node: Node) -> Optional[Fraction]:
    """Exact value of a constant subtree, `None` if it depends on a variable."""
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Unary) and node.op == 'neg':
        v = _fold(node.arg)
        return None if v is None else -v
    if isinstance(node, Binary):
        a, b = _fold(node.left), _fold(node.right)
        if a is None or b is None:
            return None
        if node.op == 'add':
            return a + b
        if node.op == 'sub':
            return a - b
        if node.op == 'mul':
            return a * b
        return None if b == 0 else a / b
    if isinstance(node, Power):
        v = _fold(node.base)
        if v is None or (v == 0 and node.exponent < 0):
            return None
        return v ** node.exponent
    return None


def parse(text: str, n: Optional[int] = None) -> Expression:
    """Parses a formula into an `Expression`.

    Arguments:
        text: Formula over the variables `x1..xn` (or `x`, `y`, `z` when
            `n <= 3`) with `+ - * / ^`, parentheses, decimal literals and
            the functions `sin cos exp ln sqr`.
        n: Number of variables. If `None`, the largest variable used.
    Returns:
        `Expression` faithful to the written formula; only exponents are
        folded to integers.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError('Empty formula', 0)
    root = _Parser(text, n).parse()
    if n is None:
        used = variables(root)
        n = max(used) + 1 if used else 1
    return Expression(root, n)


# Gradient and Hessian
@dataclass(frozen=True)
class GradientSystem:
    """`f` with its gradient and Hessian as expressions.

    `hessian[i][j]` and `hessian[j][i]` are the same object: each mixed
    partial is derived once, from `grad[i]` for `i <= j`.
    """
    f: Expression
    grad: Tuple[Expression, ...]
    hessian: Tuple[Tuple[Expression, ...], ...]

    @property
    def dim(self) -> int:
        return self.f.dim

    def hessian_entry(self, i: int, j: int) -> Expression:
        return self.hessian[i][j]

    def gradient_intervals(self, b: Box) -> List[Interval]:
        return [eval_interval(g, b) for g in self.grad]

    def hessian_intervals(self, b: Box) -> List[List[Interval]]:
        n = self.dim
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                rows[i][j] = rows[j][i] = eval_interval(self.hessian_entry(i, j), b)
        return rows

    def gradient_real(self, x: Sequence[float]) -> np.ndarray:
        return np.array([eval_real(g, x) for g in self.grad])

    def hessian_real(self, x: Sequence[float]) -> np.ndarray:
        n = self.dim
        h = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                h[i, j] = h[j, i] = eval_real(self.hessian_entry(i, j), x)
        return h


def build_gradient_system(e: Expression) -> GradientSystem:
    n = e.dim
    grad = tuple(differentiate(e, j) for j in range(n))
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            rows[i][j] = rows[j][i] = differentiate(grad[i], j)
    logger.debug('Built gradient system of %s', to_string(e))
    return GradientSystem(e, grad, tuple(tuple(r) for r in rows))
