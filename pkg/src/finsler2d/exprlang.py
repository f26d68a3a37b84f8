"""Expression language for metric-definition files.

Scalar fields over chart coordinates (``x1 .. xn``) are written in a small
smooth-primitive grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' int)*          # integer exponents only
    atom   := NUMBER | 'x'<k> | func '(' expr ')' | '(' expr ')'
    func   := sqrt | exp | log | sin | cos

Only smooth primitives are admitted (no abs, no floor) so every parsed field
is C-infinity on its domain; Euclidean norms are spelled ``sqrt(x1^2+x2^2)``.
Rational powers are written through ``sqrt`` composition or ``exp(q*log(u))``.

ASTs are frozen dataclasses, hence immutable values that are safe to share
between concurrent evaluators.  Arithmetic operators on nodes build new ASTs,
which is how the deformation module composes metrics symbolically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


class ExprError(ValueError):
    """Parse or validation failure, carrying the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class Node:
    """Base class providing symbolic arithmetic on AST nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("+", self, _as_expr(other))

    def __radd__(self, other):
        return Binary("+", _as_expr(other), self)

    def __sub__(self, other):
        return Binary("-", self, _as_expr(other))

    def __rsub__(self, other):
        return Binary("-", _as_expr(other), self)

    def __mul__(self, other):
        return Binary("*", self, _as_expr(other))

    def __rmul__(self, other):
        return Binary("*", _as_expr(other), self)

    def __truediv__(self, other):
        return Binary("/", self, _as_expr(other))

    def __rtruediv__(self, other):
        return Binary("/", _as_expr(other), self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise ExprError("^ exponents must be integers")
        return Power(self, exponent)

    def __neg__(self):
        return Unary("neg", self)


@dataclass(frozen=True, eq=True)
class Const(Node):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Node):
    index: int  # 1-based coordinate index


@dataclass(frozen=True, eq=True)
class Unary(Node):
    op: str  # neg | sqrt | exp | log | sin | cos
    arg: "Expr"


@dataclass(frozen=True, eq=True)
class Binary(Node):
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, eq=True)
class Power(Node):
    base: "Expr"
    exponent: int


Expr = Union[Const, Var, Unary, Binary, Power]

UNARY_FUNCS = ("sqrt", "exp", "log", "sin", "cos")


def _as_expr(v) -> Expr:
    if isinstance(v, Node):
        return v
    if isinstance(v, (int, float)):
        return Const(float(v))
    raise ExprError(f"cannot use {type(v).__name__} in an expression")


def sqrt(e) -> Expr:
    return Unary("sqrt", _as_expr(e))


def exp(e) -> Expr:
    return Unary("exp", _as_expr(e))


def log(e) -> Expr:
    return Unary("log", _as_expr(e))


def sin(e) -> Expr:
    return Unary("sin", _as_expr(e))


def cos(e) -> Expr:
    return Unary("cos", _as_expr(e))


def var(index: int) -> Expr:
    return Var(index)


def const(value: float) -> Expr:
    return Const(float(value))


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip trailing whitespace cleanly
            rest = source[pos:]
            if rest.strip() == "":
                break
            raise ExprError(f"unexpected character {rest.strip()[0]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise ExprError(f"expected {op!r}, found {text!r}", off)
        self.next()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected trailing input {text!r}", off)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                left = Binary(text, left, self.term())
            else:
                return left

    def term(self) -> Expr:
        left = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                left = Binary(text, left, self.unary())
            else:
                return left

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.next()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == "^":
                self.next()
                base = Power(base, self.int_exponent())
            else:
                return base

    def int_exponent(self) -> int:
        kind, text, off = self.peek()
        parenthesized = kind == "op" and text == "("
        if parenthesized:
            self.next()
            kind, text, off = self.peek()
        sign = 1
        if kind == "op" and text == "-":
            sign = -1
            self.next()
            kind, text, off = self.peek()
        if kind != "number" or any(c in text for c in ".eE"):
            raise ExprError("^ exponent must be an integer literal", off)
        self.next()
        if parenthesized:
            self.expect_op(")")
        return sign * int(text)

    def atom(self) -> Expr:
        kind, text, off = self.next()
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            if text in UNARY_FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(text, arg)
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= self.dim:
                    raise ExprError(
                        f"variable index out of range: {text} with dim={self.dim}", off
                    )
                return Var(index)
            raise ExprError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprError(f"unexpected token {text!r}", off)


def parse_expr(source: str, dim: int) -> Expr:
    """Parse ``source`` into an AST whose variables lie in ``1..dim``."""
    if not isinstance(source, str) or source.strip() == "":
        raise ExprError("empty expression")
    if dim < 1:
        raise ExprError("dim must be a positive integer")
    return _Parser(source, dim).parse()


# ---------------------------------------------------------------------------
# pretty printer (round-trips through parse_expr)
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _PREC["neg"] if e.op == "neg" else _PREC["atom"]
    if isinstance(e, Power):
        return _PREC["pow"]
    return _PREC["atom"]


def pretty(e: Expr) -> str:
    """Render an AST back to grammar text."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = pretty(e.arg)
            if _prec(e.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({pretty(e.arg)})"
    if isinstance(e, Power):
        base = pretty(e.base)
        # parenthesize everything below atom level, including unary minus
        if _prec(e.base) < _PREC["atom"]:
            base = f"({base})"
        return f"{base}^{e.exponent}" if e.exponent >= 0 else f"{base}^({e.exponent})"
    if isinstance(e, Binary):
        lp, rp = _prec(e.left), _prec(e.right)
        mine = _PREC[e.op]
        left = pretty(e.left)
        right = pretty(e.right)
        if lp < mine:
            left = f"({left})"
        # left associativity: right operand needs parens at equal precedence
        if rp < mine or (rp == mine and e.op in ("-", "/", "+", "*")):
            right = f"({right})"
        return f"{left}{e.op}{right}"
    raise TypeError(f"not an expression node: {e!r}")


def max_var_index(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Unary):
        return max_var_index(e.arg)
    if isinstance(e, Power):
        return max_var_index(e.base)
    if isinstance(e, Binary):
        return max(max_var_index(e.left), max_var_index(e.right))
    return 0


def eval_value(e: Expr, point) -> float:
    """Plain float evaluation, independent of the jet engine.

    Used by tests as the reference path behind the finite-difference oracle.
    Domain violations surface as math exceptions rather than typed errors.
    """
    import math

    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(point[e.index - 1])
    if isinstance(e, Unary):
        v = eval_value(e.arg, point)
        if e.op == "neg":
            return -v
        return getattr(math, e.op)(v)
    if isinstance(e, Power):
        return eval_value(e.base, point) ** e.exponent
    if isinstance(e, Binary):
        a = eval_value(e.left, point)
        b = eval_value(e.right, point)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# metric-definition files
# ---------------------------------------------------------------------------

from .phi import PhiSpec, PHI_FILE_FAMILIES, validate_phi_params  # noqa: E402


@dataclass
class MetricDef:
    """A chart-level metric definition: a_ij and b_i fields plus phi data.

    ``a`` is dim x dim of Expr (structurally symmetric), ``b`` is a list of
    dim Expr.  ``phi`` may be None for purely Riemannian work.
    """

    dim: int
    a: list
    b: list
    phi: PhiSpec | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ExprError("dim must be a positive integer")
        if len(self.a) != self.dim or any(len(row) != self.dim for row in self.a):
            raise ExprError("a must be a dim x dim matrix of expressions")
        if len(self.b) != self.dim:
            raise ExprError("b must have dim entries")
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if self.a[i][j] != self.a[j][i]:
                    raise ExprError(
                        f"a[{i+1}][{j+1}] and a[{j+1}][{i+1}] are not structurally equal"
                    )


_SECTION_RE = re.compile(r"\[([A-Za-z_][A-Za-z_0-9]*)\]")
_PAIR_RE = re.compile(r'([A-Za-z_][A-Za-z_0-9]*)\s*=\s*("(?:[^"\\]|\\.)*"|[^\s"]+)')


def _parse_sections(document: str) -> dict:
    """Split a sectioned key=value document into {section: {key: raw}}."""
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw_line in enumerate(document.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        pos = 0
        while pos < len(line):
            if line[pos] in " \t,":
                pos += 1
                continue
            sm = _SECTION_RE.match(line, pos)
            if sm:
                current = sm.group(1).lower()
                sections.setdefault(current, {})
                pos = sm.end()
                continue
            pm = _PAIR_RE.match(line, pos)
            if pm:
                if current is None:
                    raise ExprError(f"key outside any section on line {lineno}")
                key, value = pm.group(1).lower(), pm.group(2)
                if value.startswith('"'):
                    value = value[1:-1]
                sections[current][key] = value
                pos = pm.end()
                # skip separators
                while pos < len(line) and line[pos] in " \t,":
                    pos += 1
                continue
            raise ExprError(f"cannot parse line {lineno}: {line[pos:]!r}")
    return sections


def parse_metric_def(document: str) -> MetricDef:
    """Parse and validate a metric-definition document."""
    sections = _parse_sections(document)
    for required in ("chart", "alpha", "beta"):
        if required not in sections:
            raise ExprError(f"missing [{required}] section")
    try:
        dim = int(sections["chart"].get("dim", "2"))
    except ValueError:
        raise ExprError("chart dim must be an integer") from None
    if dim < 1:
        raise ExprError("chart dim must be positive")

    a: list[list[Expr | None]] = [[None] * dim for _ in range(dim)]
    for key, text in sections["alpha"].items():
        m = re.fullmatch(r"a(\d)(\d)", key)
        if not m:
            raise ExprError(f"unexpected key in [alpha]: {key}")
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        if not (0 <= i < dim and 0 <= j < dim):
            raise ExprError(f"a index out of range: {key}")
        a[i][j] = parse_expr(text, dim)
    for i in range(dim):
        for j in range(dim):
            if a[i][j] is None and a[j][i] is not None:
                a[i][j] = a[j][i]
            if a[i][j] is None:
                raise ExprError(f"missing a{i+1}{j+1} in [alpha]")
    for i in range(dim):
        for j in range(dim):
            if a[i][j] != a[j][i]:
                raise ExprError(f"a{i+1}{j+1} and a{j+1}{i+1} are not structurally equal")

    b: list[Expr | None] = [None] * dim
    for key, text in sections["beta"].items():
        m = re.fullmatch(r"b(\d)", key)
        if not m:
            raise ExprError(f"unexpected key in [beta]: {key}")
        i = int(m.group(1)) - 1
        if not 0 <= i < dim:
            raise ExprError(f"b index out of range: {key}")
        b[i] = parse_expr(text, dim)
    for i in range(dim):
        if b[i] is None:
            raise ExprError(f"missing b{i+1} in [beta]")

    phi = None
    if "phi" in sections:
        entries = dict(sections["phi"])
        family = entries.pop("family", None)
        if family is None:
            raise ExprError("[phi] section needs a family tag")
        if family not in PHI_FILE_FAMILIES:
            raise ExprError(f"unknown phi family {family!r}")
        params = {}
        for key, value in entries.items():
            if key not in ("c", "m", "k", "k1", "k2", "b"):
                raise ExprError(f"unexpected key in [phi]: {key}")
            try:
                params[key] = float(value)
            except ValueError:
                raise ExprError(f"[phi] {key} must be a number") from None
        phi = PhiSpec(family=family, **params)
        validate_phi_params(phi)

    return MetricDef(dim=dim, a=a, b=b, phi=phi)


def format_metric_def(md: MetricDef) -> str:
    """Serialize a MetricDef back to the sectioned file format."""
    lines = ["[chart]", f"dim = {md.dim}", "", "[alpha]"]
    for i in range(md.dim):
        for j in range(i, md.dim):
            lines.append(f'a{i+1}{j+1} = "{pretty(md.a[i][j])}"')
    lines.append("")
    lines.append("[beta]")
    for i in range(md.dim):
        lines.append(f'b{i+1} = "{pretty(md.b[i])}"')
    if md.phi is not None:
        lines.append("")
        lines.append("[phi]")
        lines.append(f'family = "{md.phi.family}"')
        for key in ("c", "m", "k", "k1", "k2", "b"):
            value = getattr(md.phi, key)
            if value is not None:
                lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"
