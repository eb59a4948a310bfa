"""Analytic translation expressions t_j(u) and their derivative jets.

The expression grammar is deliberately closed so that everything it can
denote is real-analytic wherever it is defined:

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' signed-number)?
    unary   := '-' unary | atom
    atom    := number | 'u' | 'pi' | ident '(' expr ')'
             | 'pow' '(' expr ',' signed-number ')' | '(' expr ')'

with ident one of sin, cos, exp, log.  Note the precedence order
unary minus > '^' > '*','/' > '+','-', so "-u^2" means "(-u)^2".
Exponents are numeric literals, keeping the grammar closed under
differentiation.

Derivatives are computed in Taylor mode (series composition for sin, cos,
exp, log; Leibniz and quotient rules for products and ratios) and reported
as plain derivatives d^k/du^k, matching how the order-K transversality
condition is stated; the k! conversion stays internal.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Param:
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str  # sin cos exp log
    arg: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float
    pos: int = field(default=-1, compare=False)


Expr = Num | Param | Neg | Bin | Call | Pow

_FUNCTIONS = ("sin", "cos", "exp", "log")


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        self.pos = pos
        super().__init__(f"{message} at offset {pos}")


class EvalDomainError(ArithmeticError):
    """log of a nonpositive value or division by zero inside an expression."""

    def __init__(self, message: str, pos: int):
        self.pos = pos
        where = f" at offset {pos}" if pos >= 0 else ""
        super().__init__(f"{message}{where}")


# ---------------------------------------------------------------------------
# Lexer / parser

_NUMBER_RE = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")


class _Lexer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def peek(self):
        i = self.pos
        while i < len(self.src) and self.src[i].isspace():
            i += 1
        if i >= len(self.src):
            return ("end", None, i)
        mnum = _NUMBER_RE.match(self.src, i)
        if mnum:
            return ("num", float(mnum.group(0)), i, mnum.end())
        ch = self.src[i]
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(self.src) and (self.src[j].isalnum() or self.src[j] == "_"):
                j += 1
            return ("ident", self.src[i:j], i, j)
        if ch in "+-*/^(),":
            return ("op", ch, i, i + 1)
        raise ParseError(f"unexpected character {ch!r}", i)

    def next(self):
        tok = self.peek()
        self.pos = tok[3] if len(tok) == 4 else tok[2]
        return tok


class _Parser:
    def __init__(self, src: str):
        self.lx = _Lexer(src)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.lx.peek()[:3]
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while True:
            tok = self.lx.peek()
            if tok[0] == "op" and tok[1] in "+-":
                self.lx.next()
                node = Bin(tok[1], node, self.term(), pos=tok[2])
            else:
                return node

    def term(self) -> Expr:
        node = self.power()
        while True:
            tok = self.lx.peek()
            if tok[0] == "op" and tok[1] in "*/":
                self.lx.next()
                node = Bin(tok[1], node, self.power(), pos=tok[2])
            else:
                return node

    def power(self) -> Expr:
        base = self.unary()
        tok = self.lx.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.lx.next()
            return Pow(base, self.signed_number(), pos=tok[2])
        return base

    def unary(self) -> Expr:
        tok = self.lx.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.lx.next()
            return Neg(self.unary(), pos=tok[2])
        return self.atom()

    def signed_number(self) -> float:
        tok = self.lx.peek()
        sign = 1.0
        if tok[0] == "op" and tok[1] == "-":
            self.lx.next()
            sign = -1.0
            tok = self.lx.peek()
        if tok[0] != "num":
            raise ParseError("exponent must be a numeric literal", tok[2])
        self.lx.next()
        return sign * tok[1]

    def expect(self, ch: str):
        tok = self.lx.peek()
        if tok[0] != "op" or tok[1] != ch:
            raise ParseError(f"expected {ch!r}", tok[2])
        self.lx.next()

    def atom(self) -> Expr:
        tok = self.lx.peek()
        kind, val, pos = tok[:3]
        if kind == "num":
            self.lx.next()
            return Num(val, pos=pos)
        if kind == "ident":
            self.lx.next()
            if val == "u":
                return Param(pos=pos)
            if val == "pi":
                return Num(math.pi, pos=pos)
            if val == "pow":
                self.expect("(")
                arg = self.expr()
                self.expect(",")
                exponent = self.signed_number()
                self.expect(")")
                return Pow(arg, exponent, pos=pos)
            if val in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg, pos=pos)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            self.lx.next()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_expr(src: str) -> Expr:
    """Parse an expression in the parameter u; errors carry byte offsets."""
    return _Parser(src).parse()


def _prec(node: Expr) -> int:
    if isinstance(node, Bin):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Pow):
        return 3
    if isinstance(node, Neg):
        return 4
    return 5


def to_string(node: Expr) -> str:
    """Canonical printer; parse(to_string(parse(s))) == parse(s)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Param):
        return "u"
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 4 else f"-({inner})"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if _prec(node.base) < 4:
            base = f"({base})"
        return f"{base}^{node.exponent!r}"
    if isinstance(node, Call):
        return f"{node.fn}({to_string(node.arg)})"
    if isinstance(node, Bin):
        mine = _prec(node)
        lhs = to_string(node.lhs)
        if _prec(node.lhs) < mine:
            lhs = f"({lhs})"
        rhs = to_string(node.rhs)
        if _prec(node.rhs) < mine or (_prec(node.rhs) == mine and node.op in "-/"):
            rhs = f"({rhs})"
        return f"{lhs} {node.op} {rhs}"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation: plain and Taylor-mode

def evaluate(node: Expr, u: float) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Param):
        return float(u)
    if isinstance(node, Neg):
        return -evaluate(node.arg, u)
    if isinstance(node, Bin):
        a, b = evaluate(node.lhs, u), evaluate(node.rhs, u)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0.0:
            raise EvalDomainError("division by zero", node.pos)
        return a / b
    if isinstance(node, Call):
        x = evaluate(node.arg, u)
        if node.fn == "log":
            if x <= 0.0:
                raise EvalDomainError(f"log of nonpositive value {x!r}", node.pos)
            return math.log(x)
        return getattr(math, node.fn)(x)
    if isinstance(node, Pow):
        x = evaluate(node.base, u)
        r = node.exponent
        if r == int(r):
            if x == 0.0 and r < 0:
                raise EvalDomainError("zero base with negative exponent", node.pos)
            return x ** int(r)
        if x <= 0.0:
            raise EvalDomainError(f"fractional power of nonpositive value {x!r}", node.pos)
        return x ** r
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class Jet:
    """Value and plain derivatives d^0..d^K of an expression at a point."""

    coeffs: np.ndarray  # length K+1, coeffs[k] = k-th derivative

    def __post_init__(self):
        self.coeffs.flags.writeable = False

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def deriv(self, k: int) -> float:
        return float(self.coeffs[k])


# Taylor-coefficient kernels; arrays of length K+1 with a[k] = f^(k)/k!.

def _t_mul(a, b):
    K = len(a) - 1
    out = np.zeros(K + 1)
    for n in range(K + 1):
        out[n] = a[: n + 1] @ b[n::-1]
    return out


def _t_div(a, b, pos):
    if b[0] == 0.0:
        raise EvalDomainError("division by zero", pos)
    K = len(a) - 1
    q = np.zeros(K + 1)
    for n in range(K + 1):
        acc = a[n]
        for k in range(1, n + 1):
            acc -= b[k] * q[n - k]
        q[n] = acc / b[0]
    return q


def _t_exp(f):
    K = len(f) - 1
    g = np.zeros(K + 1)
    g[0] = math.exp(f[0])
    for n in range(1, K + 1):
        g[n] = sum(k * f[k] * g[n - k] for k in range(1, n + 1)) / n
    return g


def _t_log(f, pos):
    if f[0] <= 0.0:
        raise EvalDomainError(f"log of nonpositive value {float(f[0])!r}", pos)
    K = len(f) - 1
    g = np.zeros(K + 1)
    g[0] = math.log(f[0])
    for n in range(1, K + 1):
        acc = f[n] - sum(k * g[k] * f[n - k] for k in range(1, n)) / n
        g[n] = acc / f[0]
    return g


def _t_sin_cos(f):
    K = len(f) - 1
    s = np.zeros(K + 1)
    c = np.zeros(K + 1)
    s[0], c[0] = math.sin(f[0]), math.cos(f[0])
    for n in range(1, K + 1):
        s[n] = sum(k * f[k] * c[n - k] for k in range(1, n + 1)) / n
        c[n] = -sum(k * f[k] * s[n - k] for k in range(1, n + 1)) / n
    return s, c


def _t_ipow(f, r: int, pos):
    K = len(f) - 1
    out = np.zeros(K + 1)
    out[0] = 1.0
    base = f.copy()
    e = abs(r)
    while e:
        if e & 1:
            out = _t_mul(out, base)
        base = _t_mul(base, base)
        e >>= 1
    if r < 0:
        one = np.zeros(K + 1)
        one[0] = 1.0
        out = _t_div(one, out, pos)
    return out


def _taylor(node: Expr, u: float, K: int) -> np.ndarray:
    if isinstance(node, Num):
        out = np.zeros(K + 1)
        out[0] = node.value
        return out
    if isinstance(node, Param):
        out = np.zeros(K + 1)
        out[0] = float(u)
        if K >= 1:
            out[1] = 1.0
        return out
    if isinstance(node, Neg):
        return -_taylor(node.arg, u, K)
    if isinstance(node, Bin):
        a = _taylor(node.lhs, u, K)
        b = _taylor(node.rhs, u, K)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return _t_mul(a, b)
        return _t_div(a, b, node.pos)
    if isinstance(node, Call):
        f = _taylor(node.arg, u, K)
        if node.fn == "exp":
            return _t_exp(f)
        if node.fn == "log":
            return _t_log(f, node.pos)
        s, c = _t_sin_cos(f)
        return s if node.fn == "sin" else c
    if isinstance(node, Pow):
        f = _taylor(node.base, u, K)
        r = node.exponent
        if r == int(r):
            return _t_ipow(f, int(r), node.pos)
        if f[0] <= 0.0:
            raise EvalDomainError(
                f"fractional power of nonpositive value {float(f[0])!r}", node.pos)
        return _t_exp(r * _t_log(f, node.pos))
    raise TypeError(f"not an expression node: {node!r}")


_FACTORIALS = [math.factorial(k) for k in range(32)]


def _factorials(K: int) -> np.ndarray:
    while len(_FACTORIALS) <= K:
        _FACTORIALS.append(_FACTORIALS[-1] * len(_FACTORIALS))
    return np.array(_FACTORIALS[: K + 1], dtype=float)


def eval_jet(node: Expr, u: float, K: int) -> Jet:
    """Plain derivatives d^0..d^K of the expression at u."""
    if K < 0:
        raise ValueError("jet order must be >= 0")
    coeffs = _taylor(node, u, K) * _factorials(K)
    if not np.all(np.isfinite(coeffs)):
        raise EvalDomainError("non-finite derivative", getattr(node, "pos", -1))
    return Jet(coeffs)


# ---------------------------------------------------------------------------
# Parametrised families


class ParamIFS:
    """Similitudes lambda_j x + t_j(u) with constant ratios, analytic t_j.

    Translations are expressions in u (1D systems) or pairs of expressions
    (planar systems).  Contraction ratios do not depend on u; families with
    u-dependent ratios are out of scope.
    """

    def __init__(self, lambdas, translations, weights=None, domain=(0.0, 1.0)):
        self.lambdas = tuple(float(x) for x in lambdas)
        if any(not (0.0 < x < 1.0) for x in self.lambdas):
            raise ValueError("ratios must lie in (0,1)")
        trs = []
        dims = set()
        for t in translations:
            if isinstance(t, str):
                t = parse_expr(t)
            if isinstance(t, (tuple, list)):
                tx, ty = t
                tx = parse_expr(tx) if isinstance(tx, str) else tx
                ty = parse_expr(ty) if isinstance(ty, str) else ty
                trs.append((tx, ty))
                dims.add(2)
            else:
                trs.append(t)
                dims.add(1)
        if len(dims) != 1:
            raise ValueError("mixed 1D and 2D translations")
        self.translations = tuple(trs)
        self.dim = dims.pop()
        if len(self.translations) != len(self.lambdas):
            raise ValueError(f"{len(self.translations)} translations for "
                             f"{len(self.lambdas)} ratios")
        if weights is None:
            weights = [1.0 / len(self.lambdas)] * len(self.lambdas)
        w = np.asarray(weights, dtype=float)
        if len(w) != len(self.lambdas) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a positive probability vector "
                             "matching the maps")
        self.weights = w
        a, b = float(domain[0]), float(domain[1])
        if not a < b:
            raise ValueError(f"empty parameter interval [{a}, {b}]")
        self.domain = (a, b)

    @property
    def m(self) -> int:
        return len(self.lambdas)

    def freeze(self, u: float):
        """Evaluate the translations at u, producing a plain IFS."""
        from .ifs_core import IFS, Similitude

        maps = []
        for lam, t in zip(self.lambdas, self.translations):
            if self.dim == 1:
                maps.append(Similitude(lam, evaluate(t, u)))
            else:
                maps.append(Similitude(lam, (evaluate(t[0], u), evaluate(t[1], u))))
        return IFS(maps, self.weights)

    def translation_jets(self, u: float, K: int) -> list[Jet]:
        if self.dim != 1:
            raise ValueError("jets are defined for 1D families only")
        return [eval_jet(t, u, K) for t in self.translations]


def compose_jet_at_zero(fam: ParamIFS, w, u: float, K: int) -> Jet:
    """Jet of u -> psi_{u,w}(0); linear in the translation jets since the
    ratios are constant."""
    jets = fam.translation_jets(u, K)
    acc = np.zeros(K + 1)
    prefix = 1.0
    for s in w:
        if not 1 <= s <= fam.m:
            raise ValueError(f"symbol {s} out of range 1..{fam.m}")
        acc += prefix * jets[s - 1].coeffs
        prefix *= fam.lambdas[s - 1]
    return Jet(acc)


def family_delta_jet(fam: ParamIFS, i, j, u: float, K: int) -> Jet:
    """Jet of Delta_{i,j}(u) = psi_{u,i}(0) - psi_{u,j}(0), |i| = |j|."""
    if len(i) != len(j):
        raise ValueError(f"word lengths differ: {len(i)} vs {len(j)}")
    a = compose_jet_at_zero(fam, i, u, K)
    b = compose_jet_at_zero(fam, j, u, K)
    return Jet(a.coeffs - b.coeffs)
