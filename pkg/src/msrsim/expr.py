"""Tiny closed expression language for step-indexed scripts.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | NAME | call | '(' expr ')'
    call   := 'sqrt' '(' expr ')' | 'parity' '(' expr ',' expr ')'

``parity(a, b)`` is a on even steps and b on odd ones. Names are the step
index ``k`` plus whatever constants the caller binds (``T`` and ``r`` for
scenarios). Nothing else is reachable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(.))")
_FUNCS = {"sqrt": 1, "parity": 2}


class ExprError(ValueError):
    pass


def _tokenize(src: str) -> list[tuple[str, str]]:
    toks = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        num, name, op = m.groups()
        if num is not None:
            toks.append(("num", num))
        elif name is not None:
            toks.append(("name", name))
        elif op in "+-*/(),":
            toks.append(("op", op))
        else:
            raise ExprError(f"unexpected character {op!r} in {src!r}")
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, src: str, names: frozenset[str]):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, want: str | None = None):
        tok = self.peek()
        if tok[0] is None or (want is not None and tok[1] != want):
            raise ExprError(f"expected {want or 'more input'} in {self.src!r}")
        self.i += 1
        return tok

    def parse(self) -> str:
        out = self.expr()
        if self.i != len(self.toks):
            raise ExprError(f"trailing input {self.toks[self.i][1]!r} in {self.src!r}")
        return out

    def expr(self) -> str:
        out = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            out = f"({out} {self.take()[1]} {self.term()})"
        return out

    def term(self) -> str:
        out = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            out = f"({out} {self.take()[1]} {self.unary()})"
        return out

    def unary(self) -> str:
        if self.peek() == ("op", "-"):
            self.take()
            return f"(-{self.unary()})"
        return self.atom()

    def atom(self) -> str:
        kind, val = self.take()
        if kind == "num":
            return repr(float(val))
        if kind == "name":
            if val in _FUNCS:
                self.take("(")
                args = [self.expr()]
                for _ in range(_FUNCS[val] - 1):
                    self.take(",")
                    args.append(self.expr())
                self.take(")")
                if val == "sqrt":
                    return f"_sqrt({args[0]})"
                return f"({args[0]} if k % 2 == 0 else {args[1]})"
            if val not in self.names:
                raise ExprError(f"unknown name {val!r} in {self.src!r}; allowed: {sorted(self.names)}")
            return val
        if val == "(":
            out = self.expr()
            self.take(")")
            return out
        raise ExprError(f"unexpected {val!r} in {self.src!r}")


def _sqrt(x: float) -> float:
    if x < 0:
        raise ExprError(f"sqrt of negative value {x}")
    return math.sqrt(x)


@dataclass(frozen=True)
class Expr:
    """A parsed expression; equality and hashing go by source text."""

    source: str
    names: frozenset[str] = frozenset({"k", "T", "r"})
    _py: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        src = str(self.source).strip()
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "_py", _Parser(src, self.names).parse())

    @classmethod
    def coerce(cls, value) -> "Expr":
        if isinstance(value, Expr):
            return value
        if isinstance(value, bool):
            raise ExprError(f"expected a number or expression, got {value!r}")
        if isinstance(value, (int, float)):
            return cls(repr(float(value)))
        return cls(str(value))

    def bind(self, **consts: float) -> Callable[[int], float]:
        """Compile to a function of the step index with the constants fixed."""
        missing = self.names - {"k"} - set(consts)
        if missing:
            raise ExprError(f"unbound names {sorted(missing)} in {self.source!r}")
        args = ", ".join(["k"] + [f"{name}={float(consts[name])!r}" for name in sorted(self.names - {"k"})])
        code = compile(f"lambda {args}: {self._py}", "<expr>", "eval")
        return eval(code, {"__builtins__": {}, "_sqrt": _sqrt})

    def __call__(self, k: int, **consts: float) -> float:
        return float(self.bind(**consts)(k))

    def __str__(self) -> str:
        return self.source
