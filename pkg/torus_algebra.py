"""
Arithmetic in the ring F2[x,y]/(x^ell - 1, y^m - 1).

Every structure of a bivariate bicycle code (checks, qubit labels, logical
operator supports, shift automorphisms) is written as a polynomial in this
ring, so this module is the bottom of the dependency stack.
"""
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class ParameterError(ValueError):
    """Raised when objects living on different tori are combined."""


@dataclass(frozen=True)
class TorusParams:
    ell: int
    m: int

    def __post_init__(self):
        if int(self.ell) < 1 or int(self.m) < 1:
            raise ParameterError(f"torus dimensions must be positive, got ({self.ell}, {self.m})")

    @property
    def size(self) -> int:
        return self.ell * self.m

    def canon(self, i: int, j: int) -> "Monomial":
        return Monomial(i % self.ell, j % self.m)

    def index(self, mono: "Monomial") -> int:
        """Row-major position of a unit cell: j * ell + i."""
        return mono.j * self.ell + mono.i

    def monomial_at(self, index: int) -> "Monomial":
        j, i = divmod(index, self.ell)
        return Monomial(i, j)

    def monomials(self) -> Iterator["Monomial"]:
        for j in range(self.m):
            for i in range(self.ell):
                yield Monomial(i, j)


GROSS = TorusParams(12, 6)
TWO_GROSS = TorusParams(12, 12)


class Monomial(NamedTuple):
    i: int
    j: int

    def label(self) -> str:
        parts = []
        if self.i:
            parts.append("x" if self.i == 1 else f"x^{self.i}")
        if self.j:
            parts.append("y" if self.j == 1 else f"y^{self.j}")
        return "*".join(parts) if parts else "1"


ONE = Monomial(0, 0)

_TERM_RE = re.compile(r"(?:[xy](?:\^-?\d+)?)+")
_FACTOR_RE = re.compile(r"([xy])(?:\^(-?\d+))?")


@dataclass(frozen=True)
class BivariatePoly:
    params: TorusParams
    terms: frozenset = frozenset()

    # -------------------- constructors --------------------
    @classmethod
    def from_terms(cls, params: TorusParams, pairs: Iterable) -> "BivariatePoly":
        """
        Builds a polynomial from (i, j) exponent pairs. Negative exponents are
        reduced immediately and repeated terms cancel in pairs.
        """
        acc = set()
        for i, j in pairs:
            acc ^= {params.canon(i, j)}
        return cls(params, frozenset(acc))

    @classmethod
    def zero(cls, params: TorusParams) -> "BivariatePoly":
        return cls(params, frozenset())

    @classmethod
    def one(cls, params: TorusParams) -> "BivariatePoly":
        return cls(params, frozenset({ONE}))

    @classmethod
    def monomial(cls, params: TorusParams, i: int, j: int) -> "BivariatePoly":
        return cls(params, frozenset({params.canon(i, j)}))

    @classmethod
    def parse(cls, params: TorusParams, text: str) -> "BivariatePoly":
        """
        Parses literals such as "1+x+x^-1*y^-3". Terms are joined by '+', each
        term is '1' or a product of x^e / y^e factors (the '*' is optional).
        """
        src = text.replace(" ", "")
        if src in ("", "0"):
            return cls.zero(params)
        pairs = []
        for term in src.split("+"):
            if term == "1":
                pairs.append((0, 0))
                continue
            bare = term.replace("*", "")
            if not _TERM_RE.fullmatch(bare):
                raise ValueError(f"malformed polynomial term {term!r} in {text!r}")
            i = j = 0
            for var, exp in _FACTOR_RE.findall(bare):
                e = int(exp) if exp else 1
                if var == "x":
                    i += e
                else:
                    j += e
            pairs.append((i, j))
        return cls.from_terms(params, pairs)

    @classmethod
    def from_vector(cls, params: TorusParams, vec) -> "BivariatePoly":
        idx = np.flatnonzero(np.asarray(vec) & 1)
        return cls(params, frozenset(params.monomial_at(int(k)) for k in idx))

    # -------------------- ring operations --------------------
    def _check(self, other: "BivariatePoly"):
        if self.params != other.params:
            raise ParameterError(f"torus mismatch: {self.params} vs {other.params}")

    def __add__(self, other: "BivariatePoly") -> "BivariatePoly":
        self._check(other)
        return BivariatePoly(self.params, self.terms ^ other.terms)

    __sub__ = __add__

    def __mul__(self, other) -> "BivariatePoly":
        if isinstance(other, Monomial):
            return self.shift(other)
        self._check(other)
        acc = set()
        p = self.params
        for a in self.terms:
            for b in other.terms:
                acc ^= {p.canon(a.i + b.i, a.j + b.j)}
        return BivariatePoly(p, frozenset(acc))

    def __pow__(self, k: int) -> "BivariatePoly":
        out = BivariatePoly.one(self.params)
        for _ in range(k):
            out = out * self
        return out

    def shift(self, mono: Monomial) -> "BivariatePoly":
        p = self.params
        return BivariatePoly(p, frozenset(p.canon(t.i + mono.i, t.j + mono.j) for t in self.terms))

    def transpose(self) -> "BivariatePoly":
        p = self.params
        return BivariatePoly(p, frozenset(p.canon(-t.i, -t.j) for t in self.terms))

    @property
    def T(self) -> "BivariatePoly":
        return self.transpose()

    def contains_one(self) -> bool:
        return ONE in self.terms

    def contains(self, mono: Monomial) -> bool:
        return mono in self.terms

    # -------------------- views --------------------
    def __len__(self) -> int:
        return len(self.terms)

    @property
    def weight(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def sorted_terms(self) -> list:
        return sorted(self.terms)

    def to_vector(self) -> np.ndarray:
        vec = np.zeros(self.params.size, dtype=np.uint8)
        for t in self.terms:
            vec[self.params.index(t)] = 1
        return vec

    def to_matrix(self) -> np.ndarray:
        """
        Returns the (ell*m) x (ell*m) 0/1 matrix whose row alpha is the support
        of alpha * self.
        """
        p = self.params
        mat = np.zeros((p.size, p.size), dtype=np.uint8)
        for alpha in p.monomials():
            row = p.index(alpha)
            for t in self.terms:
                mat[row, p.index(p.canon(alpha.i + t.i, alpha.j + t.j))] = 1
        return mat

    def to_str(self) -> str:
        if not self.terms:
            return "0"
        return "+".join(t.label() for t in self.sorted_terms())

    def __str__(self) -> str:
        return self.to_str()


# -------------------- functional interface --------------------
def mul(a: BivariatePoly, b: BivariatePoly) -> BivariatePoly:
    return a * b


def add(a: BivariatePoly, b: BivariatePoly) -> BivariatePoly:
    return a + b


def transpose(a: BivariatePoly) -> BivariatePoly:
    return a.transpose()


def contains_one(a: BivariatePoly) -> bool:
    return a.contains_one()


def poly(params: TorusParams, text: str) -> BivariatePoly:
    return BivariatePoly.parse(params, text)


def monomial_poly(params: TorusParams, mono: Monomial) -> BivariatePoly:
    return BivariatePoly(params, frozenset({params.canon(mono.i, mono.j)}))
