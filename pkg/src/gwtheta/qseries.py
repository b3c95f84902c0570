"""Sparse exact power series in q with rational exponents.

Coefficients and exponents are `fractions.Fraction`; no floating point
enters anywhere.  A series knows its truncation order: all terms with
exponent <= order are present and exact, nothing is claimed beyond it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Tuple

QNum = Fraction | int


def _frac(x: QNum) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class OrderError(ValueError):
    """Comparison requested beyond the guaranteed truncation order."""


@dataclass(frozen=True)
class Discrepancy:
    """First disagreeing term of a failed series comparison."""

    exponent: Fraction
    left: Fraction
    right: Fraction

    def __str__(self) -> str:
        return f"q^{self.exponent}: {self.left} != {self.right}"


@dataclass(frozen=True)
class QSeries:
    """Truncated q-series with exact rational terms.

    `terms` maps exponent -> coefficient; zero coefficients are never
    stored.  `order` is the largest exponent up to which the series is
    guaranteed complete.
    """

    terms: Mapping[Fraction, Fraction] = field(default_factory=dict)
    order: Fraction = Fraction(10**9)

    def __post_init__(self):
        clean = {}
        for e, c in self.terms.items():
            e = _frac(e)
            c = _frac(c)
            if c != 0 and e <= self._order_frac():
                clean[e] = c
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "order", self._order_frac())

    def _order_frac(self) -> Fraction:
        return _frac(self.order)

    @staticmethod
    def from_terms(pairs: Iterable[Tuple[QNum, QNum]], order: QNum) -> "QSeries":
        acc: dict[Fraction, Fraction] = {}
        for e, c in pairs:
            e = _frac(e)
            acc[e] = acc.get(e, Fraction(0)) + _frac(c)
        return QSeries(acc, _frac(order))

    def coeff(self, e: QNum) -> Fraction:
        e = _frac(e)
        if e > self.order:
            raise OrderError(f"coefficient of q^{e} beyond order {self.order}")
        return self.terms.get(e, Fraction(0))

    def __add__(self, other: "QSeries") -> "QSeries":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return QSeries(out, min(self.order, other.order))

    def __sub__(self, other: "QSeries") -> "QSeries":
        return self + other.scale(-1)

    def scale(self, c: QNum) -> "QSeries":
        c = _frac(c)
        if c == 0:
            return QSeries({}, self.order)
        return QSeries({e: co * c for e, co in self.terms.items()}, self.order)

    def shift(self, r: QNum) -> "QSeries":
        """Multiply by q^r: every exponent and the order move by r."""
        r = _frac(r)
        return QSeries({e + r: c for e, c in self.terms.items()}, self.order + r)

    def truncate(self, order: QNum) -> "QSeries":
        order = _frac(order)
        if order > self.order:
            raise OrderError(f"cannot extend order {self.order} to {order}")
        return QSeries({e: c for e, c in self.terms.items() if e <= order}, order)

    def items(self) -> list[Tuple[Fraction, Fraction]]:
        return sorted(self.terms.items())

    def leading(self, k: int = 5) -> list[Tuple[Fraction, Fraction]]:
        return self.items()[:k]

    def is_zero(self) -> bool:
        return not self.terms

    def equal_to_order(self, other: "QSeries", n: QNum) -> Tuple[bool, Optional[Discrepancy]]:
        """Exact comparison of all coefficients with exponent <= n.

        Returns (True, None) on agreement, else (False, first discrepancy).
        Raises OrderError if n exceeds either series' guaranteed order.
        """
        n = _frac(n)
        if n > self.order or n > other.order:
            raise OrderError(
                f"comparison to order {n} exceeds orders ({self.order}, {other.order})"
            )
        exps = sorted(
            e for e in set(self.terms) | set(other.terms) if e <= n
        )
        for e in exps:
            a = self.terms.get(e, Fraction(0))
            b = other.terms.get(e, Fraction(0))
            if a != b:
                return False, Discrepancy(e, a, b)
        return True, None

    def evaluate(self, q: complex) -> complex:
        """Numerical value of the truncated series at a point q."""
        return sum(complex(c) * q ** float(e) for e, c in self.items())

    def to_json(self) -> str:
        rows = [
            {
                "num": e.numerator,
                "den": e.denominator,
                "coeff_num": c.numerator,
                "coeff_den": c.denominator,
            }
            for e, c in self.items()
        ]
        return json.dumps(rows)

    @staticmethod
    def from_json(text: str, order: QNum = Fraction(10**9)) -> "QSeries":
        rows = json.loads(text)
        terms = {
            Fraction(r["num"], r["den"]): Fraction(r["coeff_num"], r["coeff_den"])
            for r in rows
        }
        return QSeries(terms, _frac(order))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["exponent", "coefficient"])
        for e, c in self.items():
            w.writerow([str(e), str(c)])
        return buf.getvalue()

    def __str__(self) -> str:
        if not self.terms:
            return f"0 + O(q^{self.order})"
        parts = [f"{c}*q^({e})" for e, c in self.items()[:8]]
        tail = " + ..." if len(self.terms) > 8 else ""
        return " + ".join(parts) + tail + f" + O(q^{self.order})"
