"""Chemical formula parsing into rational compositions.

Grammar::

    Formula := (Element Count? | '(' Formula ')' Count?)+
    Element := uppercase letter, optional lowercase letter
    Count   := decimal number, e.g. 2, 0.5, 1.25
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

ELEMENT_SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu "
    "Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba "
    "La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi "
    "Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds "
    "Rg Cn Nh Fl Mc Lv Ts Og"
).split()
_KNOWN = frozenset(ELEMENT_SYMBOLS)


class FormulaError(ValueError):
    """Base class for formula parse failures; carries the offending position."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position


class EmptyFormulaError(FormulaError):
    pass


class UnknownElementError(FormulaError):
    pass


class UnbalancedParenthesisError(FormulaError):
    pass


@dataclass(frozen=True)
class Composition:
    """Element amounts of one formula unit."""

    amounts: dict[str, Fraction]

    def __post_init__(self):
        if not self.amounts:
            raise ValueError("composition must contain at least one element")
        if any(v <= 0 for v in self.amounts.values()):
            raise ValueError("element amounts must be positive")

    @property
    def elements(self) -> list[str]:
        return list(self.amounts)

    @property
    def weights(self) -> dict[str, float]:
        """Atomic fractions, summing to one."""
        total = sum(self.amounts.values())
        return {el: float(v / total) for el, v in self.amounts.items()}

    def reduced(self) -> "Composition":
        """Smallest integer formula with the same element ratios."""
        lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in self.amounts.values()), 1)
        ints = {el: int(v * lcm) for el, v in self.amounts.items()}
        g = reduce(math.gcd, ints.values())
        return Composition({el: Fraction(n // g) for el, n in ints.items()})

    def reduced_key(self) -> tuple[tuple[str, int], ...]:
        """Hashable key identifying the reduced composition."""
        return tuple(sorted((el, int(v)) for el, v in self.reduced().amounts.items()))

    def scaled(self, factor) -> "Composition":
        factor = Fraction(factor)
        return Composition({el: v * factor for el, v in self.amounts.items()})

    def formula(self) -> str:
        parts = []
        for el, v in self.amounts.items():
            if v == 1:
                parts.append(el)
            elif v.denominator == 1:
                parts.append(f"{el}{v.numerator}")
            else:
                parts.append(f"{el}{float(v):g}")
        return "".join(parts)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def parse(self) -> dict[str, Fraction]:
        if not self.text.strip():
            raise EmptyFormulaError("empty formula", self.text, 0)
        amounts = self._group(depth=0)
        if self.pos != len(self.text):
            ch = self.text[self.pos]
            if ch == ")":
                raise UnbalancedParenthesisError("unmatched ')'", self.text, self.pos)
            raise FormulaError(f"unexpected character {ch!r}", self.text, self.pos)
        return amounts

    def _group(self, depth: int) -> dict[str, Fraction]:
        amounts: dict[str, Fraction] = {}
        start = self.pos
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "(":
                open_pos = self.pos
                self.pos += 1
                inner = self._group(depth + 1)
                if self.pos >= len(text) or text[self.pos] != ")":
                    raise UnbalancedParenthesisError("unclosed '('", text, open_pos)
                self.pos += 1
                mult = self._count()
                for el, v in inner.items():
                    amounts[el] = amounts.get(el, Fraction(0)) + v * mult
            elif ch == ")":
                if depth == 0:
                    raise UnbalancedParenthesisError("unmatched ')'", text, self.pos)
                break
            elif ch.isupper():
                el_pos = self.pos
                self.pos += 1
                if self.pos < len(text) and text[self.pos].islower():
                    self.pos += 1
                symbol = text[el_pos:self.pos]
                if symbol not in _KNOWN:
                    raise UnknownElementError(f"unknown element {symbol!r}", text, el_pos)
                amounts[symbol] = amounts.get(symbol, Fraction(0)) + self._count()
            else:
                raise FormulaError(f"unexpected character {ch!r}", text, self.pos)
        if self.pos == start:
            raise EmptyFormulaError("empty group", text, start)
        return amounts

    def _count(self) -> Fraction:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        token = text[start:self.pos]
        if not token:
            return Fraction(1)
        try:
            value = Fraction(token)
        except ValueError:
            raise FormulaError(f"bad count {token!r}", text, start) from None
        if value <= 0:
            raise FormulaError("count must be positive", text, start)
        return value


def parse_formula(text: str) -> Composition:
    """Parse ``text`` such as ``"Ca(OH)2"`` into a :class:`Composition`."""
    return Composition(_Parser(text).parse())
