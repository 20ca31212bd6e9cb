"""Reduced words in free groups.

A word is stored as a tuple of ``(generator, power)`` syllables with no
zero powers and no two adjacent syllables on the same generator, so equality
of ``Word`` objects is equality in the free group.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

_SUPERSCRIPT = str.maketrans("-0123456789", "⁻⁰¹²³⁴⁵⁶⁷⁸⁹")


def _reduce(syllables: Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    stack: list[tuple[str, int]] = []
    for gen, power in syllables:
        if power == 0:
            continue
        if stack and stack[-1][0] == gen:
            merged = stack[-1][1] + power
            stack.pop()
            if merged != 0:
                stack.append((gen, merged))
        else:
            stack.append((gen, power))
    return tuple(stack)


@dataclass(frozen=True)
class Word:
    syllables: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "syllables", _reduce(self.syllables))

    @classmethod
    def gen(cls, name: str, power: int = 1) -> "Word":
        return cls(((name, int(power)),))

    @classmethod
    def parse(cls, text: str) -> "Word":
        """Parse ``"a b^-1 a^3"`` (whitespace or ``*`` separated)."""
        syllables = []
        for token in text.replace("*", " ").split():
            if "^" in token:
                name, power = token.split("^", 1)
                syllables.append((name, int(power)))
            else:
                syllables.append((token, 1))
        return cls(tuple(syllables))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.syllables + other.syllables)

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return self.inverse() ** (-n)
        return Word(self.syllables * n)

    def inverse(self) -> "Word":
        return Word(tuple((g, -p) for g, p in reversed(self.syllables)))

    def is_identity(self) -> bool:
        return not self.syllables

    def generators(self) -> set[str]:
        return {g for g, _ in self.syllables}

    def exponent_sums(self) -> dict[str, int]:
        sums: Counter = Counter()
        for g, p in self.syllables:
            sums[g] += p
        return dict(sums)

    def letters(self) -> list[tuple[str, int]]:
        """Expand into single letters ``(gen, +1 | -1)``."""
        out = []
        for g, p in self.syllables:
            out.extend([(g, 1 if p > 0 else -1)] * abs(p))
        return out

    def __len__(self) -> int:
        return sum(abs(p) for _, p in self.syllables)

    def __str__(self) -> str:
        if not self.syllables:
            return "e"
        return " ".join(g if p == 1 else f"{g}^{p}" for g, p in self.syllables)

    def pretty(self) -> str:
        if not self.syllables:
            return "e"
        return "".join(g if p == 1 else g + str(p).translate(_SUPERSCRIPT) for g, p in self.syllables)


IDENTITY = Word()
