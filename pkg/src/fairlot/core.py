"""Exact-rational data model: instances, allocations, lotteries and their JSON forms.

Everything in this module is immutable and arithmetically exact (``fractions.Fraction``).
Floats never enter through the JSON loaders: decimal literals are parsed digit-exactly,
so ``0.6`` becomes 3/5, not the nearest binary float.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

GOODS = "goods"
BADS = "bads"
MIXED = "mixed"

ZERO = Fraction(0)
ONE = Fraction(1)


class FairlotError(Exception):
    """Base class for all library errors."""


class InputError(FairlotError):
    """Malformed or inconsistent input (parse errors, dimension mismatches, bad matrices)."""


class ZeroUtilityError(InputError):
    """A utility-ratio condition is undefined because an agent's bundle value has the wrong sign."""


class KindMismatchError(FairlotError):
    """A property notion or solver was applied to an instance kind it is not defined for."""


class SizeLimitError(FairlotError):
    """An enumeration or support cap was exceeded."""


class SolveError(FairlotError):
    """A numeric solve failed to reach its tolerance or verification failed."""


def parse_rational(value: int | str | Fraction) -> Fraction:
    """Parse an exact rational from an int, a ``"p/q"`` string, or a decimal string.

    >>> parse_rational("3/5"), parse_rational("0.6"), parse_rational(2)
    (Fraction(3, 5), Fraction(3, 5), Fraction(2, 1))
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"not a rational value: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # Floats should not appear (the JSON loaders intercept them); go through the
        # repr so a stray 0.6 still means 3/5 rather than its binary neighbour.
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational value: {value!r}") from exc
    raise InputError(f"not a rational value: {value!r}")


def format_rational(q: Fraction) -> str:
    """Render a rational as ``"p/q"`` (or ``"p"`` for integers); inverse of parse_rational."""
    return str(q)


def floor(q: Fraction) -> int:
    return math.floor(q)


def ceil(q: Fraction) -> int:
    return math.ceil(q)


def ordinal_preferences(rows: Sequence[Sequence[Fraction]]) -> tuple[tuple[int, ...], ...]:
    """Per-agent item orders: by value descending, ties by ascending item index."""
    return tuple(
        tuple(sorted(range(len(row)), key=lambda j: (-row[j], j))) for row in rows
    )


@dataclass(frozen=True)
class Instance:
    """A fair-division instance: additive valuations of n agents over m items.

    The kind is derived from the signs of the values: all nonnegative means goods
    (and then every item must have at least one agent valuing it positively),
    all nonpositive means bads, anything else is mixed manna.
    """

    values: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise InputError("instance needs at least one agent")
        m = len(self.values[0])
        for row in self.values:
            if len(row) != m:
                raise InputError("value rows have inconsistent lengths")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int | str | Fraction]]) -> "Instance":
        return cls(tuple(tuple(parse_rational(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.values[0])

    @cached_property
    def kind(self) -> str:
        has_pos = any(v > 0 for row in self.values for v in row)
        has_neg = any(v < 0 for row in self.values for v in row)
        if has_neg and has_pos:
            return MIXED
        if has_neg:
            return BADS
        # goods: every column must have a strictly positive entry
        for j in range(self.m):
            if all(self.values[i][j] == 0 for i in range(self.n)):
                raise InputError(f"goods instance has no agent valuing item {j} positively")
        return GOODS

    @cached_property
    def prefs(self) -> tuple[tuple[int, ...], ...]:
        """Ordinal preferences induced by the values (value-descending, index tie-break)."""
        return ordinal_preferences(self.values)

    def utility(self, i: int, bundle: Sequence[Fraction]) -> Fraction:
        """Additive value of agent i for a (possibly fractional) bundle row."""
        row = self.values[i]
        if len(bundle) != len(row):
            raise InputError("bundle length does not match item count")
        return sum((row[j] * x for j, x in enumerate(bundle)), ZERO)

    def bundle_value(self, i: int, items: Iterable[int]) -> Fraction:
        row = self.values[i]
        return sum((row[j] for j in items), ZERO)

    def total_value(self, i: int) -> Fraction:
        return sum(self.values[i], ZERO)

    def proportional_share(self, i: int) -> Fraction:
        return self.total_value(i) / self.n


def utility(instance: Instance, i: int, bundle: Sequence[Fraction]) -> Fraction:
    return instance.utility(i, bundle)


def sd_dominates(
    prefs: Sequence[Sequence[int]], i: int, p: Sequence[Fraction], q: Sequence[Fraction]
) -> bool:
    """Whether bundle vector ``p`` stochastically dominates ``q`` for agent i.

    Prefix masses are compared along agent i's ordinal order: every prefix of p
    must carry at least as much mass as the same prefix of q.
    """
    if len(p) != len(q) or len(p) != len(prefs[i]):
        raise InputError("bundle length does not match item count")
    cp = ZERO
    cq = ZERO
    for j in prefs[i]:
        cp += p[j]
        cq += q[j]
        if cp < cq:
            return False
    return True


@dataclass(frozen=True)
class FractionalAllocation:
    """An n-by-m matrix of item shares; cell (i, j) is agent i's share of item j.

    Cells lie in [0, 1] and column sums never exceed 1. The allocation is complete
    when every column sums to exactly 1.
    """

    matrix: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if not self.matrix:
            raise InputError("allocation needs at least one agent row")
        m = len(self.matrix[0])
        for row in self.matrix:
            if len(row) != m:
                raise InputError("allocation rows have inconsistent lengths")
            for x in row:
                if x < 0 or x > 1:
                    raise InputError(f"allocation cell {x} outside [0, 1]")
        for j in range(m):
            s = sum((row[j] for row in self.matrix), ZERO)
            if s > 1:
                raise InputError(f"column {j} allocates more than the whole item ({s})")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int | str | Fraction]]) -> "FractionalAllocation":
        return cls(tuple(tuple(parse_rational(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def m(self) -> int:
        return len(self.matrix[0])

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.matrix[i]

    def column_sum(self, j: int) -> Fraction:
        return sum((row[j] for row in self.matrix), ZERO)

    @property
    def complete(self) -> bool:
        return all(self.column_sum(j) == 1 for j in range(self.m))

    @property
    def is_integral(self) -> bool:
        return all(x == 0 or x == 1 for row in self.matrix for x in row)

    def to_integral(self) -> "IntegralAllocation":
        if not self.is_integral:
            raise InputError("allocation has fractional cells")
        return IntegralAllocation(tuple(tuple(int(x) for x in row) for row in self.matrix))


@dataclass(frozen=True)
class IntegralAllocation:
    """A 0/1 allocation matrix; each item goes to at most one agent."""

    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.matrix:
            raise InputError("allocation needs at least one agent row")
        m = len(self.matrix[0])
        for row in self.matrix:
            if len(row) != m:
                raise InputError("allocation rows have inconsistent lengths")
            for x in row:
                if x not in (0, 1):
                    raise InputError(f"integral allocation cell {x} not 0/1")
        for j in range(m):
            if sum(row[j] for row in self.matrix) > 1:
                raise InputError(f"item {j} assigned to more than one agent")

    @classmethod
    def from_bundles(cls, n: int, m: int, bundles: Sequence[Iterable[int]]) -> "IntegralAllocation":
        if len(bundles) != n:
            raise InputError(f"expected {n} bundles, got {len(bundles)}")
        matrix = [[0] * m for _ in range(n)]
        for i, bundle in enumerate(bundles):
            for j in bundle:
                if not isinstance(j, int) or j < 0 or j >= m:
                    raise InputError(f"item index {j!r} out of range")
                matrix[i][j] = 1
        return cls(tuple(tuple(row) for row in matrix))

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def m(self) -> int:
        return len(self.matrix[0])

    @cached_property
    def bundles(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(j for j in range(self.m) if row[j]) for row in self.matrix
        )

    def fractional_row(self, i: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(x) for x in self.matrix[i])

    def to_fractional(self) -> FractionalAllocation:
        return FractionalAllocation(
            tuple(tuple(Fraction(x) for x in row) for row in self.matrix)
        )

    @property
    def complete(self) -> bool:
        return all(sum(row[j] for row in self.matrix) == 1 for j in range(self.m))


@dataclass(frozen=True)
class Lottery:
    """A probability distribution over integral allocations.

    Construction canonicalizes: duplicate allocations are merged, weights must be
    positive and sum to one, and the support is sorted lexicographically by matrix
    so equal lotteries compare equal.
    """

    support: tuple[tuple[Fraction, IntegralAllocation], ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise InputError("lottery needs a nonempty support")
        n, m = self.support[0][1].n, self.support[0][1].m
        merged: dict[tuple[tuple[int, ...], ...], Fraction] = {}
        for w, alloc in self.support:
            if alloc.n != n or alloc.m != m:
                raise InputError("lottery allocations have inconsistent shapes")
            if w <= 0:
                raise InputError(f"lottery weight {w} not positive")
            merged[alloc.matrix] = merged.get(alloc.matrix, ZERO) + w
        total = sum(merged.values(), ZERO)
        if total != 1:
            raise InputError(f"lottery weights sum to {total}, expected 1")
        canonical = tuple(
            (merged[mat], IntegralAllocation(mat)) for mat in sorted(merged)
        )
        object.__setattr__(self, "support", canonical)

    @classmethod
    def single(cls, alloc: IntegralAllocation) -> "Lottery":
        return cls(((ONE, alloc),))

    @property
    def n(self) -> int:
        return self.support[0][1].n

    @property
    def m(self) -> int:
        return self.support[0][1].m

    def __len__(self) -> int:
        return len(self.support)

    @cached_property
    def marginal(self) -> FractionalAllocation:
        """The expected allocation matrix of the lottery."""
        n, m = self.n, self.m
        acc = [[ZERO] * m for _ in range(n)]
        for w, alloc in self.support:
            for i in range(n):
                row = alloc.matrix[i]
                for j in range(m):
                    if row[j]:
                        acc[i][j] += w
        return FractionalAllocation(tuple(tuple(row) for row in acc))

    def expected_utility(self, instance: Instance, i: int) -> Fraction:
        return instance.utility(i, self.marginal.row(i))


# ---------------------------------------------------------------------------
# JSON serialization.
#
# Instance:   {"agents": n, "items": m, "values": [[int|decimal|"p/q", ...], ...]}
# Allocation: {"matrix": [["p/q", ...], ...]}
# Lottery:    {"support": [{"weight": "p/q", "bundles": [[item, ...], ...]}, ...]}
# ---------------------------------------------------------------------------


def _loads(text: str) -> object:
    try:
        return json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    except ValueError as exc:  # Fraction failed on a float literal
        raise InputError(f"invalid numeric literal in JSON: {exc}") from exc


def _require(obj: object, key: str, context: str) -> object:
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{context}: missing field {key!r}")
    return obj[key]


def instance_from_json(obj: object) -> Instance:
    agents = _require(obj, "agents", "instance")
    items = _require(obj, "items", "instance")
    values = _require(obj, "values", "instance")
    if not isinstance(agents, int) or not isinstance(items, int):
        raise InputError("instance: 'agents' and 'items' must be integers")
    if not isinstance(values, list) or len(values) != agents:
        raise InputError(
            f"instance: expected {agents} value rows, got "
            f"{len(values) if isinstance(values, list) else type(values).__name__}"
        )
    rows = []
    for row in values:
        if not isinstance(row, list) or len(row) != items:
            raise InputError(f"instance: every value row must list {items} items")
        rows.append(tuple(parse_rational(v) for v in row))
    return Instance(tuple(rows))


def instance_to_json(instance: Instance) -> dict:
    return {
        "agents": instance.n,
        "items": instance.m,
        "values": [[format_rational(v) for v in row] for row in instance.values],
    }


def allocation_from_json(obj: object) -> FractionalAllocation:
    matrix = _require(obj, "matrix", "allocation")
    if not isinstance(matrix, list) or not matrix:
        raise InputError("allocation: 'matrix' must be a nonempty list of rows")
    rows = []
    for row in matrix:
        if not isinstance(row, list):
            raise InputError("allocation: matrix rows must be lists")
        rows.append(tuple(parse_rational(v) for v in row))
    return FractionalAllocation(tuple(rows))


def allocation_to_json(alloc: FractionalAllocation | IntegralAllocation) -> dict:
    if isinstance(alloc, IntegralAllocation):
        alloc = alloc.to_fractional()
    return {"matrix": [[format_rational(x) for x in row] for row in alloc.matrix]}


def lottery_from_json(obj: object, n: int | None = None, m: int | None = None) -> Lottery:
    support = _require(obj, "support", "lottery")
    if not isinstance(support, list) or not support:
        raise InputError("lottery: 'support' must be a nonempty list")
    raw: list[tuple[Fraction, list[list[int]]]] = []
    for entry in support:
        weight = parse_rational(_require(entry, "weight", "lottery entry"))
        bundles = _require(entry, "bundles", "lottery entry")
        if not isinstance(bundles, list):
            raise InputError("lottery entry: 'bundles' must be a list per agent")
        raw.append((weight, bundles))
    if n is None:
        n = len(raw[0][1])
    if m is None:
        m = 0
        for _, bundles in raw:
            for bundle in bundles:
                for j in bundle:
                    if isinstance(j, int):
                        m = max(m, j + 1)
    entries = [
        (w, IntegralAllocation.from_bundles(n, m, bundles)) for w, bundles in raw
    ]
    return Lottery(tuple(entries))


def lottery_to_json(lottery: Lottery) -> dict:
    return {
        "support": [
            {
                "weight": format_rational(w),
                "bundles": [list(b) for b in alloc.bundles],
            }
            for w, alloc in lottery.support
        ]
    }


def load_instance(path: str | Path) -> Instance:
    return instance_from_json(_loads(Path(path).read_text()))


def load_allocation(path: str | Path) -> FractionalAllocation:
    return allocation_from_json(_loads(Path(path).read_text()))


def load_lottery(path: str | Path, n: int | None = None, m: int | None = None) -> Lottery:
    return lottery_from_json(_loads(Path(path).read_text()), n=n, m=m)


def dump_json(obj: dict, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
