"""Maximum Nash welfare over divisible goods, verified through competitive equilibrium.

The solver contract is the verified equilibrium condition, not any particular
algorithm: a fractional allocation maximizes the product of utilities iff it is a
competitive equilibrium from equal incomes (CEEI), i.e. every unit an agent holds
gives her the market-best value per unit of price. We find one in three steps:

1. float stage: proportional-response dynamics (each agent splits her budget over
   items in proportion to the value they deliver), cheap and dimension-free;
2. exact stage: read off the near-tied item/agent structure, then solve one exact
   rational feasibility program that pins the equilibrium conditions on that
   structure; any feasible point is an exact equilibrium, which we verify;
3. fallback: if no structure round succeeds, snap the float matrix to rationals
   (continued fractions, column repair) and verify the condition with a small
   slack derived from the tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import lp
from .core import (
    BADS,
    GOODS,
    FractionalAllocation,
    Instance,
    IntegralAllocation,
    InputError,
    KindMismatchError,
    ONE,
    SolveError,
    ZERO,
    ZeroUtilityError,
    format_rational,
)
from .properties import PropertyVerdict

SNAP_DENOMINATOR = 10**6
REFINE_THRESHOLDS = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3)
FLOAT_ITER_CAP = 60_000


@dataclass(frozen=True)
class MnwSolution:
    """An exact Nash-welfare-maximizing allocation with its equilibrium certificate."""

    allocation: FractionalAllocation
    utilities: tuple[Fraction, ...]
    prices: tuple[Fraction, ...]
    log_nash_welfare: float
    kkt_residual: float
    float_residual: float
    exact: bool


def _active_agents(instance: Instance) -> list[int]:
    return [i for i in range(instance.n) if any(v != 0 for v in instance.values[i])]


def _float_residual(values: np.ndarray, x: np.ndarray) -> float:
    """Largest violation of the per-unit-value optimality condition on a float matrix."""
    utils = (values * x).sum(axis=1)
    if (utils <= 0).any():
        return math.inf
    ratios = values / utils[:, None]
    held = x > 1e-12
    worst = 0.0
    for g in range(values.shape[1]):
        best = ratios[:, g].max()
        holders = np.nonzero(held[:, g])[0]
        for i in holders:
            worst = max(worst, best - ratios[i, g])
    return worst


def _proportional_response(values: np.ndarray, target: float) -> tuple[np.ndarray, float]:
    """Run the spend-update dynamics until the equilibrium residual meets target."""
    spend = values / values.sum(axis=1, keepdims=True)
    x = np.zeros_like(values)
    residual = math.inf
    check_every = 32
    for it in range(FLOAT_ITER_CAP):
        prices = spend.sum(axis=0)
        x = spend / prices
        utils = (values * x).sum(axis=1)
        spend = values * x / utils[:, None]
        if it % check_every == 0 or it == FLOAT_ITER_CAP - 1:
            residual = _float_residual(values, x)
            if residual <= target:
                break
    return x, residual


def _refine_exact(
    instance: Instance, active: list[int], x_float: np.ndarray, theta: float
) -> FractionalAllocation | None:
    """Solve the equilibrium conditions exactly on the float solution's tie structure.

    Returns an exact CEEI allocation, or None if this structure is infeasible.
    Feasibility is sufficient: the program literally encodes the first-order
    conditions, so any solution is a true equilibrium regardless of how the
    structure was guessed.
    """
    m = instance.m
    values = np.array([[float(instance.values[i][j]) for j in range(m)] for i in active])
    utils = (values * x_float).sum(axis=1)
    ratios = values / utils[:, None]
    # holders of g must attain the best value-per-utility rate on g across agents
    item_best = ratios.max(axis=0)
    members: list[list[int]] = []
    for g in range(m):
        rows = [
            a for a in range(len(active)) if ratios[a, g] >= item_best[g] * (1.0 - theta)
        ]
        if not rows:
            return None
        members.append(rows)

    variables: list[tuple[int, int]] = []  # (position in active, good)
    index: dict[tuple[int, int], int] = {}
    for g in range(m):
        for a in members[g]:
            index[(a, g)] = len(variables)
            variables.append((a, g))
    nvars = len(variables)

    def utility_coeffs(a: int, scale: Fraction) -> list[Fraction]:
        row = [ZERO] * nvars
        for g in range(m):
            if (a, g) in index:
                row[index[(a, g)]] = scale * instance.values[active[a]][g]
        return row

    constraints = []
    for g in range(m):
        row = [ZERO] * nvars
        for a in members[g]:
            row[index[(a, g)]] = ONE
        constraints.append(lp.Constraint(row, lp.EQ, ONE))
    for g in range(m):
        pivot = members[g][0]
        vp = instance.values[active[pivot]][g]
        for a in range(len(active)):
            va = instance.values[active[a]][g]
            if a == pivot:
                continue
            if a in members[g]:
                row = utility_coeffs(a, vp)
                for pos, coeff in enumerate(utility_coeffs(pivot, -va)):
                    row[pos] += coeff
                constraints.append(lp.Constraint(row, lp.EQ, ZERO))
            elif va > 0:
                # a's value per unit price of g must not beat her own bundle rate
                row = utility_coeffs(a, vp)
                for pos, coeff in enumerate(utility_coeffs(pivot, -va)):
                    row[pos] += coeff
                constraints.append(lp.Constraint(row, lp.GE, ZERO))
    for a in range(len(active)):
        i = active[a]
        share = instance.total_value(i) / instance.n
        constraints.append(lp.Constraint(utility_coeffs(a, ONE), lp.GE, share))

    objective = [ZERO] * nvars
    for pos, (a, g) in enumerate(variables):
        objective[pos] = instance.values[active[a]][g]
    sol = lp.solve(lp.LinearProgram(objective, "max", constraints))
    if sol.status != lp.OPTIMAL:
        return None
    matrix = [[ZERO] * m for _ in range(instance.n)]
    for pos, (a, g) in enumerate(variables):
        matrix[active[a]][g] = sol.values[pos]
    return FractionalAllocation(tuple(tuple(row) for row in matrix))


def _snap(instance: Instance, active: list[int], x_float: np.ndarray, tol: float) -> FractionalAllocation:
    """Rationalize a float matrix: snap near-0/1 cells, bound denominators, repair columns."""
    m = instance.m
    matrix = [[ZERO] * m for _ in range(instance.n)]
    for a, i in enumerate(active):
        for g in range(m):
            v = float(x_float[a, g])
            if abs(v) <= tol:
                cell = ZERO
            elif abs(v - 1.0) <= tol:
                cell = ONE
            else:
                cell = Fraction(v).limit_denominator(SNAP_DENOMINATOR)
            matrix[i][g] = cell
    for g in range(m):
        total = sum((matrix[i][g] for i in range(instance.n)), ZERO)
        if total != 1:
            largest = max(range(instance.n), key=lambda i: matrix[i][g])
            matrix[largest][g] += 1 - total
            if not 0 <= matrix[largest][g] <= 1:
                raise SolveError("column repair pushed a cell outside [0, 1]")
    return FractionalAllocation(tuple(tuple(row) for row in matrix))


def _exact_slack(instance: Instance, x: FractionalAllocation, active: list[int]) -> Fraction:
    """Smallest slack at which the goods equilibrium condition holds, exactly."""
    utils = {i: instance.utility(i, x.row(i)) for i in active}
    if any(utils[i] <= 0 for i in active):
        return Fraction(10**9)
    worst = ZERO
    for g in range(instance.m):
        best = max(Fraction(instance.values[h][g]) / utils[h] for h in active)
        for i in active:
            if x.matrix[i][g] > 0:
                gap = best - Fraction(instance.values[i][g]) / utils[i]
                if gap > worst:
                    worst = gap
    return worst


def solve_mnw(instance: Instance, tol: float = 1e-10) -> MnwSolution:
    """Maximize the product of agents' utilities over complete fractional allocations.

    Only goods instances are supported. Agents with all-zero value rows are left
    out of the product and receive nothing. The returned allocation is exact; the
    ``exact`` flag records whether the equilibrium condition verified with zero
    slack (the refinement path) or within ``10^4 * tol`` (the snapping path).

    >>> sol = solve_mnw(Instance.from_rows([[1, 2], [1, 3]]))
    >>> [[str(v) for v in row] for row in sol.allocation.matrix]
    [['1', '1/4'], ['0', '3/4']]
    """
    if instance.kind != GOODS:
        raise KindMismatchError("solve_mnw handles goods instances only")
    if tol <= 0:
        raise InputError("tol must be positive")
    n, m = instance.n, instance.m
    active = _active_agents(instance)
    if m == 0 or not active:
        empty = FractionalAllocation(tuple(tuple([ZERO] * m) for _ in range(n)))
        if m > 0:
            raise InputError("a goods instance with items needs at least one interested agent")
        return MnwSolution(empty, (ZERO,) * n, (), 0.0, 0.0, 0.0, True)

    values = np.array([[float(instance.values[i][j]) for j in range(m)] for i in active])
    target = max(min(tol, 1e-9), 1e-13)
    x_float, float_res = _proportional_response(values, target)

    exact_x: FractionalAllocation | None = None
    for theta in REFINE_THRESHOLDS:
        exact_x = _refine_exact(instance, active, x_float, theta)
        if exact_x is not None:
            break
    if exact_x is not None:
        slack = _exact_slack(instance, exact_x, active)
        if slack != 0:  # pragma: no cover - feasibility implies the condition
            raise SolveError("refined allocation failed exact equilibrium verification")
        # a genuinely converged float matrix for reporting
        refreshed = np.array(
            [[float(exact_x.matrix[i][j]) for j in range(m)] for i in active]
        )
        float_res = min(float_res, _float_residual(values, refreshed))
        x = exact_x
        exact = True
    else:
        x = _snap(instance, active, x_float, max(tol, 1e-9))
        slack = _exact_slack(instance, x, active)
        allowed = Fraction(10**4) * Fraction(str(tol))
        if slack > allowed:
            raise SolveError(
                f"snapped allocation misses the equilibrium condition by {float(slack):.3g}"
            )
        exact = slack == 0

    utilities = tuple(
        instance.utility(i, x.row(i)) if i in active else ZERO for i in range(n)
    )
    prices = tuple(
        max(Fraction(instance.values[h][g]) / utilities[h] for h in active)
        for g in range(m)
    )
    log_nw = float(sum(math.log(utilities[i]) for i in active))
    return MnwSolution(x, utilities, prices, log_nw, float(slack), float_res, exact)


def ceei_verify(
    instance: Instance,
    x: FractionalAllocation,
    slack: Fraction | int = 0,
    kind: str | None = None,
) -> PropertyVerdict:
    """Check the competitive-equilibrium condition on a complete allocation.

    Goods: every held unit must deliver the market-best value per unit of spending,
    v_i(g)/v_i(X_i) >= v_h(g)/v_h(X_h) - slack whenever X_{i,g} > 0. Bads mirror it
    with <= and +slack. Agents with all-zero value rows are outside the condition.
    """
    kind = instance.kind if kind is None else kind
    if kind not in (GOODS, BADS):
        raise KindMismatchError(f"equilibrium condition is defined for goods or bads, got {kind}")
    if x.n != instance.n or x.m != instance.m:
        raise InputError("allocation shape does not match instance")
    if not x.complete:
        raise InputError("equilibrium verification needs a complete allocation")
    slack = Fraction(slack)
    if slack < 0:
        raise InputError("slack must be nonnegative")
    active = _active_agents(instance)
    utils = {i: instance.utility(i, x.row(i)) for i in active}
    label = f"ceei_{kind}"
    for i in active:
        if kind == GOODS and utils[i] <= 0:
            raise ZeroUtilityError(f"agent {i} values items but has nonpositive utility")
        if kind == BADS and utils[i] >= 0:
            raise ZeroUtilityError(f"agent {i} must have negative utility in a bads equilibrium")
    for g in range(instance.m):
        for i in active:
            if x.matrix[i][g] == 0:
                continue
            mine = Fraction(instance.values[i][g]) / utils[i]
            for h in active:
                if h == i:
                    continue
                other = Fraction(instance.values[h][g]) / utils[h]
                violated = mine < other - slack if kind == GOODS else mine > other + slack
                if violated:
                    return PropertyVerdict(
                        label,
                        False,
                        {
                            "holder": i,
                            "rival": h,
                            "item": g,
                            "holder_rate": format_rational(mine),
                            "rival_rate": format_rational(other),
                        },
                    )
    return PropertyVerdict(label, True)


def mnw_v(instance: Instance) -> FractionalAllocation:
    """Nash-welfare allocation with single-bidder items carved out first.

    Items positively valued by exactly one agent go wholly to that agent; the
    remaining items are allocated by solve_mnw on the reduced instance.
    """
    if instance.kind != GOODS:
        raise KindMismatchError("mnw_v handles goods instances only")
    n, m = instance.n, instance.m
    weak: dict[int, int] = {}
    strong: list[int] = []
    for j in range(m):
        holders = [i for i in range(n) if instance.values[i][j] > 0]
        if len(holders) == 1:
            weak[j] = holders[0]
        else:
            strong.append(j)
    matrix = [[ZERO] * m for _ in range(n)]
    for j, owner in weak.items():
        matrix[owner][j] = ONE
    if strong:
        reduced = Instance(tuple(tuple(instance.values[i][j] for j in strong) for i in range(n)))
        inner = solve_mnw(reduced).allocation
        for col, j in enumerate(strong):
            for i in range(n):
                matrix[i][j] = inner.matrix[i][col]
    return FractionalAllocation(tuple(tuple(row) for row in matrix))


def replicate(instance: Instance, k: int) -> Instance:
    """k copies of every agent and item; copy l of agent i values copy r of item j
    at the original v_{i,j}."""
    if k < 1:
        raise InputError("replication factor must be at least 1")
    n, m = instance.n, instance.m
    return Instance(
        tuple(
            tuple(instance.values[i][j] for _ in range(k) for j in range(m))
            for _ in range(k)
            for i in range(n)
        )
    )


def replicate_allocation(x: FractionalAllocation, k: int) -> FractionalAllocation:
    """Give copy l of agent i the original bundle X_i spread over copy l of the items."""
    if k < 1:
        raise InputError("replication factor must be at least 1")
    n, m = x.n, x.m
    rows = []
    for copy in range(k):
        for i in range(n):
            row = [ZERO] * (k * m)
            for j in range(m):
                row[copy * m + j] = x.matrix[i][j]
            rows.append(tuple(row))
    return FractionalAllocation(tuple(rows))


def mnw_deviation_witness(
    instance: Instance, alloc: IntegralAllocation
) -> tuple[int, int, tuple[Fraction, ...]] | None:
    """For a Pareto-optimal integral allocation that is not Nash-optimal, produce a
    profitable transfer: agents i, j and a fractional slice X of i's bundle with
    v_j(X) * v_i(A_i minus X) > v_j(A_j) * v_i(X), i.e. moving X from i to j raises
    the product of utilities. Returns None when the allocation is Nash-optimal.
    """
    if not alloc.complete:
        raise InputError("deviation search needs a complete allocation")
    active = _active_agents(instance)
    z = solve_mnw(instance)
    a_product = ONE
    z_product = ONE
    bundle_values = {}
    for i in active:
        bundle_values[i] = instance.utility(i, alloc.fractional_row(i))
        a_product *= bundle_values[i]
        z_product *= z.utilities[i]
    if a_product >= z_product:
        return None
    # a suboptimal allocation violates the equilibrium condition on some held
    # item: a rival values it more per unit of her own utility than the holder
    for g in range(instance.m):
        holders = [i for i in active if alloc.matrix[i][g] == 1]
        if not holders:
            continue
        i = holders[0]
        for j in active:
            if j == i:
                continue
            gap = (
                instance.values[j][g] * bundle_values[i]
                - instance.values[i][g] * bundle_values[j]
            )
            if gap <= 0:
                continue
            cross = instance.values[j][g] * instance.values[i][g]
            eps = ONE if cross == 0 else min(ONE, gap / (2 * cross))
            slice_vec = tuple(
                eps if gg == g else ZERO for gg in range(instance.m)
            )
            vi_slice = eps * instance.values[i][g]
            vj_slice = eps * instance.values[j][g]
            if vj_slice * (bundle_values[i] - vi_slice) > bundle_values[j] * vi_slice:
                return (i, j, slice_vec)
    raise SolveError("allocation is below the Nash optimum but no transfer was found")
