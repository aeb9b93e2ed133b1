"""Nash welfare solver: exact oracle cases, equilibrium verification, replication."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from fairlot.core import (
    FractionalAllocation,
    InputError,
    Instance,
    IntegralAllocation,
    KindMismatchError,
    ZeroUtilityError,
)
from fairlot.mnw import (
    ceei_verify,
    mnw_deviation_witness,
    mnw_v,
    replicate,
    replicate_allocation,
    solve_mnw,
)
from fairlot.properties import check_gf, integral_nash_argmax, nash_product

from conftest import random_positive_goods

F = Fraction


class TestSolveMnw:
    def test_two_agent_oracle(self, tilt2):
        # closed form: equal bang per buck pins x = [[1, 1/4], [0, 3/4]]
        sol = solve_mnw(tilt2)
        assert sol.allocation == FractionalAllocation.from_rows(
            [["1", "1/4"], ["0", "3/4"]]
        )
        assert sol.utilities == (F(3, 2), F(9, 4))
        assert sol.prices == (F(2, 3), F(4, 3))
        assert sol.exact
        assert sol.kkt_residual == 0.0
        assert sol.float_residual <= 1e-8

    def test_oracle_shared_item_rate(self, tilt2):
        # the split item must deliver the same value per unit price to both agents
        sol = solve_mnw(tilt2)
        rate_1 = tilt2.values[0][1] / sol.utilities[0]
        rate_2 = tilt2.values[1][1] / sol.utilities[1]
        assert rate_1 == rate_2 == F(4, 3)

    def test_scale_invariance(self, tilt2):
        scaled = Instance.from_rows([[5, 10], [1, 3]])
        assert solve_mnw(scaled).allocation == solve_mnw(tilt2).allocation

    def test_identical_agents_equal_utilities(self):
        inst = Instance.from_rows([[2, 1], [2, 1]])
        sol = solve_mnw(inst)
        assert sol.exact
        assert sol.utilities[0] == sol.utilities[1] == F(3, 2)
        assert ceei_verify(inst, sol.allocation).holds

    def test_zero_value_agent_gets_nothing(self):
        inst = Instance.from_rows([[0, 0], [1, 2]])
        sol = solve_mnw(inst)
        assert sol.allocation == FractionalAllocation.from_rows([["0", "0"], ["1", "1"]])
        assert sol.utilities == (F(0), F(3))
        assert sol.prices == (F(1, 3), F(2, 3))

    def test_kind_and_tol_validation(self, bads3):
        with pytest.raises(KindMismatchError):
            solve_mnw(bads3)
        with pytest.raises(InputError):
            solve_mnw(Instance.from_rows([[1, 2]]), tol=0.0)

    def test_beats_integral_brute_force(self):
        rng = random.Random(404)
        for _ in range(25):
            inst = random_positive_goods(rng, n_max=3, m_max=5)
            sol = solve_mnw(inst)
            fractional = nash_product(inst, sol.allocation)
            best_integral, _ = integral_nash_argmax(inst)
            if sol.exact:
                assert fractional >= best_integral
                assert ceei_verify(inst, sol.allocation).holds
            else:
                assert float(fractional) >= float(best_integral) * (1 - 1e-6)


class TestCeeiVerify:
    def test_rejects_better_rate_elsewhere(self, tilt2):
        x = FractionalAllocation.from_rows([["1", "0"], ["0", "1"]])
        verdict = ceei_verify(tilt2, x)
        assert not verdict.holds
        assert verdict.witness["holder"] == 1
        assert verdict.witness["rival"] == 0
        assert verdict.witness["item"] == 1

    def test_slack_absorbs_small_gaps(self, tilt2):
        x = FractionalAllocation.from_rows([["1", "0"], ["0", "1"]])
        assert ceei_verify(tilt2, x, slack=2).holds

    def test_bads_condition(self):
        inst = Instance.from_rows([[-1, -2], [-2, -1]])
        good = FractionalAllocation.from_rows([["1", "0"], ["0", "1"]])
        bad = FractionalAllocation.from_rows([["0", "1"], ["1", "0"]])
        assert ceei_verify(inst, good).holds
        verdict = ceei_verify(inst, bad)
        assert not verdict.holds

    def test_zero_utility_rejected(self):
        inst = Instance.from_rows([[1, 1], [1, 1]])
        x = FractionalAllocation.from_rows([["1", "1"], ["0", "0"]])
        with pytest.raises(ZeroUtilityError):
            ceei_verify(inst, x)

    def test_input_validation(self, tilt2, mixed4):
        incomplete = FractionalAllocation.from_rows([["1/2", "0"], ["0", "1"]])
        with pytest.raises(InputError):
            ceei_verify(tilt2, incomplete)
        with pytest.raises(InputError):
            ceei_verify(tilt2, FractionalAllocation.from_rows([["1", "0"], ["0", "1"]]), slack=-1)
        x4 = FractionalAllocation.from_rows([["1", "1", "1", "1"], ["0", "0", "0", "0"]])
        with pytest.raises(KindMismatchError):
            ceei_verify(mixed4, x4)


class TestReplication:
    def test_replicated_equilibrium_verifies(self, tilt2):
        sol = solve_mnw(tilt2)
        for k in (2, 3):
            big = replicate(tilt2, k)
            big_x = replicate_allocation(sol.allocation, k)
            assert big.n == tilt2.n * k and big.m == tilt2.m * k
            assert ceei_verify(big, big_x).holds

    def test_replicated_solution_utilities(self, tilt2):
        sol = solve_mnw(tilt2)
        big = solve_mnw(replicate(tilt2, 2))
        assert big.utilities == sol.utilities * 2

    def test_factor_validation(self, tilt2):
        with pytest.raises(InputError):
            replicate(tilt2, 0)
        with pytest.raises(InputError):
            replicate_allocation(FractionalAllocation.from_rows([["1", "1"]]), 0)


class TestMnwV:
    def test_single_bidder_item_carved_out(self, weak3):
        x = mnw_v(weak3)
        assert x == FractionalAllocation.from_rows(
            [["1/3", "0"], ["1/3", "0"], ["1/3", "1"]]
        )

    def test_no_single_bidder_items_matches_solver(self):
        inst = Instance.from_rows([[1, 2], [2, 1]])
        assert mnw_v(inst) == solve_mnw(inst).allocation

    def test_all_single_bidder(self):
        inst = Instance.from_rows([[1, 0], [0, 1]])
        assert mnw_v(inst) == FractionalAllocation.from_rows([["1", "0"], ["0", "1"]])

    def test_group_fairness_for_less(self, weak3):
        x = mnw_v(weak3)
        assert not check_gf(weak3, x, restrict="full").holds
        assert check_gf(weak3, x, restrict="s_le_t").holds

    def test_random_instances_gf_for_less(self):
        rng = random.Random(77)
        found_single_bidder = 0
        for _ in range(12):
            n = rng.randint(2, 3)
            m = rng.randint(2, 4)
            values = [[rng.randint(0, 4) for _ in range(m)] for _ in range(n)]
            for j in range(m):
                if all(values[i][j] == 0 for i in range(n)):
                    values[rng.randrange(n)][j] = rng.randint(1, 4)
            # an agent with no value anywhere can ride along in any coalition S,
            # so the guarantee needs every agent to want something
            for i in range(n):
                if all(v == 0 for v in values[i]):
                    values[i][rng.randrange(m)] = rng.randint(1, 4)
            inst = Instance.from_rows(values)
            if any(
                sum(1 for i in range(n) if values[i][j] > 0) == 1 for j in range(m)
            ):
                found_single_bidder += 1
            assert check_gf(inst, mnw_v(inst), restrict="s_le_t").holds
        assert found_single_bidder > 0

    def test_bads_rejected(self, bads3):
        with pytest.raises(KindMismatchError):
            mnw_v(bads3)


class TestDeviationWitness:
    def test_suboptimal_allocation_yields_transfer(self, tilt2):
        alloc = IntegralAllocation.from_bundles(2, 2, [(0,), (1,)])
        witness = mnw_deviation_witness(tilt2, alloc)
        assert witness is not None
        i, j, slice_vec = witness
        assert (i, j) == (1, 0)
        held = tilt2.utility(i, alloc.fractional_row(i))
        taken = tilt2.utility(i, slice_vec)
        gained = tilt2.utility(j, slice_vec)
        other = tilt2.utility(j, alloc.fractional_row(j))
        assert all(
            0 <= slice_vec[g] <= alloc.matrix[i][g] for g in range(tilt2.m)
        )
        assert 0 < taken < held
        # the transfer strictly raises the product of the pair's utilities
        assert gained * (held - taken) > other * taken
        assert (held - taken) * (other + gained) > held * other

    def test_nash_optimal_integral_returns_none(self):
        inst = Instance.from_rows([[2, 1], [1, 2]])
        alloc = IntegralAllocation.from_bundles(2, 2, [(0,), (1,)])
        assert mnw_deviation_witness(inst, alloc) is None

    def test_starved_agent_receives_slice(self):
        inst = Instance.from_rows([[1, 1], [1, 1]])
        alloc = IntegralAllocation.from_bundles(2, 2, [(0, 1), ()])
        witness = mnw_deviation_witness(inst, alloc)
        assert witness is not None
        i, j, slice_vec = witness
        assert (i, j) == (0, 1)
        taken = inst.utility(i, slice_vec)
        gained = inst.utility(j, slice_vec)
        assert 0 < taken < 2
        assert gained * (2 - taken) > 0

    def test_incomplete_rejected(self, tilt2):
        partial = IntegralAllocation.from_bundles(2, 2, [(0,), ()])
        with pytest.raises(InputError):
            mnw_deviation_witness(tilt2, partial)
