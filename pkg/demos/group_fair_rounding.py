"""From an exact Nash-welfare equilibrium to a group-fair lottery.

Maximizing the product of utilities over fractional allocations gives the
unique allocation that no coalition can outdo by grabbing any other
coalition's pool (scaled by coalition sizes). Rounding it carefully turns
that into a lottery over whole-item allocations that stays group-fair in
expectation while every outcome keeps each agent within one good of her
fractional utility.
"""

from fairlot.core import Instance
from fairlot.mnw import ceei_verify, mnw_v, solve_mnw
from fairlot.properties import check_efficiency, check_envy, check_gf, check_share
from fairlot.rounding import check_utility_guarantee, gf_lottery

inst = Instance.from_rows([[1, 2], [1, 3]])
sol = solve_mnw(inst)
print("values:", [[str(v) for v in row] for row in inst.values])
print("Nash-welfare allocation:")
for i in range(inst.n):
    print(f"  agent {i}: {[str(v) for v in sol.allocation.row(i)]}  utility {sol.utilities[i]}")
print("item prices:", [str(p) for p in sol.prices])
print("equilibrium verified exactly:", ceei_verify(inst, sol.allocation).holds)

lot = gf_lottery(inst)
print(f"\nrounded into {len(lot)} outcomes:")
for w, part in lot.support:
    print(f"  weight {w}: bundles {[list(b) for b in part.bundles]}")
print("marginal equals the equilibrium:", lot.marginal == sol.allocation)
print("marginal is group-fair for every (S, T):", check_gf(inst, lot.marginal).holds)
for w, part in lot.support:
    certs = (
        check_share(inst, part, "prop1_goods", strict=True).holds,
        check_envy(inst, part, "ef11_goods").holds,
        check_efficiency(inst, part, "fpo").holds,
        check_utility_guarantee(inst, lot.marginal, part).holds,
    )
    print(f"  part at {w}: prop1 {certs[0]}, ef11 {certs[1]}, fpo {certs[2]}, one-item bound {certs[3]}")

# Items only one agent bids on break full group fairness: whoever gets the
# single-bidder item looks overpaid to every coalition that counts her in.
# Carving such items out to their only bidder first, then splitting the rest
# at equilibrium, restores the guarantee for coalitions no larger than their
# targets.
weak = Instance.from_rows([[1, 0], [1, 0], [1, 1]])
x = mnw_v(weak)
print("\nsingle-bidder instance, mnw-v allocation:")
for i in range(weak.n):
    print(f"  agent {i}: {[str(v) for v in x.row(i)]}")
full = check_gf(weak, x)
print("full group fairness:", full.holds, "witness:", full.witness)
print("group fairness for |S| <= |T|:", check_gf(weak, x, restrict="s_le_t").holds)
