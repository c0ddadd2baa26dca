"""Clearing mechanics on a two-bidder worked example.

Five units on the block. Bidder 1 values them [6, 4, 3, 1, 1] and asks
for two units at 5 plus three at 3; bidder 2 values [5, 3, 1, 1, 0] and
asks for two at 4 plus two at 2. Expanding both demand curves and
merging gives the allocation (3 and 2 units) and the uniform clearing
price (3, the fifth-highest unit bid), so bidder 1 banks value 13 for a
payment of 9 and bidder 2 banks 8 for 6. Both stay RoI-feasible, which
is the safe-class promise: bid at most the running average of your
marginal values and no clearing outcome can put you under water.

Run from the repository root:

    python3 demos/01_auction_basics.py
"""

from bidlab import (
    CompetingBids,
    MUniformStrategy,
    TiePolicy,
    ValuationCurve,
    classify,
    clear_auction,
    roi_feasible,
)

K = 5
curve_1 = ValuationCurve([6, 4, 3, 1, 1])
curve_2 = ValuationCurve([5, 3, 1, 1, 0])
bid_1 = MUniformStrategy([(5, 2), (3, 3)])
bid_2 = MUniformStrategy([(4, 2), (2, 2)])


def report(label, curve, mine, theirs):
    out = clear_auction(curve, mine, CompetingBids.from_profile(K, theirs.expanded()))
    print(
        f"{label}: wins x={out.x} at p={out.p:g}, value {out.value:g}, "
        f"payment {out.payment:g}, RoI-feasible: {roi_feasible(out)}"
    )
    return out


print(f"K = {K} units, bidder 1 asks {bid_1.to_text()}, bidder 2 asks {bid_2.to_text()}")
report("bidder 1", curve_1, bid_1, bid_2)
report("bidder 2", curve_2, bid_2, bid_1)

# The running averages w_j = (v_1 + ... + v_j) / j are what a safe bid may
# not exceed. Bidder 1's asks sit exactly at w_2 = 5 and w_5 = 3: the
# undominated member of the safe class.
w = [curve_1.w(j) for j in range(1, 6)]
print("bidder 1 averaged valuations:", [f"{x:g}" for x in w])
print("bidder 1 classification:", classify(curve_1, bid_1).name)

# Ties: exact collisions between own and competing unit bids can be broken
# either way. FavorBidder admits the colliding own unit, LowerIndexWins
# does not, and the clearing price can move with the allocation.
tied = CompetingBids(3, [0.8, 0.5, 0.5])
ask = MUniformStrategy([(0.5, 2)])
flat = ValuationCurve([0.9, 0.6, 0.4])
for tie in TiePolicy:
    out = clear_auction(flat, ask, tied, tie)
    print(f"tie policy {tie.name}: x={out.x}, p={out.p:g}, payment={out.payment:g}")

# Overbidding one unit is enough to lose the guarantee: against the wrong
# profile the clearing price lands above the average value of what you won.
greedy = MUniformStrategy([(0.95, 2)])
squeeze = CompetingBids(3, [1.1, 0.9, 0.2])
out = clear_auction(flat, greedy, squeeze)
against = [round(float(b), 2) for b in squeeze.bids]
print(
    f"overbid at 0.95 against {against}: value {out.value:g} "
    f"< payment {out.payment:g} -> violation"
)
