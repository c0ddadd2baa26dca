"""Benchmark instances where safety provably costs value.

Three constructions, each bundled as a curve plus a fixed competing-bid
history with the interesting quantities precomputed in metadata:

* pouf_tight_m1: with a single price level the best safe strategy
  forfeits a factor of exactly 2 - delta against unrestricted feasible
  bidding. One early unit and one final burst cannot both be captured
  with one cut.
* mmbar_tight: allowing m' cuts instead of m'-1 multiplies achievable
  value by m' - delta; the optimal m'=2 play allocates N units to the
  first partition block and 1 to each of the rest, a geometric ladder.
* cumulative_impossibility: a bidder allowed to run a temporary deficit
  (repaid later, so the CUMULATIVE books balance) collects value T while
  every per-round-safe player collects eps*T. No online safe strategy
  closes that gap, which is the price of the per-round guarantee.

Run from the repository root:

    python3 demos/04_hard_instances.py
"""

from bidlab import (
    assign_offline_weights,
    build_dag,
    clear_auction,
    gen_cumulative_impossibility,
    gen_mmbar_tight,
    gen_pouf_tight_m1,
    max_weight_path,
    MUniformStrategy,
)

for delta in (0.5, 0.25, 0.1):
    inst = gen_pouf_tight_m1(delta)
    value, payment, _ = inst.simulate(inst.prescribed_strategy())
    dag = build_dag(inst.curve.m_units, 1)
    assign_offline_weights(dag, inst.history, inst.curve)
    safe = max_weight_path(dag)[1]
    print(
        f"pouf_tight_m1(delta={delta}): feasible {value:g} vs best safe {safe:g}, "
        f"ratio {value / safe:.9f} (target {2 - delta:g})"
    )

inst = gen_mmbar_tight(2, 0.5, 4)
dag2 = build_dag(inst.curve.m_units, 2)
assign_offline_weights(dag2, inst.history, inst.curve)
dag1 = build_dag(inst.curve.m_units, 1)
assign_offline_weights(dag1, inst.history, inst.curve)
two, one = max_weight_path(dag2)[1], max_weight_path(dag1)[1]
_, _, alloc = inst.simulate(inst.prescribed_strategy())
sizes = inst.metadata["partition_sizes"]
print(
    f"mmbar_tight(m'=2, delta=0.5, N=4): two-cut {two:g} vs one-cut {one:g}, "
    f"ratio {two / one:g} (floor {1.5:g})"
)
print(f"  allocations by partition block {sizes}: {alloc[:sizes[0]]} then {alloc[sizes[0]:sizes[0]+3]}...")

eps, T = 0.2, 20
inst = gen_cumulative_impossibility(eps, T)
safe_total = sum(
    clear_auction(inst.curve, MUniformStrategy([(inst.curve.w(1), 1)]), cb).value
    for cb in inst.history
)
hindsight_bid = inst.metadata["hindsight_bid"]
deficit_bidder = MUniformStrategy([(hindsight_bid, 1)])
value = payment = 0.0
worst_ledger = 0.0
ledger = 0.0
for cb in inst.history:
    out = clear_auction(inst.curve, deficit_bidder, cb)
    value += out.value
    payment += out.payment
    ledger += out.value - out.payment
    worst_ledger = min(worst_ledger, ledger)
ledger = 0.0 if abs(ledger) < 1e-9 else ledger  # exact repayment, float dust
print(
    f"cumulative_impossibility(eps={eps}, T={T}): deficit bidder value {value:g} "
    f"for payment {payment:g} (ledger dips to {worst_ledger:g}, ends at {ledger:g}); "
    f"safe play gets {safe_total:g}"
)
