"""Generate the bundled synthetic auction-aggregates corpus.

Fifty auctions, each built the same way the reconstruction assumes the
world works: a concentrated interval holding 97% of the bids on one
shoulder of the price range, a thin tail on the other, or a flat spread
for every fifth auction. The published aggregates (min, max, avg, lower
median) are computed from the actually drawn bids, so the corpus is an
honest round trip target: reconstruction at the right f should keep
nearly everything, and drifting f should start losing auctions.

Run from the repository root:

    python3 demos/make_ets_corpus.py
    python3 demos/make_ets_corpus.py --out somewhere.csv --seed 7
"""

import argparse
import pathlib

import numpy as np

from bidlab.ets import AuctionAggregates, classify_shape, write_aggregates_csv

TRUE_F = 0.97
N_AUCTIONS = 50
DEFAULT_SEED = 171717
DEFAULT_OUT = (
    pathlib.Path(__file__).resolve().parent.parent
    / "src"
    / "bidlab"
    / "_data"
    / "ets_aggregates_synthetic.csv"
)


def lower_median(values: np.ndarray) -> float:
    v = np.sort(values)
    return float(v[(v.size - 1) // 2])


def draw_auction(i: int, rng: np.random.Generator) -> AuctionAggregates:
    n_sub = int(rng.integers(24, 61))
    lo = rng.uniform(0.35, 0.60)
    width = rng.uniform(0.18, 0.35)
    hi = lo + width
    kind = i % 5  # 0,1: low shoulder  2,3: high shoulder  4: flat
    if kind == 4:
        bids = rng.uniform(lo, lo + 0.6 * width, n_sub)
    else:
        conc_width = width * rng.uniform(0.15, 0.30)
        n_conc = int(np.floor(TRUE_F * n_sub + 0.5))
        n_tail = n_sub - n_conc
        if kind in (0, 1):
            conc = rng.uniform(lo, lo + conc_width, n_conc)
            tail = rng.uniform(lo + conc_width, hi, n_tail)
        else:
            conc = rng.uniform(hi - conc_width, hi, n_conc)
            tail = rng.uniform(lo, hi - conc_width, n_tail)
        bids = np.concatenate((conc, tail))
    return AuctionAggregates(
        auction_id=f"ets{i:03d}",
        b_min=float(bids.min()),
        b_max=float(bids.max()),
        b_avg=float(bids.mean()),
        b_med=lower_median(bids),
        n_sub=n_sub,
        K=int(rng.integers(30, 91)),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=pathlib.Path, default=DEFAULT_OUT)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    aggs = [draw_auction(i, rng) for i in range(N_AUCTIONS)]

    shapes = [classify_shape(a).value for a in aggs]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_aggregates_csv(aggs, args.out)
    print(f"wrote {len(aggs)} auctions to {args.out}")
    for label in ("type_i", "type_ii", "uniform"):
        print(f"  {label}: {shapes.count(label)}")


if __name__ == "__main__":
    main()
