"""Record reference values from a certified run into fixtures/*.json.

Run from the tests directory: python record_fixtures.py
"""

import json

from sandwich_grids import sandwich_grids
from sfhelab.bounds import DyadicPartitionScheme, chaining_upper_bound, cut_index_n0
from sfhelab.metrics import sandwich_check
from sfhelab.model import ModelParams

P = ModelParams(1.5, 0.4)


def sandwich_fixture():
    out = {}
    for name, (kind, side, th, pts) in sandwich_grids(P).items():
        r = sandwich_check(kind, P, pts, theta=th, side=side)
        out[name] = {"count": r.count, "ratio_min": r.ratio_min, "ratio_max": r.ratio_max}
    return out


def bounds_fixture():
    ratios = {f"{T},{L}": chaining_upper_bound(P, DyadicPartitionScheme(T, L), "d1").ratio
              for T in (1.0, 4.0) for L in (2.0, 16.0, 256.0)}
    return {"n0_ratio16": cut_index_n0(P, 1.0, 16.0), "n0_below_scale": cut_index_n0(P, 1.0, 0.5),
            "chaining_ratio": ratios}


if __name__ == "__main__":
    with open("fixtures/sandwich.json", "w") as fh:
        json.dump(sandwich_fixture(), fh, indent=1, sort_keys=True)
    with open("fixtures/bounds.json", "w") as fh:
        json.dump(bounds_fixture(), fh, indent=1, sort_keys=True)
