#!/usr/bin/env python3
"""Smoke test for the brownshift_py extension module.

Build the module first, then run this script:

    cargo build -p brownshift-py --release --features extension-module
    cp target/release/libbrownshift_py.so python/brownshift_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import brownshift_py as bs  # noqa: E402


def check(name, ok):
    print(f"{name}: {'pass' if ok else 'FAIL'}")
    if not ok:
        sys.exit(1)


def main():
    dt = 1e-3

    # Path simulation: reproducible, correct window, B_0 = 0.
    path = bs.GridPath.simulate(dt, 2.0, 8.0, seed=7, replicate=0)
    again = bs.GridPath.simulate(dt, 2.0, 8.0, seed=7, replicate=0)
    lo, hi = path.window()
    check("path/window", lo == -2000 and hi == 8000)
    check("path/origin", path.value(0) == 0.0)
    check("path/reproducible", path.values() == again.values())

    # Local time: nonnegative, nondecreasing forward, roughly sqrt(2/pi)
    # over one time unit on average (single path: just sanity bounds).
    ell0 = bs.local_time_zero(path)
    check("local_time/zero_at_origin", ell0.cum_at(0) == 0.0)
    steps = int(round(1.0 / dt))
    mass01 = ell0.mass(0, steps)
    check("local_time/positive", 0.0 < mass01 < 10.0)

    # Additive functional of a two-atom target.
    eta = bs.additive_functional(path, "atoms:1=0.5,-1=0.5")
    check("additive/window", eta.window() == ell0.window())

    # Balancing rule: the match lands where the target has caught up.
    t = bs.balance_forward(ell0, eta, 0)
    if t is not None:
        xi_mass = ell0.mass(0, t)
        eta_mass = eta.mass(0, t)
        check("balance/caught_up", eta_mass >= xi_mass - 1e-9)
    else:
        check("balance/censored_is_allowed", True)

    # First-crossing construction embeds delta_1: B_T within the band of 1.
    out = bs.run_shift("bertoin_le_jan", dt, seed=3, nu="atoms:1=1",
                       base_horizon=8.0, max_horizon=512.0)
    if out.matched:
        check("shift/lands_near_atom", abs(out.b_t - 1.0) <= math.sqrt(dt) + 1e-12)
        check("shift/t_nonneg", out.t >= 0.0)
    else:
        check("shift/censored_is_allowed", True)

    # Streaming tail sampler agrees with the array route on the same draw.
    t_idx, ell0_at = bs.tail_sample(dt, seed=3, nu="atoms:1=1",
                                    base_horizon=8.0, max_horizon=512.0)
    check("tail/agrees_with_array", t_idx == out.t_index)
    check("tail/ell0_positive", ell0_at > 0.0)

    # Exact discrete oracle.
    check("oracle/simple", bs.match_points([0, 1], [2, 3], 0) == 3)
    pairs, unmatched, exact = bs.verify_point_matching([0, 1, 5], [2, 3, 7])
    check("oracle/exact", exact and len(pairs) + len(unmatched) == 3)

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
