#!/usr/bin/env python3
"""Regenerates the bundled network fixtures under data/.

Profiles are closed-form so the output is reproducible byte for byte.
"""

import json
import math
import os
import sys
from datetime import datetime, timedelta, timezone

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")
START = datetime(2021, 6, 7, tzinfo=timezone.utc)  # a Monday


def fmt(v):
    s = repr(round(v, 6))
    return s[:-2] if s.endswith(".0") else s


def write_profile(path, values, step_minutes=30):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write("timestamp,value_mw\n")
        for i, v in enumerate(values):
            ts = START + timedelta(minutes=step_minutes * i)
            f.write(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{fmt(v)}\n")


def write_doc(path, doc):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def daily_demand(n, peak, base):
    # Evening peak, overnight trough.
    out = []
    for i in range(n):
        h = (i % 48) / 2.0
        shape = 0.5 - 0.5 * math.cos(2 * math.pi * (h - 6.0) / 24.0)
        out.append(base + (peak - base) * shape)
    return out


def bus(bid, slack=False, **extra):
    b = {"id": bid, "base_kv": 11.0, "v_min_pu": 0.9, "v_max_pu": 1.1}
    if slack:
        b["is_slack"] = True
        b["v_set_pu"] = 1.0
    b.update(extra)
    return b


def line(lid, a, b, r, x, smax):
    return {"id": lid, "from_bus": a, "to_bus": b, "r_ohm": r, "x_ohm": x, "s_max_mva": smax}


def two_bus():
    d = os.path.join(ROOT, "two_bus")
    n = 48
    write_profile(os.path.join(d, "demand.csv"), daily_demand(n, 1.2, 0.4))
    write_profile(os.path.join(d, "wind.csv"), [0.0] * n)
    write_doc(os.path.join(d, "network.json"), {
        "schema": "flexgrid.network.v1",
        "s_base_mva": 10.0,
        "load_power_factor": 0.95,
        "profiles": {"demand": "demand.csv", "wind": "wind.csv"},
        "buses": [bus("b0", slack=True), bus("b1")],
        "lines": [line("l1", "b0", "b1", 0.242, 0.363, 5.0)],
        "generators": [{"id": "w1", "bus": "b1", "kind": "wind_curtailable", "profile": "wind", "curtail_cost": 150.0}],
        "demand": [{"bus": "b1", "profile": "demand"}],
    })


FIVE_BUS_LINES = [
    line("l1", "b0", "b1", 0.484, 0.605, 8.0),
    line("l2", "b1", "b2", 0.363, 0.4235, 6.0),
    line("l3", "b2", "b3", 0.363, 0.4235, 6.0),
    line("l4", "b4", "b1", 0.363, 0.4235, 4.0),  # listed child-first on purpose
]


def five_bus():
    d = os.path.join(ROOT, "five_bus")
    n = 48
    write_profile(os.path.join(d, "demand_res.csv"), daily_demand(n, 1.0, 0.3))
    write_profile(os.path.join(d, "demand_com.csv"), [0.6 if 16 <= i % 48 < 36 else 0.3 for i in range(n)])
    write_profile(os.path.join(d, "wind.csv"), [2.0 + 1.8 * math.sin(2 * math.pi * i / 48.0) for i in range(n)])
    write_doc(os.path.join(d, "network.json"), {
        "schema": "flexgrid.network.v1",
        "s_base_mva": 10.0,
        "load_power_factor": 0.95,
        "profiles": {"res": "demand_res.csv", "com": "demand_com.csv", "wind": "wind.csv"},
        "buses": [bus("b0", slack=True, p_export_max_mw=1.0), bus("b1"), bus("b2"), bus("b3"), bus("b4")],
        "lines": FIVE_BUS_LINES,
        "generators": [{"id": "w1", "bus": "b3", "kind": "wind_curtailable", "profile": "wind", "curtail_cost": 150.0}],
        "demand": [
            {"bus": "b1", "profile": "res"},
            {"bus": "b2", "profile": "com"},
            {"bus": "b3", "profile": "res", "scale": 0.4},
            {"bus": "b4", "profile": "res", "scale": 0.6},
        ],
    })


def cycle():
    d = os.path.join(ROOT, "cycle")
    write_profile(os.path.join(d, "demand.csv"), [0.5] * 4)
    write_doc(os.path.join(d, "network.json"), {
        "schema": "flexgrid.network.v1",
        "s_base_mva": 10.0,
        "profiles": {"demand": "demand.csv"},
        "buses": [bus("b0", slack=True), bus("b1"), bus("b2")],
        "lines": [line("l1", "b0", "b1", 0.2, 0.3, 5.0), line("l2", "b1", "b2", 0.2, 0.3, 5.0),
                  line("l3", "b2", "b0", 0.2, 0.3, 5.0)],
        "demand": [{"bus": "b1", "profile": "demand"}],
    })


def inexact():
    # A firm injection that can only be kept under the voltage cap by the
    # relaxation's fictitious losses: exact power flow would violate v_max.
    d = os.path.join(ROOT, "inexact")
    n = 4
    write_profile(os.path.join(d, "demand.csv"), [0.1] * n)
    write_profile(os.path.join(d, "gen.csv"), [8.0] * n)
    write_doc(os.path.join(d, "network.json"), {
        "schema": "flexgrid.network.v1",
        "s_base_mva": 10.0,
        "profiles": {"demand": "demand.csv", "gen": "gen.csv"},
        "buses": [bus("b0", slack=True, v_set_pu=1.05), bus("b1", v_max_pu=1.1)],
        "lines": [line("l1", "b0", "b1", 1.21, 1.21, 12.0)],
        "generators": [{"id": "g1", "bus": "b1", "kind": "firm", "profile": "gen"}],
        "demand": [{"bus": "b1", "profile": "demand"}],
    })


def oversupply_week():
    # One week at 30 minutes on the 5-bus topology. Wind regularly exceeds
    # local demand plus the interconnector export limit.
    d = os.path.join(ROOT, "oversupply_week")
    n = 336
    wind = []
    for i in range(n):
        day = i // 48
        h = (i % 48) / 2.0
        level = [4.5, 5.5, 3.0, 6.0, 5.0, 2.5, 5.8][day]
        diurnal = 0.6 * math.cos(2 * math.pi * (h - 3.0) / 24.0)  # windier at night
        wiggle = 0.3 * math.sin(2 * math.pi * i / 7.0)
        wind.append(max(0.0, min(6.5, level + diurnal + wiggle)))
    write_profile(os.path.join(d, "wind.csv"), wind)
    write_profile(os.path.join(d, "demand_res.csv"), daily_demand(n, 1.0, 0.3))
    write_profile(os.path.join(d, "demand_com.csv"),
                  [(0.6 if 16 <= i % 48 < 36 and (i // 48) < 5 else 0.3) for i in range(n)])
    write_doc(os.path.join(d, "network.json"), {
        "schema": "flexgrid.network.v1",
        "s_base_mva": 10.0,
        "load_power_factor": 0.95,
        "profiles": {"res": "demand_res.csv", "com": "demand_com.csv", "wind": "wind.csv"},
        "buses": [bus("b0", slack=True, p_export_max_mw=1.5), bus("b1"), bus("b2"), bus("b3"), bus("b4")],
        "lines": FIVE_BUS_LINES,
        "generators": [{"id": "w1", "bus": "b3", "kind": "wind_curtailable", "profile": "wind", "curtail_cost": 150.0}],
        "demand": [
            {"bus": "b1", "profile": "res"},
            {"bus": "b2", "profile": "com"},
            {"bus": "b3", "profile": "res", "scale": 0.4},
            {"bus": "b4", "profile": "res", "scale": 0.6},
        ],
    })


def main():
    oversupply_week()
    two_bus()
    five_bus()
    cycle()
    inexact()
    return 0


if __name__ == "__main__":
    sys.exit(main())
