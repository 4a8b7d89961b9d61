#!/usr/bin/env python3
"""Regenerate the small synthetic inputs under examples_data/ (stdlib only)."""
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "examples_data"


def write_capacity(path, rows):
    with open(path, "w", newline="\n") as f:
        f.write("cycle,capacity_ah\n")
        for c, q in rows:
            f.write(f"{c},{q:.6f}\n")


def phi(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def main():
    OUT.mkdir(exist_ok=True)
    rng = random.Random(7)

    # Linear plus exponential fade, 2.5 mAh measurement noise.
    write_capacity(OUT / "synthetic_knee.csv",
                   [(n, 5.0 * (1 - 1e-4 * n - 3e-4 * (math.exp(n / 150) - 1)) + rng.gauss(0, 0.0025))
                    for n in range(600)])
    write_capacity(OUT / "linear_fade.csv", [(n, 5.0 - 0.001 * n) for n in range(300)])
    write_capacity(OUT / "sine.csv", [(n, 1.0 + math.sin(2 * math.pi * 0.05 * n)) for n in range(2048)])

    # Ten discharge RPTs: a dominant peak near 4.05 V whose height rises, then falls.
    rpt_dir = OUT / "rpt"
    rpt_dir.mkdir(exist_ok=True)
    entries = []
    for k in range(10):
        height = 12.0 + 6.0 * math.exp(-0.5 * ((k - 4) / 2.0) ** 2)
        bumps = [(3.65, 0.06, 0.35 * (1 - 0.03 * k)), (4.05 - 0.002 * k, 0.035, height * 0.035 * math.sqrt(2 * math.pi))]
        name = f"rpt_{k:02d}.csv"
        volts = [4.2 - 0.002 * i for i in range(601)]
        q_top = sum(a * phi((4.2 - c) / s) for c, s, a in bumps) + 0.3 * 1.2
        with open(rpt_dir / name, "w", newline="\n") as f:
            f.write("voltage_v,capacity_ah\n")
            for v in volts:
                q = sum(a * phi((v - c) / s) for c, s, a in bumps) + 0.3 * (v - 3.0)
                f.write(f"{v:.4f},{q_top - q:.7f}\n")
        entries.append({"path": name, "rpt_index": k, "cycle_at_rpt": 60 * k, "direction": "discharge"})
    (rpt_dir / "manifest.json").write_text(json.dumps({"rpts": entries}, indent=2) + "\n")


if __name__ == "__main__":
    main()
