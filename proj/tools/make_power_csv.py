#!/usr/bin/env python3
"""Writes a synthetic household power consumption table to data/power_synth.csv.

Columns follow the UCI household electric power layout (minute readings
summarised to numeric features). The generator is deterministic: a daily load
profile drives the current draw, sub-meters split part of it, and active power
follows from voltage and current with a noisy power factor.
"""

import argparse
import csv
import math
import random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=20061216)
    ap.add_argument("--out", default="data/power_synth.csv")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["hour_sin", "hour_cos", "weekend", "voltage", "global_intensity", "global_reactive_power",
                    "sub_metering_1", "sub_metering_2", "sub_metering_3", "global_active_power"])
        for i in range(args.rows):
            minute = (i * 37) % 1440
            day = (i * 37) // 1440
            hour = minute / 60.0
            weekend = 1 if day % 7 in (5, 6) else 0
            profile = 0.4 + 0.8 * math.exp(-((hour - 8.0) ** 2) / 3.0) + 1.3 * math.exp(-((hour - 20.0) ** 2) / 5.0)
            profile *= 1.2 if weekend else 1.0
            intensity = max(0.2, profile * 6.0 * rng.lognormvariate(0.0, 0.35))
            voltage = 240.5 - 0.35 * intensity + rng.gauss(0.0, 1.6)
            pf = min(0.99, max(0.6, rng.gauss(0.9, 0.05)))
            active = voltage * intensity * pf / 1000.0
            reactive = active * math.tan(math.acos(pf)) * rng.uniform(0.8, 1.2)
            wh = active * 1000.0 / 60.0
            s1 = round(max(0.0, wh * rng.uniform(0.0, 0.3) if 17 <= hour <= 21 else rng.uniform(0.0, 1.0)))
            s2 = round(max(0.0, wh * rng.uniform(0.0, 0.15)))
            s3 = round(max(0.0, wh * rng.uniform(0.2, 0.5)))
            w.writerow([f"{math.sin(2 * math.pi * hour / 24):.6f}", f"{math.cos(2 * math.pi * hour / 24):.6f}", weekend,
                        f"{voltage:.2f}", f"{intensity:.2f}", f"{reactive:.3f}", s1, s2, s3, f"{active:.3f}"])


if __name__ == "__main__":
    main()
