#!/usr/bin/env python3
"""Writes the bundled synthetic ground-station CSV (data/station_synthetic.csv).

One-minute samples for a block of days in each of 2013, 2014 and 2015 so a
year-based train/validation/test split has data in every part. Eight
upstream covariates drive a positive ground response through a smoothed
coupling term with a daily cycle; a storm interval in every block raises the
driving and is marked by the `storm` column. A small fraction of responses get
large spikes and some covariate readings are missing.
"""

import argparse
import csv
import datetime as dt
import math
import random

COVARIATES = ["bx", "by", "bz", "bt", "speed", "density", "temperature", "pressure"]


def block(rng, start, days, writer):
    minutes = days * 24 * 60
    storm_begin = rng.randrange(minutes // 4, minutes // 2)
    storm_end = storm_begin + rng.randrange(12 * 60, 30 * 60)
    bx, by, bz = 0.0, 0.0, 0.0
    speed, density, temp = 420.0, 5.0, 1.0e5
    coupling = 0.0
    for i in range(minutes):
        t = start + dt.timedelta(minutes=i)
        storm = storm_begin <= i < storm_end
        # Mean-reverting random walks; storms pull Bz south and speed up.
        bx += 0.02 * (0.0 - bx) + 0.3 * rng.gauss(0, 1)
        by += 0.02 * (0.0 - by) + 0.3 * rng.gauss(0, 1)
        bz += 0.02 * ((-12.0 if storm else 0.0) - bz) + 0.4 * rng.gauss(0, 1)
        speed += 0.01 * ((650.0 if storm else 420.0) - speed) + 3.0 * rng.gauss(0, 1)
        density = max(0.5, density + 0.02 * ((12.0 if storm else 5.0) - density) + 0.2 * rng.gauss(0, 1))
        temp = max(1.0e4, temp + 0.02 * ((3.0e5 if storm else 1.0e5) - temp) + 4.0e3 * rng.gauss(0, 1))
        bt = math.sqrt(bx * bx + by * by + bz * bz)
        pressure = 1.6726e-6 * density * speed * speed

        coupling += (speed * max(-bz, 0.0) / 1000.0 - coupling) / 40.0
        tod = (t.hour * 60 + t.minute) / 1440.0
        daily = 1.0 + 0.4 * math.cos(2 * math.pi * (tod - 0.1))
        response = 0.3 + 2.0 * coupling * daily + 0.25 * abs(rng.gauss(0, 1))
        if rng.random() < 0.003:
            response += abs(rng.gauss(0, 4.0))

        row = [t.strftime("%Y-%m-%dT%H:%M:%SZ")]
        for v in (bx, by, bz, bt, speed, density, temp, pressure):
            row.append("" if rng.random() < 0.01 else f"{v:.4g}")
        row.append(f"{response:.4f}")
        row.append("1" if storm else "0")
        writer.writerow(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output", default="data/station_synthetic.csv")
    parser.add_argument("--days", type=int, default=8, help="days per year block")
    parser.add_argument("--seed", type=int, default=20130101)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    with open(args.output, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["timestamp"] + COVARIATES + ["dbdt", "storm"])
        for year in (2013, 2014, 2015):
            block(rng, dt.datetime(year, 3, 1), args.days, writer)


if __name__ == "__main__":
    main()
