#!/usr/bin/env python3
"""Render memsim trace/summary CSVs (optional helper, needs matplotlib)."""
import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", type=pathlib.Path, help="trace.csv or summary.csv")
    ap.add_argument("-o", "--out", type=pathlib.Path, default=None)
    args = ap.parse_args()
    cols = read(args.csv)
    out = args.out or args.csv.with_suffix(".png")

    if {"phi", "i_in"} <= cols.keys():
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        ax1.plot(cols["t"], cols["v_in"], label="v_in")
        ax1.plot(cols["t"], cols["i_in"], label="i_in")
        ax1.set_xlabel("t (s)")
        ax1.legend()
        ax2.plot(cols["phi"], cols["i_in"], lw=0.8)
        ax2.set_xlabel("phi (V s)")
        ax2.set_ylabel("i_in (A)")
        ax2.set_title("pinched hysteresis")
    elif {"sweep_param", "lobe_area"} <= cols.keys():
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.loglog(cols["sweep_param"], cols["lobe_area"], "o-")
        ax.set_xlabel("sweep parameter")
        ax.set_ylabel("lobe area")
    elif {"v_in", "v_out"} <= cols.keys():
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(cols["t"], cols["v_in"], label="v_in")
        ax.plot(cols["t"], cols["v_out"], label="v_out")
        ax.set_xlabel("t (s)")
        ax.legend()
    else:
        raise SystemExit(f"unrecognized columns: {list(cols)}")
    fig.tight_layout()
    fig.savefig(out, dpi=140)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
