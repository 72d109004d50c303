#!/usr/bin/env python3
"""Plot a comparison CSV written by `dmaddpg compare`."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="comparison CSV (step column plus one column per run)")
    parser.add_argument("-o", "--output", default="compare.png")
    parser.add_argument("--title", default="Evaluation score")
    parser.add_argument("--baseline", type=float, help="draw a horizontal random-policy line")
    args = parser.parse_args()

    table = pd.read_csv(args.csv)
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in table.columns[1:]:
        ax.plot(table["step"], table[column], label=column)
    if args.baseline is not None:
        ax.axhline(args.baseline, color="grey", linestyle="--", label="random")
    ax.set_xlabel("training step")
    ax.set_ylabel("mean evaluation score")
    ax.set_title(args.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
