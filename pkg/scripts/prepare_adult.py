"""Convert the raw UCI Adult files into a headed CSV of categorical columns.

Usage: python3 scripts/prepare_adult.py adult.data adult.test -o adult.csv

Keeps the eight categorical attributes and the income label; numeric
columns are dropped and the trailing period of the test-split labels is
removed. Missing values ("?") stay as their own category.
"""

import argparse
import csv

RAW_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]
KEEP = [
    "workclass", "education", "marital-status", "occupation",
    "relationship", "race", "sex", "native-country", "income",
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw", nargs="+", help="adult.data / adult.test files")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()
    picks = [RAW_COLUMNS.index(c) for c in KEEP]
    with open(args.output, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(KEEP)
        for path in args.raw:
            with open(path) as fh:
                for row in csv.reader(fh, skipinitialspace=True):
                    if len(row) != len(RAW_COLUMNS):
                        continue  # blank lines and the test file's banner
                    row[-1] = row[-1].rstrip(".")
                    writer.writerow([row[i].strip() for i in picks])


if __name__ == "__main__":
    main()
