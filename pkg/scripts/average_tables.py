# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Average the metric CSVs of several seeds into one table

    python scripts/average_tables.py saved_models/maip/*/metrics.csv --out results.csv
"""
import argparse
import glob

from maiplab.evaluation import MetricTable, average_tables


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('tables', nargs='+', help='metric CSV files (glob patterns allowed)')
    parser.add_argument('--out', type=str, default=None)
    parser.add_argument('--precision', type=int, default=2)
    args = parser.parse_args()

    paths = sorted({p for pattern in args.tables for p in (glob.glob(pattern) or [pattern])})
    tables = [MetricTable.from_csv(p) for p in paths]
    print('averaging {:d} tables'.format(len(tables)))
    table = average_tables(tables)
    print(table.format_table(args.precision))
    if args.out is not None:
        table.to_csv(args.out)
        print('written to {}'.format(args.out))
