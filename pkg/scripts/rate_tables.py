"""Write the convergence table of every compiled operator to an output directory."""

import argparse
from pathlib import Path

from kgcontrol.experiments import RATE_OPS, rates
from kgcontrol.reports import write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/rates")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for op in RATE_OPS:
        table = rates(op)
        write_table(out / f"rates_{op}.txt", ["tau", "error", "order", "total_time"], table.rows(),
                    f"op={op} amount={table.info['amount']}")
        errs = "  ".join(f"{t:g}:{e:.3e}" for t, e in zip(table.taus, table.errors))
        print(f"{op:12s} {'monotone' if table.monotone else 'NOT monotone':13s} {errs}")


if __name__ == "__main__":
    main()
