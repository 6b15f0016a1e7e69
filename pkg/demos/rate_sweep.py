"""Convergence of row-sum densities to their limit, with the rate bound.

For each model the script inverts the row characteristic function at
n = 8 .. 256, measures the grid sup distance to the limit density, and
prints it next to the rate quantity rho(n).  A constant column
err/rho means the bound has the right order.

    python3 demos/rate_sweep.py [model ...]
"""
import sys

from lltlab.array import model_from_name
from lltlab.cli import fit_rate
from lltlab.rates import limit_density_grid, measure_sup_error, rho

NS = [8, 16, 32, 64, 128, 256]


def sweep(name):
    model = model_from_name(name)
    lim = limit_density_grid(model)
    print(f"\n{name}")
    print(f"{'n':>5} {'sup error':>12} {'rho':>12} {'err/rho':>9}")
    errs = []
    for n in NS:
        sd, _, _ = measure_sup_error(model, n, lim)
        r = rho(model, n).rho
        errs.append(sd.value)
        print(f"{n:>5} {sd.value:12.4e} {r:12.4e} {sd.value / r:9.4f}")
    fit = fit_rate(NS, errs)
    print(f"log-log slope {fit.slope:.3f} (r^2 {fit.r_squared:.4f})")


if __name__ == "__main__":
    for name in sys.argv[1:] or ["example1:alpha=1", "example2"]:
        sweep(name)
