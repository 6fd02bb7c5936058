"""Tabulate the curvature eta(theta | s, G) of the population criterion over a grid.

Prints long-format CSV (s, G, theta, alpha, eta) suitable for plotting.
Exits nonzero if eta is ever non-negative.

    python3 scripts/eta_landscape.py --windows 2:5 2:10 2:50 > eta.csv
"""

import argparse
import csv
import sys

import numpy as np

from truncexp import model
from truncexp.model import StudyWindow


def _window(text):
    s, G = (float(v) for v in text.split(":"))
    return StudyWindow(s, G)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--windows", type=_window, nargs="+", default=[_window(v) for v in ("2:5", "2:10", "2:50", "1:3", "5:100")])
    ap.add_argument("--theta-min", type=float, default=0.01)
    ap.add_argument("--theta-max", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=121)
    args = ap.parse_args()

    thetas = np.geomspace(args.theta_min, args.theta_max, args.points)
    out = csv.writer(sys.stdout)
    out.writerow(["s", "G", "theta", "alpha", "eta"])
    worst = -np.inf
    for w in args.windows:
        eta = model.eta(thetas, w)
        alpha = model.alpha(thetas, w)
        for th, a, e in zip(thetas, alpha, eta):
            out.writerow([w.s, w.G, repr(float(th)), repr(float(a)), repr(float(e))])
        worst = max(worst, float(eta.max()))
    if worst >= 0:
        print(f"eta reached {worst} on the grid", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
