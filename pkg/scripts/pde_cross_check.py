"""Compare simulated c-front speeds with the travelling-wave prediction.

The refinement study halves eps_c at a fixed number of cells per
dissipation length, and separately doubles the cells at fixed eps_c,
so the two error sources can be told apart.

    python scripts/pde_cross_check.py --kappa 0.1 2 --cells 4000
    python scripts/pde_cross_check.py --kappa 1 --refine 3
"""

import argparse
import time
from pathlib import Path

from chemflood import emit
from chemflood.connect import find_v_for_kappa
from chemflood.models import load_model, require_valid
from chemflood.pdesim import SimConfig, measure_front_speed, simulate


def run(model, kappa, kind, eps_c, cells):
    t0 = time.perf_counter()
    res = simulate(model, SimConfig.for_kappa(kappa, kind, eps_c=eps_c, cells=cells))
    est = measure_front_speed(res)
    return est, res.steps, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-m", "--model", default="configs/boomerang.json")
    ap.add_argument("--kappa", type=float, nargs="+", default=[0.1, 2.0])
    ap.add_argument("--system", default="noneq", choices=["noneq", "diff"])
    ap.add_argument("--eps-c", type=float, default=2e-3)
    ap.add_argument("--cells", type=int, default=4000)
    ap.add_argument("--refine", type=int, default=0, help="levels of eps and grid refinement ending at --eps-c/--cells")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    model = load_model(args.model)
    require_valid(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for kappa in args.kappa:
        v_pred = find_v_for_kappa(model, kappa, args.system).v
        if args.refine:
            # level j uses eps_c * 2^j with cells / 2^j, then the same eps on twice the cells
            cases = []
            for j in reversed(range(args.refine)):
                eps, cells = args.eps_c * 2**j, max(200, args.cells // 2**j)
                cases += [(eps, cells), (eps, 2 * cells)]
        else:
            cases = [(args.eps_c, args.cells)]
        for eps, cells in cases:
            est, steps, secs = run(model, kappa, args.system, eps, cells)
            rel = (est.speed - v_pred) / v_pred
            rows.append((kappa, eps, cells, est.speed, est.stderr, v_pred, rel, steps, secs))
            print(f"kappa={kappa:g} eps_c={eps:.2e} N={cells:5d}: v={est.speed:.6f} +- {est.stderr:.1e} "
                  f"predicted {v_pred:.6f} ({rel:+.3%}) {steps} steps {secs:.1f}s")
    path = out / "pde_cross_check.csv"
    emit.write_csv(path, emit.manifest("pde_cross_check", args.model, model.to_config(), [path], system=args.system),
                   ["kappa", "eps_c", "cells", "speed", "stderr", "predicted", "relative_error", "steps", "seconds"],
                   rows)


if __name__ == "__main__":
    main()
