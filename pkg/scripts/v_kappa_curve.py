"""Sweep the admissible shock speed against the dissipation ratio.

Writes one CSV per system kind to the output directory and, with --plot,
a log-kappa figure of both curves.

    python scripts/v_kappa_curve.py -m configs/boomerang.json -n 50 --plot
"""

import argparse
import time
from pathlib import Path

from chemflood import emit
from chemflood.connect import sweep_curve
from chemflood.models import load_model, require_valid
from chemflood.twave import SystemKind


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-m", "--model", default="configs/boomerang.json")
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--spacing", default="uniform-in-v", choices=["uniform-in-v", "log-in-kappa"])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    model = load_model(args.model)
    require_valid(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for kind in SystemKind:
        t0 = time.perf_counter()
        curve = sweep_curve(model, args.n, args.spacing, kind, jobs=args.jobs)
        curves[kind] = curve
        path = out / f"v_kappa_{kind.value}.csv"
        meta = emit.manifest("v_kappa_curve", args.model, model.to_config(), [path], n=args.n,
                             spacing=args.spacing, system=kind.value)
        emit.write_csv(path, meta, ["v", "kappa", "s_minus", "s_plus", "rh_residual"], curve.rows())
        worst = max(abs(p.integral_residual) for p in curve.samples)
        print(f"{kind.value}: {len(curve.samples)} points, kappa {curve.kappa[0]:.4g} .. {curve.kappa[-1]:.4g}, "
              f"kappa_crit {curve.kappa_crit:.4g}, integral residual {worst:.1e}, "
              f"{time.perf_counter() - t0:.1f}s -> {path}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for kind, curve in curves.items():
            ax.semilogx(curve.kappa, curve.v, ".-", label=kind.value)
        w = next(iter(curves.values())).window
        ax.axhline(w.v_min, color="grey", lw=0.8, ls="--")
        ax.axhline(w.v_max, color="grey", lw=0.8, ls="--")
        ax.set_xlabel("kappa")
        ax.set_ylabel("c-shock speed v")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "v_kappa.png", dpi=150)


if __name__ == "__main__":
    main()
