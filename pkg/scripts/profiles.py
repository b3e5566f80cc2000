"""Self-similar Riemann profiles for several dissipation ratios plus the Lax baseline.

    python scripts/profiles.py --kappa 2 0.05 0.001 --plot
"""

import argparse
from pathlib import Path

import numpy as np

from chemflood import emit
from chemflood.models import load_model, require_valid
from chemflood.riemann import profile_distance, sample_profile, solve_lax_baseline, solve_riemann


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-m", "--model", default="configs/boomerang.json")
    ap.add_argument("--kappa", type=float, nargs="+", default=[2.0, 0.05, 1e-3])
    ap.add_argument("--system", default="noneq", choices=["noneq", "diff"])
    ap.add_argument("-n", type=int, default=1000)
    ap.add_argument("--out", default="results")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    model = load_model(args.model)
    require_valid(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    xi = np.linspace(-0.1, 1.6, args.n)
    lax = solve_lax_baseline(model)
    runs = [("lax", lax)] + [(f"kappa={k:g}", solve_riemann(model, k, args.system)) for k in args.kappa]
    for name, seq in runs:
        prof = sample_profile(seq, xi)
        path = out / f"profile_{name.replace('=', '_')}.csv"
        meta = emit.manifest("profiles", args.model, model.to_config(), [path], run=name, system=args.system)
        emit.write_csv(path, meta, ["xi", "s", "c"], prof.rows())
        lo, v, hi = seq.speed_chain()
        print(f"{name:>14}: v={v:.8f}  s-={seq.shock.u_minus[0]:.6f}  s+={seq.shock.u_plus[0]:.6f}  "
              f"chain ({lo:.4f}, {v:.4f}, {hi:.4f})  distance to lax {profile_distance(seq, lax, xi):.3e}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for name, seq in runs:
            ax.plot(xi, sample_profile(seq, xi).s, label=name, lw=1.2 if name != "lax" else 2.0)
        ax.set_xlabel("xi = x/t")
        ax.set_ylabel("s")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "profiles.png", dpi=150)


if __name__ == "__main__":
    main()
