"""Phase-portrait type along a speed sweep and nullclines at a few speeds.

    python scripts/portrait_evolution.py -m configs/boomerang_tilted.json
"""

import argparse
from pathlib import Path

import numpy as np

from chemflood import emit
from chemflood.models import load_model, require_valid
from chemflood.twave import (
    TravellingWaveSystem,
    classify_portrait,
    nullcline_rows,
    sequence_is_ordered,
    velocity_window,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-m", "--model", default="configs/boomerang.json")
    ap.add_argument("-n", type=int, default=200)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    model = load_model(args.model)
    require_valid(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w = velocity_window(model)
    print("window:", {k: round(v, 10) if isinstance(v, float) else v for k, v in w.to_dict().items()})

    vs = np.linspace(w.v_max / args.n, w.v_max + 0.05, args.n)
    reports = [classify_portrait(TravellingWaveSystem(model, float(v))) for v in vs]
    types = [r.portrait for r in reports]
    rows = [(r.v, r.portrait.value, *(r.gap or (float("nan"), float("nan")))) for r in reports]
    path = out / "portrait_types.csv"
    emit.write_csv(path, emit.manifest("portrait_evolution", args.model, model.to_config(), [path], n=args.n),
                   ["v", "type", "c1", "c2"], rows)
    changes = [(types[0].value, vs[0])] + [(b.value, v) for a, b, v in zip(types, types[1:], vs[1:]) if a != b]
    for name, v in changes:
        print(f"  from v={v:.6f}: {name}")
    print("ordered:", sequence_is_ordered(types))

    for label, v in (("type_i", 0.5 * (w.v_0I + w.v_min)), ("type_ii", 0.5 * (w.v_min + w.v_max)),
                     ("above_vmax", w.v_max + 0.01)):
        sys = TravellingWaveSystem(model, v)
        path = out / f"nullclines_{label}.csv"
        emit.write_csv(path, emit.manifest("portrait_evolution", args.model, model.to_config(), [path], v=v),
                       ["c", "s_1", "s_2"], nullcline_rows(sys))


if __name__ == "__main__":
    main()
