"""Why the push planner limits hop length and turning between push points.

Plans the tumble of each plate with and without the limits in
``tumble_matrix.yaml`` and prints two path measures: the largest hop between
consecutive push points and the summed change of direction along the path.
Without the limits the optimiser jumps between distant push points and
zig-zags, which a real fingertip could not follow.

    python demos/tumble_ablation.py --out ablation_out
"""

import argparse
from pathlib import Path

import yaml

from pulleyflip.cli import ABLATION_COLUMNS, ablate

HERE = Path(__file__).parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--matrix", default=str(HERE / "tumble_matrix.yaml"))
    ap.add_argument("--plates", default="acrylic,stainless,plywood")
    ap.add_argument("--out", default=None, help="also write one trajectory CSV per cell here")
    args = ap.parse_args()
    cells = yaml.safe_load(Path(args.matrix).read_text())["cells"]
    out = None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    rows = ablate(cells, args.plates.split(","), out)
    col = {c: i for i, c in enumerate(ABLATION_COLUMNS)}
    print(f"{'variant':<30}{'largest hop mm':>15}{'turning deg':>13}{'switch at':>11}")
    for r in rows:
        ns = r[col["normalized_switch"]]
        switch = f"{ns:.2f}" if ns != "" else "-"
        print(f"{r[0]:<30}{r[col['max_spacing_mm']]:>15.2f}{r[col['oscillation_deg']]:>13.1f}{switch:>11}")


if __name__ == "__main__":
    main()
