"""`fig2` data: success bound versus corrected transmission for several chi.

    python scripts/make_fig2.py --eta 0.9 --chis 0.3,0.6 --outdir results
"""

import argparse
from pathlib import Path

from cvqec.cli import main


def run(eta, chis, points, outdir):
    outdir.mkdir(parents=True, exist_ok=True)
    for chi in chis:
        path = outdir / f"fig2_eta{eta:g}_chi{chi:g}.csv"
        code = main(["fig2", "--eta", str(eta), "--chi", str(chi), "--points", str(points),
                     "-o", str(path)])
        if code:
            raise SystemExit(code)
        print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.9)
    ap.add_argument("--chis", default="0.3,0.6")
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    a = ap.parse_args()
    run(a.eta, [float(c) for c in a.chis.split(",")], a.points, a.outdir)
