"""`fig3` data: two-path linear-optics amplifier at eta = 0.01.

Writes the default (fidelity-windowed) CSV and a fixed-sweep CSV over
G in [1, 16] that includes the gains where fidelity drops below 0.995.

    python scripts/make_fig3.py --outdir results --workers 4
"""

import argparse
from pathlib import Path

from cvqec.cli import main


def run(outdir, workers, paths):
    outdir.mkdir(parents=True, exist_ok=True)
    common = ["fig3", "--paths", str(paths), "--workers", str(workers)]
    jobs = {
        f"fig3_N{paths}_windowed.csv": [],
        f"fig3_N{paths}_G1-16.csv": ["--g-stop", "16", "--points", "12"],
    }
    for name, extra in jobs.items():
        path = outdir / name
        code = main([*common, *extra, "-o", str(path)])
        if code:
            raise SystemExit(code)
        print(path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--paths", type=int, default=2)
    a = ap.parse_args()
    run(a.outdir, a.workers, a.paths)
