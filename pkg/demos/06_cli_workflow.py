"""The command-line pipeline, end to end.

Writes a synthetic mixed-type dataset to CSV, then drives the installed
``spngibbs`` command through a full workflow: split, build, fit, eval, ess,
and bench, using a temporary directory for all outputs.

Run:  python3 demos/06_cli_workflow.py
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from spngibbs.dataio import Column, Dataset, save_delimited
from spngibbs.synth import mixed_mixture


def sh(*args):
    cmd = [sys.executable, "-m", "spngibbs.cli", *map(str, args)]
    print(f"\n$ spngibbs {' '.join(map(str, args))}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    out = (proc.stdout + proc.stderr).strip()
    print("\n".join("  " + line for line in out.splitlines()[:12]))
    if proc.returncode:
        raise SystemExit(f"command failed with exit code {proc.returncode}")


def main():
    work = Path(tempfile.mkdtemp(prefix="spngibbs-demo-"))
    X, kinds = mixed_mixture(600, 5, np.random.default_rng(42))
    cols = [
        Column(name=f"c{i}", kind=kind) for i, kind in enumerate(kinds)
    ]
    data_csv = work / "all.csv"
    save_delimited(data_csv, Dataset(X=X, columns=cols, source=str(data_csv)))
    print(f"wrote {data_csv} ({X.shape[0]} rows, kinds: {', '.join(kinds)})")

    sh("split", "--data", data_csv, "--seed", 1, "--out-prefix", work / "part")
    sh("build", "--data", work / "part.train.csv", "--cs", 3, "--cp", 2,
       "--out", work / "model.json")
    sh("fit", "--data", work / "part.train.csv", "--model", work / "model.json",
       "--sampler", "topdown", "--iters", 80, "--burnin", 30, "--thin", 2,
       "--alpha", 1.0, "--seed", 7, "--ratios", 0.1, "--out", work / "run")
    sh("eval", "--run", work / "run", "--data", work / "part.test.csv")
    sh("ess", "--run", work / "run", "--statistic", "heldout",
       "--data", work / "part.val.csv")
    sh("bench", "--synthetic", "400,5", "--cs-list", "2,4",
       "--iters", 3, "--warmup", 1, "--seed", 0)

    print(f"\nrun directory contents ({work / 'run'}):")
    for p in sorted((work / "run").rglob("*")):
        print(f"  {p.relative_to(work)}")


if __name__ == "__main__":
    main()
