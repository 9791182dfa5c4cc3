"""
From Planetoid files to the command line
========================================

The public Cora, Citeseer and Pubmed releases ship as pickled
``ind.<name>.*`` files. This script converts one of them to the plain-text
formats the ``svga`` command reads, then trains and evaluates through the
CLI entry point.

    python demos/05_planetoid_and_cli.py /path/to/planetoid cora

Without arguments it writes a small synthetic dataset instead.
"""

import sys
import tempfile
from pathlib import Path

from svga import cli
from svga.data import save_dataset
from svga.planetoid import load_planetoid
from svga.synthetic import citation_like

if len(sys.argv) == 3:
    ds = load_planetoid(sys.argv[1], sys.argv[2])
    epochs = "2000"
else:
    ds = citation_like(n=400, m=200, seed=3)
    epochs = "100"

work = Path(tempfile.mkdtemp(prefix="svga-demo-"))
files = save_dataset(ds, work / "data")
print("dataset files:", *(str(p) for p in files.values()))

common = ["--edges", str(files["edges"]), "--features", str(files["features"])]
run = work / "run"
cli.main(["train", *common, "--labels", str(files["labels"]), "--epochs", epochs, "--out", str(run)])
print("run directory:", sorted(p.name for p in run.iterdir()))

# Recomputing the report from the run directory gives the same bytes.
cli.main(["evaluate", "--run", str(run), "--out", str(work / "metrics-again")])
print("identical report:", (run / "metrics").read_bytes() == (work / "metrics-again").read_bytes())

# Estimates for the test nodes, then a 5-fold MLP on them.
cli.main(["estimate", *common, "--run", str(run), "--out", str(work / "xhat")])
cli.main(["classify", "--xhat", str(work / "xhat"), "--labels", str(files["labels"])])
