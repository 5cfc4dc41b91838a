"""
Command-line walkthrough
========================

Simulate a data set, fit a model, score it on new data, predict and
draw an effect curve, all through the ``ptcmnet`` command.
"""

# %%
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pandas as pd

work = Path(tempfile.mkdtemp(prefix="ptcmnet-demo-"))


def ptcmnet(*args):
    cmd = [sys.executable, "-m", "ptcmnet.cli", *map(str, args)]
    print("$ ptcmnet", " ".join(map(str, args)))
    subprocess.run(cmd, check=True)


# %%
ptcmnet("simulate", "--scenario", "2", "--n", "5000", "--seed", "1", "--out", work / "train.csv")
ptcmnet("simulate", "--scenario", "2", "--n", "2000", "--seed", "2", "--out", work / "test.csv")

# %%
# The run directory holds the model, the training history, the config
# echo and validation metrics.
ptcmnet("fit", "--train", work / "train.csv", "--out", work / "run", "--layers", "32,32",
        "--optimizer", "adam", "--lr", "0.005", "--epochs", "60", "--seed", "3")
print(sorted(p.name for p in (work / "run").iterdir()))

# %%
ptcmnet("evaluate", "--model", work / "run" / "model.json", "--data", work / "test.csv",
        "--out", work / "eval")
report = json.loads((work / "eval" / "metrics.json").read_text())
print(f"test AUC_cure {report['auc_cure']:.4f}, IBS {report['ibs']:.4f}")

# %%
ptcmnet("predict", "--model", work / "run" / "model.json", "--data", work / "test.csv",
        "--out", work / "pred.csv", "--times", "1,4")
print(pd.read_csv(work / "pred.csv").head())

ptcmnet("effect", "--model", work / "run" / "model.json", "--data", work / "test.csv",
        "--var", "x2", "--grid-size", "6", "--out", work / "x2.csv")
print(pd.read_csv(work / "x2.csv"))
