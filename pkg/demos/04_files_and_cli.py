# %% [markdown]
# Files on disk and the command line
#
# All binary files are little-endian with a 4-byte tag. This walk-through
# drives the CLI in-process, then pokes at the files it wrote.

# %%
import json
import tempfile
from pathlib import Path

from gradfeat import load_features, load_network
from gradfeat.cli import main
from gradfeat.errors import FormatError
from gradfeat.network import network_from_bytes

work = Path(tempfile.mkdtemp(prefix="gradfeat-demo-"))
main(["make-synthetic", "--seed", "1", "--out", str(work)])
main(["extract", "--net", str(work / "net.dfn"), "--data", str(work / "train.dfs"),
      "--out", str(work / "train.dff")])
main(["extract", "--net", str(work / "net.dfn"), "--data", str(work / "test.dfs"),
      "--out", str(work / "test.dff")])
main(["train", "--features", str(work / "train.dff"), "--data", str(work / "train.dfs"),
      "--out", str(work / "model.json")])
main(["eval", "--model", str(work / "model.json"), "--train-features", str(work / "train.dff"),
      "--features", str(work / "test.dff"), "--data", str(work / "test.dfs"),
      "--out", str(work / "report.json")])

# %%
for name in ("net.dfn", "train.dff", "train.dfs"):
    main(["info", str(work / name)])

print(json.loads((work / "train.dff.json").read_text()))
print(len(load_features(work / "train.dff")), "features;",
      load_network(work / "net.dfn").dims, "network")

# %%
# A cut-off file reports where it ran out
raw = (work / "net.dfn").read_bytes()
try:
    network_from_bytes(raw[:100])
except FormatError as exc:
    print(type(exc).__name__, exc)
