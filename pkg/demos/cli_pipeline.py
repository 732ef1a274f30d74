"""
Running the whole pipeline from the command line
================================================

Each stage reads the previous stage's files and writes its own plus a
manifest. Equivalent shell session::

    coplay --seed 1 --out run synth --players 200
    coplay --seed 1 --out run ingest --input run/synth/matches.jsonl
    coplay --seed 1 --out run rate
    coplay --seed 1 --out run network
    coplay --seed 1 --out run train
    coplay --seed 1 --out run eval
    coplay --seed 1 --out run report
"""

import sys
import tempfile
from pathlib import Path

from coplay.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="coplay-"))
base = ["--seed", "1", "--out", str(out)]
steps = [["synth", "--players", "200"],
         ["ingest", "--input", str(out / "synth" / "matches.jsonl")],
         ["rate"], ["network"], ["train"], ["eval"], ["report"]]
for step in steps:
    print(f"$ coplay {' '.join(base + step)}")
    code = main(base + step)
    if code:
        sys.exit(code)

print(f"\nplot-ready tables in {out / 'report'}:")
for path in sorted((out / "report").glob("*.csv")):
    print(" ", path.name)
print((out / "report" / "gain_by_dimension.csv").read_text())
