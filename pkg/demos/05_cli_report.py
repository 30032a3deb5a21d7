"""
Running the checker from the command line
=========================================

The ``pestov-lab`` entry point writes a JSON report with one record per
check. This script drives it in-process and summarizes the table.
"""

import json
import tempfile
from collections import Counter
from pathlib import Path

from pestov_lab.cli import main

out = Path(tempfile.mkdtemp()) / "report.json"
code = main(["check", "--suite", "pointwise,grassmannian", "--manifold", "sphere:3", "--k", "2",
             "--seed", "7", "--pairs", "8", "--loops", "20", "--samples", "2048", "--report", str(out)])
report = json.loads(out.read_text())

print("exit code", code)
print(Counter((r["identity_id"], r["verdict"]) for r in report["records"]).most_common())
pestov = [r for r in report["records"] if r["identity_id"] == "PESTOV"]
print("PESTOV orders:", [r["convergence_order"] for r in pestov])
