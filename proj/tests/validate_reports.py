"""Runs every llot subcommand on the bundled data and validates the reports against schemas/."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

llot, root = sys.argv[1], pathlib.Path(sys.argv[2])
data = root / "data"
plan, bump = str(data / "two_bump64_plan.json"), str(data / "two_bump64.csv")

runs = {
    "regularize": [["regularize", "--plan", plan, "--density", bump, "--eps", "0.04"]],
    "quantum-check": [["quantum-check", "--plan", plan, "--density", bump, "--eps", "0.04", "--samples", "100"]],
    "mmot": [
        ["mmot", "--density", str(data / "two_site.csv"), "--n", "2", "--solver", "lp"],
        ["mmot", "--density", str(data / "gaussian16.csv"), "--n", "2", "--solver", "sinkhorn", "--beta", "50"],
    ],
    "sweep": [["sweep", "--density", bump, "--n", "2", "--etas", "1e-3:1e-1:5"]],
    "selftest": [["selftest"]],
}

failed = 0
with tempfile.TemporaryDirectory() as tmp:
    for command, invocations in runs.items():
        schema = json.loads((root / "schemas" / f"{command}.schema.json").read_text())
        for args in invocations:
            if command == "sweep":
                args = args + ["--out", str(pathlib.Path(tmp) / "sweep.csv")]
            proc = subprocess.run([llot, *args], capture_output=True, text=True)
            if proc.returncode != 0:
                print(f"FAIL {' '.join(args)}: exit {proc.returncode}: {proc.stderr.strip()}")
                failed += 1
                continue
            try:
                jsonschema.validate(json.loads(proc.stdout), schema)
                print(f"ok   {command}: {' '.join(args[1:3])}")
            except jsonschema.ValidationError as e:
                print(f"FAIL {command}: {e.message} at {list(e.absolute_path)}")
                failed += 1
sys.exit(1 if failed else 0)
