#!/usr/bin/env python3
"""Run each sqdf subcommand and validate its JSON report against schemas/."""

import argparse
import json
import pathlib
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource


def invocations(data):
    return [
        ["count", "--set", "congruence:3:0", "--n", "100", "--t", "3"],
        ["count", "--set", "interval:1:500", "--n", "500", "--lambda", "5", "--mu", "5", "--varnavides"],
        ["weyl", "--lambda", "10", "--mu", "5", "--alpha", "0"],
        ["weyl", "--lambda", "60", "--mu", "30", "--q", "6", "--alpha", "0.25"],
        ["weyl", "--lambda", "200", "--mu", "200", "--scan", "--eta", "0.4"],
        ["weyl", "--calibrate", "--lambdas", "200", "--etas", "0.4", "0.1"],
        ["mollifier", "--q", "2", "--L", "20", "--samples", "500", "--t", "4"],
        ["lambda", "--set", "random:0.4:3", "--n", "600", "--lambda", "12", "--mu", "12", "--q", "3"],
        ["dichotomy", "--config", str(data / "configs" / "dichotomy_desk.json")],
        ["dichotomy", "--set", "congruence:11:0", "--n", "100000", "--epsilon", "0.008", "--eta", "0.5",
         "--mu-factor", "2", "--n-factor", "1", "--lambda", "96", "--mu", "96", "--cross-check"],
        ["iterate", "--config", str(data / "configs" / "iterate_desk.json"), "--seeds", "5"],
        ["census", "--set", "random:0.4:1", "--n", "20000", "--m", "10", "--pairs", "20"],
        ["verify", "--quick", "--vectors", str(data / "vectors.json")],
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("binary")
    ap.add_argument("--schemas", required=True, type=pathlib.Path)
    ap.add_argument("--data", required=True, type=pathlib.Path)
    args = ap.parse_args()

    schemas = {}
    for p in sorted(args.schemas.glob("*.schema.json")):
        s = json.loads(p.read_text())
        jsonschema.Draft202012Validator.check_schema(s)
        schemas[s["$id"]] = s
    registry = Registry().with_resources((k, Resource.from_contents(v)) for k, v in schemas.items())

    failures = 0
    for argv in invocations(args.data):
        for stamp in (["--no-timestamp"], []):
            proc = subprocess.run([args.binary, *argv, *stamp], capture_output=True, text=True)
            label = " ".join(argv + stamp)
            if proc.returncode not in (0, 2):
                print(f"FAIL {label}: exit {proc.returncode}\n{proc.stderr}")
                failures += 1
                continue
            report = json.loads(proc.stdout)
            schema = schemas.get("urn:sqdf:" + argv[0])
            if schema is None:
                print(f"FAIL {label}: no schema for {argv[0]}")
                failures += 1
                continue
            errors = list(jsonschema.Draft202012Validator(schema, registry=registry).iter_errors(report))
            if errors:
                failures += 1
                print(f"FAIL {label}")
                for e in errors[:5]:
                    print(f"  {list(e.absolute_path)}: {e.message[:300]}")
            else:
                print(f"ok   {label}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
