#!/usr/bin/env python3
"""Validate emitted JSON files against docs/schemas.

The schema is picked from the file name: manifest.json, prior.json,
result_<mode>.json, timing_<mode>.json, calibration*.json, and any other
*.json is treated as an experiment config (normalized form).

    tools/validate_json.py FILE_OR_DIR...

Directories are searched recursively. Exit status 1 if any file fails.
"""

import argparse
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMA_DIR = pathlib.Path(__file__).resolve().parent.parent / "docs" / "schemas"


def load_registry():
    resources = []
    for path in SCHEMA_DIR.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        resources.append((path.name, Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def schema_for(path):
    name = path.name
    if name == "manifest.json":
        return "manifest.schema.json"
    if name == "prior.json":
        return "prior.schema.json"
    if name.startswith("result_"):
        return "result.schema.json"
    if name.startswith("timing_"):
        return "timing.schema.json"
    if name.startswith("calibration"):
        return "calibration.schema.json"
    return "config.schema.json"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("paths", nargs="+", type=pathlib.Path)
    args = parser.parse_args()

    registry = load_registry()
    files = []
    for p in args.paths:
        files.extend(sorted(p.rglob("*.json")) if p.is_dir() else [p])
    if not files:
        print("no JSON files found", file=sys.stderr)
        return 1

    failed = 0
    for f in files:
        schema_name = schema_for(f)
        schema = registry.contents(schema_name)
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        errors = sorted(validator.iter_errors(json.loads(f.read_text())), key=str)
        if errors:
            failed += 1
            first = errors[0]
            where = "/".join(str(p) for p in first.absolute_path)
            print(f"FAIL {f} ({schema_name}): {where}: {first.message}")
        else:
            print(f"ok   {f} ({schema_name})")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
