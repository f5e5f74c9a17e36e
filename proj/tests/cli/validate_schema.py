"""Validates every scenario against the shipped schema, and a few known-bad configs against it."""
import json
import pathlib
import sys

import jsonschema

schema_path, scenario_dir = map(pathlib.Path, sys.argv[1:3])
schema = json.loads(schema_path.read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)

failures = 0
for path in sorted(scenario_dir.glob("*.json")):
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {e.json_path}: {e.message}")
    failures += bool(errors)

bad = [
    {},
    {"kind": "bound"},
    {"kind": "waveform", "omega_max": 1, "nodes": 11, "spectra": {"s_q": {"type": "constant", "value": 1}}},
    {"kind": "imaging", "psf": {"catalog": "airy"}, "sources": [0]},
]
for config in bad:
    if validator.is_valid(config):
        print(f"accepted invalid config {config}")
        failures += 1

sys.exit(1 if failures else 0)
