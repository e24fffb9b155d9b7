"""Readers for the harness output files.

These parse the file formats directly (curve.csv, metrics.json, diagnose
report JSON); the sampler package is not imported. Every parse failure
raises SchemaMismatch naming the offending file.
"""

import json

import numpy as np

METRIC_KEYS = ("esjd", "msjd", "min_ess", "min_ess_per_sec", "acceptance_rate")


class SchemaMismatch(ValueError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)


def read_curve(path):
    """An MMD curve: comment header with a config echo, step/value rows."""
    config = {}
    header, steps, values = None, [], []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("# config: "):
                    config = json.loads(line[len("# config: "):])
                elif line.startswith("#"):
                    continue
                elif header is None:
                    header = line.split(",")
                else:
                    step, value = line.split(",")
                    steps.append(int(step))
                    values.append(float(value))
    except OSError as e:
        raise SchemaMismatch(path, f"cannot read: {e}") from e
    except ValueError as e:
        raise SchemaMismatch(path, f"malformed row: {e}") from e
    if header != ["step", "mmd_u2_abs"]:
        raise SchemaMismatch(path, f"expected header step,mmd_u2_abs, got {header}")
    if not steps:
        raise SchemaMismatch(path, "curve has no rows")
    return {"config": config, "steps": np.array(steps), "values": np.array(values)}


def read_metrics(path):
    """A metrics.json: scalar summary fields plus the branch histogram."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise SchemaMismatch(path, f"cannot read: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(path, f"not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SchemaMismatch(path, "metrics file must hold a JSON object")
    missing = [k for k in METRIC_KEYS if k not in raw]
    if missing:
        raise SchemaMismatch(path, f"missing metric fields: {', '.join(missing)}")
    return {k: float(raw[k]) for k in METRIC_KEYS}


def read_ks_statistics(path):
    """The ks.statistics list of a diagnose report."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise SchemaMismatch(path, f"cannot read: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(path, f"not valid JSON: {e}") from e
    stats = raw.get("ks", {}).get("statistics") if isinstance(raw, dict) else None
    if not isinstance(stats, list) or not stats:
        raise SchemaMismatch(path, "no ks.statistics list in report")
    return np.array([float(s) for s in stats])
