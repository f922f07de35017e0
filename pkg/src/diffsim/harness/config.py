"""Flat dotted key-value experiment configuration.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Keys are dotted (`grid.width`); every key must appear in the schema and
parse under its declared type, unknown keys are rejected.  Lists are
comma-separated.  The config hash recorded in output CSVs is computed
over the canonical sorted key=value form, so semantically identical
files hash identically.
"""

import hashlib


class ConfigError(Exception):
    pass


def _bool(s):
    if s in ("true", "True", "1"):
        return True
    if s in ("false", "False", "0"):
        return False
    raise ValueError(f"not a boolean: {s}")


def _int_list(s):
    return [int(x) for x in s.split(",") if x.strip()]


_VARIANTS = ("single_road", "grid_static", "grid_nn", "sir")
_MODES = ("diff", "reference")
_OBJECTIVES = ("sum", "min")
_ALGORITHMS = ("sgd", "adam", "nadam", "spsa", "sa", "de", "cne")


def _choice(options):
    def conv(s):
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return conv


# key -> (converter, default); required keys have default REQUIRED
REQUIRED = object()

SCHEMA = {
    "model.variant": (_choice(_VARIANTS), REQUIRED),
    "model.mode": (_choice(_MODES), "diff"),
    "model.objective": (_choice(_OBJECTIVES), "sum"),
    "run.seeds": (_int_list, [0]),
    "run.batch_size": (int, 10),
    "run.horizon": (float, 60.0),
    "single_road.vehicles": (int, 2),
    "single_road.offset": (float, 2.0),
    "grid.width": (int, 5),
    "grid.height": (int, 5),
    "grid.vehicles": (int, 100),
    "grid.period": (float, 20.0),
    "nn.hidden": (int, 2),
    "nn.init_scale": (float, 0.05),
    "sir.agents": (int, 1000),
    "sir.nodes": (int, 500),
    "sir.avg_degree": (float, 5.0),
    "sir.steps": (int, 10),
    "sir.p0": (float, 0.05),
    "sir.rate": (float, 0.005),
    "sir.graph_seed": (int, 42),
    "sir.coeff_seed": (int, 0),
    "sir.target_seed": (int, 7),
    "optimize.algorithm": (_choice(_ALGORITHMS), "adam"),
    "optimize.step_size": (float, 0.1),
    "optimize.budget_batches": (int, None),
    "optimize.budget_seconds": (float, None),
    "optimize.seed": (int, 0),
    "fidelity.samples": (int, 20),
    "fidelity.seeds_per_sample": (int, 3),
    "fidelity.seed": (int, 0),
    "bench.vehicle_counts": (_int_list, [64, 256, 1024]),
    "bench.repeats": (int, 3),
}


def parse_config_text(text, source="<config>"):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        conv = SCHEMA[key][0]
        try:
            raw[key] = conv(value)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {e}")
    cfg = {}
    for key, (_, default) in SCHEMA.items():
        if key in raw:
            cfg[key] = raw[key]
        elif default is REQUIRED:
            raise ConfigError(f"{source}: missing required key {key!r}")
        else:
            cfg[key] = default
    return cfg


def parse_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    return parse_config_text(text, source=str(path))


def config_hash(cfg):
    canon = "\n".join(f"{k}={cfg[k]!r}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
