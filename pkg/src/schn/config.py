"""Flat ``key = value`` experiment configs.

One experiment per file.  Values are strings, integers, reals, or
comma-separated numeric lists; ``#`` starts a comment.  Parsing and
serialisation round-trip exactly, and the canonical serialisation feeds the
config digest recorded in every summary JSON.
"""

import hashlib


class ConfigError(ValueError):
    pass


def _parse_scalar(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text):
    if "," in text:
        parts = [p.strip() for p in text.split(",")]
        vals = [_parse_scalar(p) for p in parts]
        if all(isinstance(v, int) for v in vals):
            return vals
        if all(isinstance(v, (int, float)) for v in vals):
            return [float(v) for v in vals]
        raise ConfigError(f"list values must be numeric: {text!r}")
    return _parse_scalar(text)


def parse_config(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key.isidentifier():
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        out[key] = _parse_value(value)
    return out


def _format_value(v):
    if isinstance(v, list):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, bool):
        raise ConfigError("booleans are not part of the config format")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg):
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in cfg.items())


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())


def config_digest(cfg) -> str:
    canonical = "".join(f"{k} = {_format_value(cfg[k])}\n" for k in sorted(cfg))
    return hashlib.sha256(canonical.encode()).hexdigest()


def require(cfg, key, kind=None, default=None):
    if key not in cfg:
        if default is not None:
            return default
        raise ConfigError(f"missing config key {key!r}")
    v = cfg[key]
    if kind is int and isinstance(v, int):
        return v
    if kind is float and isinstance(v, (int, float)):
        return float(v)
    if kind is str and isinstance(v, str):
        return v
    if kind is list:
        return list(v) if isinstance(v, list) else [v]
    if kind is None:
        return v
    raise ConfigError(f"config key {key!r} has wrong type: {v!r}")
