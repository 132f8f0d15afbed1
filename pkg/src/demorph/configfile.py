"""Plain-text key/value config files.

One `key = value` pair per line; blank lines and `#` comments ignored.
Values are coerced by the target dataclass field's type, so the same
parser serves the train and dataset configs.
"""

from dataclasses import fields

from .errors import ConfigurationError

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def read_key_values(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def coerce_value(text, typ):
    if typ is bool:
        low = text.lower()
        if low not in _BOOL:
            raise ConfigurationError(f"not a boolean: {text!r}")
        return _BOOL[low]
    if typ is int:
        return int(text)
    if typ is float:
        return float(text)
    return text


def config_from_file(cls, path, overrides=None):
    """Build a dataclass config from a key/value file plus overrides."""
    raw = read_key_values(path) if path else {}
    types = {f.name: f.type for f in fields(cls)}
    typed = {}
    for key, text in raw.items():
        if key not in types:
            raise ConfigurationError(f"unknown config key {key!r} for {cls.__name__}")
        t = types[key]
        if isinstance(t, str):
            t = {"int": int, "float": float, "bool": bool, "str": str}.get(t, str)
        try:
            typed[key] = coerce_value(text, t)
        except ValueError as e:
            raise ConfigurationError(f"bad value for {key!r}: {text!r} ({e})") from e
    if overrides:
        typed.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**typed)
