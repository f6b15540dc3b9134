"""Plain-text grid configuration.

One ``key = value`` per line, lists comma separated, ``#`` starts a comment.
Numeric lists also accept the range form ``start(step)stop``, e.g.
``tau2 = 0(0.1)1``. Keys left out keep their default values.
"""

import re
from dataclasses import fields
from decimal import Decimal, InvalidOperation

from .datagen import Mechanism
from .engine import GridConfig
from .estimators import TAU2_METHODS, Correction
from .sizes import SIZE_FLOOR, SizeKind


class ConfigError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


_RANGE = re.compile(r"^\s*([^()\s]+)\s*\(\s*([^()\s]+)\s*\)\s*([^()\s]+)\s*$")


def _decimal(text):
    try:
        return Decimal(text)
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None


def _expand_range(text):
    m = _RANGE.match(text)
    start, step, stop = (_decimal(g) for g in m.groups())
    if step <= 0:
        raise ValueError(f"range step must be positive in {text!r}")
    values = []
    x = start
    while x <= stop:
        values.append(float(x))
        x += step
    return values


def _floats(text):
    out = []
    for item in _items(text):
        if _RANGE.match(item):
            out.extend(_expand_range(item))
        else:
            out.append(float(_decimal(item)))
    return tuple(out)


def _ints(text):
    out = []
    for item in _floats(text):
        if item != int(item):
            raise ValueError(f"expected an integer, got {item!r}")
        out.append(int(item))
    return tuple(out)


def _items(text):
    items = [t.strip() for t in text.split(",")]
    if not items or any(t == "" for t in items):
        raise ValueError("empty list or empty list item")
    return items


def _check_all(values, pred, what):
    for v in values:
        if not pred(v):
            raise ValueError(f"{what}, got {v!r}")
    return values


def _scalar(parse):
    def inner(text):
        values = parse(text)
        if len(values) != 1:
            raise ValueError("expected a single value")
        return values[0]

    return inner


# key -> (GridConfig field, parser)
_KEYS = {
    "K": ("K_values", lambda t: _check_all(_ints(t), lambda v: v >= 2, "K must be >= 2")),
    "n": ("n_values", lambda t: _check_all(_ints(t), lambda v: v >= SIZE_FLOOR, f"n must be >= {SIZE_FLOOR}")),
    "theta": ("theta_values", _floats),
    "tau2": ("tau2_values", lambda t: _check_all(_floats(t), lambda v: v >= 0, "tau2 must be >= 0")),
    "pC": ("pC_values", lambda t: _check_all(_floats(t), lambda v: 0 < v < 1, "pC must lie in (0, 1)")),
    "sigma2": ("sigma2_values", lambda t: _check_all(_floats(t), lambda v: v >= 0, "sigma2 must be >= 0")),
    "mechanisms": ("mechanisms", lambda t: tuple(Mechanism.parse(x) for x in _items(t))),
    "sizes": ("size_kinds", lambda t: tuple(SizeKind.parse(x) for x in _items(t))),
    "M": ("M", _scalar(lambda t: _check_all(_ints(t), lambda v: v >= 1, "M must be >= 1"))),
    "seed": ("master_seed", _scalar(lambda t: _check_all(_ints(t), lambda v: v >= 0, "seed must be >= 0"))),
    "tau2_plugin": ("tau2_plugin", _scalar(lambda t: _check_all(
        tuple(x.upper() for x in _items(t)), lambda v: v in TAU2_METHODS, f"tau2_plugin must be one of {TAU2_METHODS}"))),
    "correction": ("correction", _scalar(lambda t: tuple(Correction.parse(x) for x in _items(t)))),
    "level": ("level", _scalar(lambda t: _check_all(_floats(t), lambda v: 0 < v < 1, "level must lie in (0, 1)"))),
}

_ALIASES = {
    "p_c": "pC", "pc": "pC", "mechanism": "mechanisms", "size": "sizes", "size_kind": "sizes",
    "size_kinds": "sizes", "reps": "M", "master_seed": "seed", "k": "K",
}


def _canonical_key(key):
    if key in _KEYS:
        return key
    return _ALIASES.get(key.lower(), key)


def parse_config_text(text, base=None):
    """Parse config text into a :class:`GridConfig`, starting from ``base`` or defaults."""
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        ckey = _canonical_key(key)
        if ckey not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if ckey in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[ckey]})", lineno)
        seen[ckey] = lineno
        field_name, parse = _KEYS[ckey]
        try:
            values[field_name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
    if base is not None:
        merged = {f.name: getattr(base, f.name) for f in fields(GridConfig)}
        merged.update(values)
        values = merged
    try:
        return GridConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def _fmt(v):
    if hasattr(v, "value"):
        return str(v.value)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(config):
    """Config text that :func:`parse_config_text` maps back to ``config``."""
    lines = []
    for key, (field_name, _) in _KEYS.items():
        value = getattr(config, field_name)
        if isinstance(value, tuple):
            lines.append(f"{key} = " + ", ".join(_fmt(v) for v in value))
        else:
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"
