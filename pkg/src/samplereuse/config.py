"""Experiment configuration files.

Configs are flat TOML with explicit keys.  ``seed``, ``N``, ``trials`` and the
``[chain]`` table have no defaults.  Example::

    seed = 7
    N = 100
    trials = 200
    level = 0.95
    epsilons = [0.05, 0.1]

    [chain]
    family = "ball"
    dim = 1
    volumes = [1, 2, 4]

    [predicate]
    kind = "inner_ball"
    radius = 1.0

A previously written output CSV can be passed wherever a config is expected;
its ``# config:`` header line is read instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .geometry import Ball, Box, BoxUnion, ChainError, Donut, NestedChain, build_chain, unit_ball_volume
from .predicates import Constant, Halfspace, HurwitzCubic, InnerBall, Predicate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_chain_from_spec",
    "build_predicate",
]

CONFIG_PREFIX = "# config: "

_TOP_KEYS = {"seed", "N", "trials", "level", "epsilons", "audit_samples", "out", "chain", "predicate"}
_CHAIN_KEYS = {
    "family", "dim", "verify", "center", "norm", "radii", "volumes", "geometric", "scales",
    "inner_radius", "half_widths", "boxes", "sets",
}
_PREDICATE_KEYS = {"kind", "value", "radius", "center", "normal", "offset", "nominal", "perturbation"}


class ConfigError(ValueError):
    """Invalid configuration.  ``field`` is the dotted key, ``line`` its line if known."""

    def __init__(self, message, field=None, line=None, path=None):
        self.field = field
        self.line = line
        self.path = path
        super().__init__(message)

    def __str__(self):
        where = str(self.path) if self.path else "config"
        if self.line:
            where += f":{self.line}"
        key = f" [{self.field}]" if self.field else ""
        return f"{where}{key}: {self.args[0]}"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    N: int
    trials: int
    chain: Dict[str, Any]
    predicate: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "value": True})
    level: float = 0.95
    epsilons: Tuple[float, ...] = ()
    audit_samples: Optional[int] = None
    out: Optional[str] = None

    def canonical(self) -> Dict[str, Any]:
        """Everything that determines the output contents (``out`` excluded)."""
        return {
            "seed": self.seed,
            "N": self.N,
            "trials": self.trials,
            "level": self.level,
            "epsilons": list(self.epsilons),
            "audit_samples": self.audit_samples,
            "chain": self.chain,
            "predicate": self.predicate,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        data = dict(self.__dict__)
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**data)


def _line_of(text, dotted):
    if not text:
        return None
    key = dotted.split(".")[-1]
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for n, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return n
    return None


class _Checker:
    def __init__(self, text, path):
        self.text = text
        self.path = path

    def fail(self, dotted, message):
        raise ConfigError(message, dotted, _line_of(self.text, dotted), self.path)

    def integer(self, table, key, dotted, minimum=None, required=True):
        if key not in table:
            if required:
                self.fail(dotted, f"missing required key '{key}'")
            return None
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(dotted, f"'{key}' must be an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(dotted, f"'{key}' must be >= {minimum}, got {v}")
        return v

    def number(self, table, key, dotted, positive=False, required=True):
        if key not in table:
            if required:
                self.fail(dotted, f"missing required key '{key}'")
            return None
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(dotted, f"'{key}' must be a finite number, got {v!r}")
        if positive and not v > 0:
            self.fail(dotted, f"'{key}' must be positive, got {v}")
        return float(v)

    def vector(self, table, key, dotted, length=None, positive=False, required=True):
        if key not in table:
            if required:
                self.fail(dotted, f"missing required key '{key}'")
            return None
        v = table[key]
        if not isinstance(v, list) or not v:
            self.fail(dotted, f"'{key}' must be a non-empty list of numbers")
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail(dotted, f"'{key}' must contain finite numbers, got {x!r}")
            if positive and not x > 0:
                self.fail(dotted, f"'{key}' entries must be positive, got {x}")
        if length is not None and len(v) != length:
            self.fail(dotted, f"'{key}' must have {length} entries, got {len(v)}")
        return [float(x) for x in v]

    def nondecreasing(self, values, dotted, key):
        if any(b < a for a, b in zip(values, values[1:])):
            self.fail(dotted, f"'{key}' must be non-decreasing")


def _sizes(chk, chain, dotted, allow_volumes):
    """Radii (or scales) of a scaled-shape chain."""
    given = [k for k in ("radii", "volumes", "geometric", "scales") if k in chain]
    if len(given) != 1:
        chk.fail(dotted, "give exactly one of 'radii', 'volumes', 'geometric', 'scales'")
    key = given[0]
    if key == "volumes" and not allow_volumes:
        chk.fail(f"{dotted}.volumes", "'volumes' is only supported for the ball family")
    if key == "geometric":
        g = chain["geometric"]
        if not isinstance(g, dict):
            chk.fail(f"{dotted}.geometric", "'geometric' must be a table {start, stop, count}")
        start = chk.number(g, "start", f"{dotted}.geometric.start", positive=True)
        stop = chk.number(g, "stop", f"{dotted}.geometric.stop", positive=True)
        count = chk.integer(g, "count", f"{dotted}.geometric.count", minimum=1)
        if count > 1 and not stop > start:
            chk.fail(f"{dotted}.geometric", "'stop' must exceed 'start'")
        values = [float(x) for x in np.geomspace(start, stop, count)] if count > 1 else [start]
        return "radii", values
    values = chk.vector(chain, key, f"{dotted}.{key}", positive=True)
    # equal neighbours are allowed: identical sets are trivially nested
    chk.nondecreasing(values, f"{dotted}.{key}", key)
    return key, values


def _norm(chk, table, dotted):
    p = table.get("norm", 2)
    if p in (1, 2):
        return p
    if p in ("inf", "infinity"):
        return math.inf
    chk.fail(f"{dotted}.norm", f"'norm' must be 1, 2 or \"inf\", got {p!r}")


def _explicit_set(chk, spec, dotted, dim):
    if not isinstance(spec, dict):
        chk.fail(dotted, "each entry of 'sets' must be a table")
    shape = spec.get("shape")
    center = chk.vector(spec, "center", f"{dotted}.center", length=dim, required=False)
    try:
        if shape == "ball":
            return Ball(chk.number(spec, "radius", f"{dotted}.radius", positive=True),
                        dim=dim, norm=_norm(chk, spec, dotted), center=center)
        if shape == "donut":
            return Donut(chk.number(spec, "inner_radius", f"{dotted}.inner_radius", positive=True),
                         chk.number(spec, "outer_radius", f"{dotted}.outer_radius", positive=True),
                         dim=dim, norm=_norm(chk, spec, dotted), center=center)
        if shape == "box":
            return Box(chk.vector(spec, "half_widths", f"{dotted}.half_widths", length=dim, positive=True),
                       center=center)
        if shape == "union":
            boxes = spec.get("boxes")
            if not isinstance(boxes, list) or not boxes:
                chk.fail(f"{dotted}.boxes", "'boxes' must be a non-empty list of tables")
            return BoxUnion(tuple(_explicit_set(chk, dict(b, shape="box"), f"{dotted}.boxes", dim)
                                  for b in boxes))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        chk.fail(dotted, str(exc))
    chk.fail(f"{dotted}.shape", f"unknown shape {shape!r}; use ball, donut, box or union")


def build_chain_from_spec(chain: Dict[str, Any], text=None, path=None) -> NestedChain:
    """Construct the chain described by a ``[chain]`` table."""
    chk = _Checker(text, path)
    dotted = "chain"
    if not isinstance(chain, dict):
        chk.fail(dotted, "'chain' must be a table")
    unknown = sorted(set(chain) - _CHAIN_KEYS)
    if unknown:
        chk.fail(f"chain.{unknown[0]}", f"unknown key '{unknown[0]}' in [chain]")
    family = chain.get("family")
    dim = chk.integer(chain, "dim", "chain.dim", minimum=1)
    verify = chain.get("verify", "analytic")
    if verify not in ("analytic", "audit"):
        chk.fail("chain.verify", f"'verify' must be \"analytic\" or \"audit\", got {verify!r}")
    center = chk.vector(chain, "center", "chain.center", length=dim, required=False)
    try:
        if family == "ball":
            p = _norm(chk, chain, dotted)
            key, values = _sizes(chk, chain, dotted, allow_volumes=True)
            if key == "volumes":
                unit = unit_ball_volume(dim, p)
                values = [(v / unit) ** (1.0 / dim) for v in values]
            elif key == "scales":
                chk.fail("chain.scales", "use 'radii' for the ball family")
            sets = [Ball(r, dim=dim, norm=p, center=center) for r in values]
            labels = values
        elif family == "donut":
            p = _norm(chk, chain, dotted)
            r0 = chk.number(chain, "inner_radius", "chain.inner_radius", positive=True)
            key, values = _sizes(chk, chain, dotted, allow_volumes=False)
            if key == "scales":
                chk.fail("chain.scales", "use 'radii' (outer radii) for the donut family")
            if values[0] <= r0:
                chk.fail("chain.radii", "outer radii must exceed 'inner_radius'")
            sets = [Donut(r0, r, dim=dim, norm=p, center=center) for r in values]
            labels = values
        elif family == "box":
            h = chk.vector(chain, "half_widths", "chain.half_widths", length=dim, positive=True)
            key, values = _sizes(chk, chain, dotted, allow_volumes=False)
            if key != "scales":
                chk.fail(f"chain.{key}", "the box family is sized by 'scales'")
            base = Box(h, center=center)
            sets = [base.scaled(s) for s in values]
            labels = values
        elif family == "union":
            boxes = chain.get("boxes")
            if not isinstance(boxes, list) or not boxes:
                chk.fail("chain.boxes", "'boxes' must be a non-empty list of {center, half_widths} tables")
            base = BoxUnion(tuple(_explicit_set(chk, dict(b, shape="box"), "chain.boxes", dim) for b in boxes))
            key, values = _sizes(chk, chain, dotted, allow_volumes=False)
            if key != "scales":
                chk.fail(f"chain.{key}", "the union family is sized by 'scales'")
            sets = [base.scaled(s) for s in values]
            labels = values
        elif family == "sets":
            specs = chain.get("sets")
            if not isinstance(specs, list) or not specs:
                chk.fail("chain.sets", "'sets' must be a non-empty list of tables")
            sets = [_explicit_set(chk, s, f"chain.sets[{i}]", dim) for i, s in enumerate(specs)]
            labels = [float(i + 1) for i in range(len(sets))]
        else:
            chk.fail("chain.family", f"unknown family {family!r}; use ball, donut, box, union or sets")
        return build_chain(sets, labels=labels, verify=verify)
    except ChainError as exc:
        chk.fail("chain", f"invalid chain: {exc}")
    except ConfigError:
        raise
    except ValueError as exc:
        chk.fail("chain", str(exc))


def build_predicate(spec: Dict[str, Any], dim: int, text=None, path=None) -> Predicate:
    """Construct the predicate described by a ``[predicate]`` table."""
    chk = _Checker(text, path)
    if not isinstance(spec, dict):
        chk.fail("predicate", "'predicate' must be a table")
    unknown = sorted(set(spec) - _PREDICATE_KEYS)
    if unknown:
        chk.fail(f"predicate.{unknown[0]}", f"unknown key '{unknown[0]}' in [predicate]")
    kind = spec.get("kind")
    if kind == "constant":
        v = spec.get("value", True)
        if not isinstance(v, bool):
            chk.fail("predicate.value", "'value' must be true or false")
        return Constant(v)
    if kind == "inner_ball":
        r = chk.number(spec, "radius", "predicate.radius", positive=True)
        c = chk.vector(spec, "center", "predicate.center", length=dim, required=False)
        return InnerBall(r, center=c)
    if kind == "halfspace":
        n = chk.vector(spec, "normal", "predicate.normal", length=dim)
        if not any(n):
            chk.fail("predicate.normal", "'normal' must be nonzero")
        off = chk.number(spec, "offset", "predicate.offset", required=False) or 0.0
        return Halfspace(n, off)
    if kind == "hurwitz_cubic":
        a = chk.vector(spec, "nominal", "predicate.nominal", length=3)
        P = spec.get("perturbation")
        if not isinstance(P, list) or len(P) != 3:
            chk.fail("predicate.perturbation", "'perturbation' must be 3 rows of length dim")
        rows = [chk.vector({"row": row}, "row", "predicate.perturbation", length=dim) for row in P]
        return HurwitzCubic(a, rows)
    chk.fail("predicate.kind", f"unknown predicate kind {kind!r}; use constant, inner_ball, halfspace or hurwitz_cubic")


def parse_config(data: Dict[str, Any], text=None, path=None) -> ExperimentConfig:
    """Validate a decoded config table.  Raises :class:`ConfigError`."""
    chk = _Checker(text, path)
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        chk.fail(unknown[0], f"unknown key '{unknown[0]}'")
    seed = chk.integer(data, "seed", "seed", minimum=0)
    if seed >= 2**64:
        chk.fail("seed", "'seed' must fit in 64 bits")
    N = chk.integer(data, "N", "N", minimum=1)
    trials = chk.integer(data, "trials", "trials", minimum=1)
    level = chk.number(data, "level", "level", required=False)
    if level is None:
        level = 0.95
    if not 0 < level < 1:
        chk.fail("level", f"'level' must lie in (0, 1), got {level}")
    eps = data.get("epsilons", [])
    if not isinstance(eps, list) or any(
        isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 <= e < 1 for e in eps
    ):
        chk.fail("epsilons", "'epsilons' must be a list of numbers in [0, 1)")
    audit = chk.integer(data, "audit_samples", "audit_samples", minimum=1, required=False)
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        chk.fail("out", "'out' must be a string path")
    if "chain" not in data:
        chk.fail("chain", "missing required table [chain]")
    chain = data["chain"]
    pred = data.get("predicate", {"kind": "constant", "value": True})
    # validate eagerly so errors carry the config's line numbers
    built = build_chain_from_spec(chain, text, path)
    build_predicate(pred, built.dim, text, path)
    return ExperimentConfig(
        seed=seed,
        N=N,
        trials=trials,
        chain=chain,
        predicate=pred,
        level=level,
        epsilons=tuple(float(e) for e in eps),
        audit_samples=audit,
        out=out,
    )


def load_config(path) -> ExperimentConfig:
    """Read a TOML config, or the ``# config:`` line of an output CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from exc
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith(CONFIG_PREFIX):
                try:
                    data = json.loads(line[len(CONFIG_PREFIX):])
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"bad embedded config: {exc}", path=path) from exc
                data = {k: v for k, v in data.items() if v is not None}
                return parse_config(data, None, path)
            if not line.startswith("#"):
                break
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None, path=path) from exc
    return parse_config(data, text, path)
