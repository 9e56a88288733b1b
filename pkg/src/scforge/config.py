"""Run configuration: one JSON file (comments allowed) per seed.

Layout::

    {
      "name": "SEED-H1",
      "seed": {"kind": "hyperbolic", "n": 3, "domain": [0, 1, 0, 1],
               "M": "-1", "phi": ["exp(3*u + v/3)", ...]},
      "grids": [65, 129, 257],
      "w_max": 0.2,
      "sweep": {"fractions": [0.02, 0.05, 0.1]},
      "thresholds": {"ceiling_c": 50},
      "corrupt": {"phi": "0.01*u^3"},      // negative controls only
      "expect": {"stage": "pde_residual"}, // stage a control must fail at
      "out": "out/h1", "dump": false, "workers": null
    }

Each entry of ``phi`` is an expression string or an object with one of
``expr``, ``goursat`` ({"a": ..., "b": ...}) or ``dirichlet``.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import expr as ex
from .errors import ConfigError, ExprError
from .seed import KINDS
from .thresholds import Thresholds

STAGES = ("seed", "pde_residual", "conjugate_residual", "gamma_residual", "hypothesis", "hyper", "bending",
          "certificate")
CORRUPTIONS = ("phi", "gamma", "bending")


def strip_comments(text):
    """Remove // line comments and /* block */ comments outside JSON strings."""
    out = []
    i, n = 0, len(text)
    in_str = False
    while i < n:
        c = text[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < n:
                out.append(text[i + 1])
                i += 2
                continue
            if c == '"':
                in_str = False
            i += 1
        elif c == '"':
            in_str = True
            out.append(c)
            i += 1
        elif text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise ConfigError("unterminated block comment", position=i)
            # keep line numbers stable for json error messages
            out.append("\n" * text.count("\n", i, j))
            i = j + 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


@dataclass
class SeedSpec:
    kind: str
    n: int
    M: str
    phi: list
    domain: tuple = (0.0, 1.0, 0.0, 1.0)


@dataclass
class RunConfig:
    name: str
    seed: SeedSpec
    grids: list = field(default_factory=lambda: [65, 129, 257])
    w_max: float = 0.2
    fractions: list = field(default_factory=lambda: [0.02, 0.05, 0.1])
    thresholds: Thresholds = field(default_factory=Thresholds)
    corrupt: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    out: str = "out"
    dump: bool = False
    workers: int = None
    source: str = ""

    def to_dict(self):
        d = asdict(self)
        d["thresholds"] = self.thresholds.as_dict()
        d["seed"]["domain"] = list(self.seed.domain)
        return d


def _check_expr(text, where):
    try:
        ex.parse(str(text))
    except ExprError as err:
        ctx = dict(err.context)
        raise ConfigError(f"{where}: {err}", where=where, **ctx) from err


def _phi_entry(entry, i, kind):
    where = f"seed.phi[{i}]"
    if isinstance(entry, (str, int, float)):
        _check_expr(entry, where)
        return str(entry)
    if not isinstance(entry, dict) or len(entry) != 1:
        raise ConfigError(f"{where}: expected an expression or one of expr/goursat/dirichlet")
    key, val = next(iter(entry.items()))
    if key == "expr" or key == "dirichlet":
        _check_expr(val, f"{where}.{key}")
    elif key == "goursat":
        if not isinstance(val, dict) or set(val) != {"a", "b"}:
            raise ConfigError(f"{where}.goursat needs exactly the keys 'a' and 'b'")
        _check_expr(val["a"], f"{where}.goursat.a")
        _check_expr(val["b"], f"{where}.goursat.b")
    else:
        raise ConfigError(f"{where}: unknown key {key!r}")
    if key == "goursat" and kind != "hyperbolic":
        raise ConfigError(f"{where}: characteristic data needs a hyperbolic seed")
    if key == "dirichlet" and kind != "elliptic":
        raise ConfigError(f"{where}: Dirichlet data needs an elliptic seed")
    return dict(entry)


def _seed(block):
    if not isinstance(block, dict):
        raise ConfigError("missing 'seed' block")
    kind = block.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"seed.kind must be one of {KINDS}, got {kind!r}")
    n = block.get("n", 3)
    if not isinstance(n, int) or n < 3:
        raise ConfigError(f"seed.n must be an integer >= 3, got {n!r}")
    M = block.get("M")
    if M is None:
        raise ConfigError("seed.M is required")
    _check_expr(M, "seed.M")
    phi = block.get("phi")
    if not isinstance(phi, list) or len(phi) != n + 2:
        raise ConfigError(f"seed.phi must list {n + 2} functions for n = {n}")
    phi = [_phi_entry(e, i, kind) for i, e in enumerate(phi)]
    dom = block.get("domain", [0.0, 1.0, 0.0, 1.0])
    if len(dom) != 4 or not (dom[0] < dom[1] and dom[2] < dom[3]):
        raise ConfigError(f"seed.domain must be [u0, u1, v0, v1] with u0 < u1 and v0 < v1, got {dom!r}")
    return SeedSpec(kind, n, str(M), phi, tuple(float(x) for x in dom))


def from_dict(data, source=""):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {"name", "seed", "grids", "w_max", "sweep", "thresholds", "corrupt", "expect",
             "out", "dump", "workers"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    seed = _seed(data.get("seed"))
    grids = data.get("grids", data["seed"].get("grids", [65, 129, 257]))
    if (not isinstance(grids, list) or not grids or not all(isinstance(g, int) and g >= 9 for g in grids)
            or any(a >= b for a, b in zip(grids, grids[1:]))):
        raise ConfigError(f"grids must be a strictly increasing list of integers >= 9, got {grids!r}")
    w_max = data.get("w_max", 0.2)
    if not isinstance(w_max, (int, float)) or w_max <= 0:
        raise ConfigError("w_max must be positive")
    fractions = data.get("sweep", {}).get("fractions", [0.02, 0.05, 0.1])
    if not all(isinstance(f, (int, float)) and 0 < abs(f) <= 1 for f in fractions):
        raise ConfigError("sweep fractions must lie in 0 < |fraction| <= 1 (the scale guard)")
    th = Thresholds.from_dict(data.get("thresholds"))
    corrupt = dict(data.get("corrupt", {}))
    for key, val in corrupt.items():
        if key not in CORRUPTIONS:
            raise ConfigError(f"corrupt.{key}: unknown target, expected one of {CORRUPTIONS}")
        _check_expr(val, f"corrupt.{key}")
    expect = dict(data.get("expect", {}))
    if "stage" in expect and expect["stage"] not in STAGES:
        raise ConfigError(f"expect.stage must be one of {STAGES}")
    workers = data.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("workers must be a positive integer")
    return RunConfig(name=str(data.get("name", Path(source).stem or "run")), seed=seed, grids=list(grids),
                     w_max=float(w_max), fractions=[float(f) for f in fractions], thresholds=th,
                     corrupt=corrupt, expect=expect, out=str(data.get("out", "out")),
                     dump=bool(data.get("dump", False)), workers=workers, source=str(source))


def loads(text, source=""):
    try:
        data = json.loads(strip_comments(text))
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}", line=err.lineno, column=err.colno) from err
    return from_dict(data, source)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read configuration {path}: {err.strerror}") from err
    return loads(text, str(path))
