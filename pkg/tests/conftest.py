"""Shared fixtures: reference seeds, cached pipeline chains and the acceptance log."""

import functools
import json
import time
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import pytest

from scforge import bending as bd
from scforge import cli
from scforge import classify as cl
from scforge import config
from scforge import hyper as hy
from scforge import seed as sd
from scforge import surfgeo as sg
from scforge.grid import Grid2
from scforge.thresholds import DEFAULT

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SEED_FILES = {"SEED-H1": "seed_h1.json", "SEED-E1": "seed_e1.json"}


@functools.lru_cache(maxsize=None)
def load_config(name):
    return config.load(CONFIGS / name)


def seed_spec(name):
    return load_config(SEED_FILES[name]).seed


@functools.lru_cache(maxsize=None)
def chain(name, n, upto="bending"):
    """Build the pipeline objects for a reference seed on an n x n grid (cached)."""
    s = seed_spec(name)
    g = Grid2.square(n, s.domain)
    seed = sd.build_seed(s.kind, s.n, g, s.M, s.phi)
    pair = sd.extract_pair(seed)
    c = sg.christoffel(pair, "jet")
    ns = SimpleNamespace(name=name, n=n, grid=g, seed=seed, pair=pair, c=c, th=DEFAULT,
                         ceiling=DEFAULT.ceiling(g.h))
    ns.report0 = cl.classify_coordinates(c)
    if upto == "pair":
        return ns
    ns.H = hy.build(pair, 0.2, DEFAULT.immersion_margin)
    ns.split = hy.splitting(ns.H, ns.ceiling)
    if upto == "hyper":
        return ns
    ns.sig = bd.sigma_field(c)
    ns.bd = bd.build_B(ns.H, ns.split, ns.sig)
    ns.bf = bd.integrate_bending(ns.H, ns.bd)
    return ns


@pytest.fixture(scope="session")
def h1_65():
    return chain("SEED-H1", 65)


@pytest.fixture(scope="session")
def e1_65():
    return chain("SEED-E1", 65)


@dataclass
class VerifyResult:
    """Artifacts of one ``scforge verify`` run."""

    config: str
    exit_code: int
    seconds: float
    out: Path
    report: dict
    certificate: dict

    def run(self, n):
        return next(r for r in self.report["runs"] if r["n"] == n)

    def stage(self, n, name):
        return next(s for s in self.run(n)["stages"] if s["name"] == name)

    def rows(self, n):
        return self.run(n)["certificate"]["rows"]

    def row(self, n, fraction):
        return next(r for r in self.rows(n) if r["fraction"] == fraction)


@pytest.fixture(scope="session")
def verify(tmp_path_factory):
    """Run ``scforge verify`` once per configuration and share the artifacts."""
    cache = {}

    def get(name):
        if name not in cache:
            out = tmp_path_factory.mktemp(Path(name).stem)
            t0 = time.perf_counter()
            code = cli.main(["verify", "--config", str(CONFIGS / name), "--out", str(out)])
            seconds = time.perf_counter() - t0
            cert = out / "certificate.json"
            cache[name] = VerifyResult(name, code, seconds, out, json.loads((out / "report.json").read_text()),
                                       json.loads(cert.read_text()) if cert.exists() else {})
        return cache[name]

    return get


# -- acceptance log ----------------------------------------------------------------------

_ACCEPTANCE_LINES = []


class AcceptanceLog:
    """Records one PASS/FAIL line per acceptance check and asserts it."""

    def check(self, label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    passed = sum(line.startswith("PASS") for line in _ACCEPTANCE_LINES)
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE_LINES)} acceptance checks passed")
