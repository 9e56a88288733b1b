"""Stage-by-stage orchestration of one configuration on one grid.

Stages run in a fixed order and each one records the residuals it measured.
A stage either passes, or stops the run with the name of the detector that
fired; later stages are then marked as skipped.  Negative controls declare
the stage at which they must stop (``expect.stage`` in the configuration).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import bending as bd_mod
from . import classify as cl
from . import family as fam
from . import hyper as hy
from . import seed as sd
from . import surfgeo as sg
from .config import STAGES
from .errors import ConfigError, GateFailure, ScforgeError
from .grid import Grid2

EXIT_OK, EXIT_ERROR, EXIT_NON_DISCRETE, EXIT_GATED = 0, 1, 2, 3


@dataclass
class StageRecord:
    name: str
    status: str = "skipped"          # "pass", "fail" or "skipped"
    values: dict = field(default_factory=dict)
    error: str = None
    seconds: float = 0.0

    def to_dict(self):
        # wall-clock time is kept out of the record so reports are reproducible
        return {"name": self.name, "status": self.status, "values": self.values, "error": self.error}


@dataclass
class GridRun:
    n: int
    h: float
    ceiling: float
    stages: list
    failed_stage: str = None
    verdict: str = None
    certificate: object = None
    objects: dict = field(default_factory=dict, repr=False)

    def stage(self, name):
        return next(s for s in self.stages if s.name == name)

    @property
    def completed(self):
        return [s.name for s in self.stages if s.status == "pass"]

    def to_dict(self):
        return {"n": self.n, "h": self.h, "ceiling": self.ceiling, "failed_stage": self.failed_stage,
                "verdict": self.verdict, "stages": [s.to_dict() for s in self.stages],
                "certificate": None if self.certificate is None else self.certificate.to_dict()}

    def exit_code(self, expect=None):
        """0 when every gate passed (or a control stopped where it was designed to)."""
        if expect:
            return EXIT_OK if self.failed_stage == expect else EXIT_GATED
        if self.failed_stage is None:
            return EXIT_OK
        if self.failed_stage == "hypothesis":
            return EXIT_NON_DISCRETE
        return EXIT_GATED


def make_grid(cfg, n):
    return Grid2.square(int(n), tuple(cfg.seed.domain))


def _gate(stage, value, bound, what):
    if not value <= bound:
        raise GateFailure(stage, f"{what} {value:.3e} exceeds {bound:.3e}", residual=value, bound=bound)


class _Runner:
    def __init__(self, cfg, n, workers, oracle):
        self.cfg = cfg
        self.th = cfg.thresholds
        self.grid = make_grid(cfg, n)
        self.ceiling = self.th.ceiling(self.grid.h)
        self.workers = workers
        self.oracle = oracle
        self.obj = {}

    # each stage returns a dict of measured values and may raise
    def seed(self):
        s = self.cfg.seed
        seed = sd.build_seed(s.kind, s.n, self.grid, s.M, s.phi, perturb_map=self.cfg.corrupt.get("phi"))
        self.obj["seed"] = seed
        return {"provenance": list(seed.provenance), "continuous_class_res": sd.continuous_class_test(seed)}

    def pde_residual(self):
        per = sd.pde_residual(self.obj["seed"])
        worst = max(r["normalized"] for r in per)
        _gate("pde_residual", worst, self.ceiling, "seed PDE residual")
        return {"max": worst, "per_function": [r["normalized"] for r in per]}

    def conjugate_residual(self):
        pair = sd.extract_pair(self.obj["seed"], perturb_support=self.cfg.corrupt.get("gamma"))
        self.obj["pair"] = pair
        c_grid = sg.christoffel(pair, "grid")
        r = sg.conjugate_residual(pair, "grid", c_grid)
        self.obj["c_grid"] = c_grid
        _gate("conjugate_residual", r["interior"], self.ceiling, "conjugate residual of g")
        unit = float(np.max(np.abs(np.linalg.norm(pair.g, axis=-1) - 1)))
        det_min = float(np.min(pair.E * pair.G - pair.F ** 2))
        return {"max": r["max"], "interior": r["interior"], "unit_dev": unit, "metric_det_min": det_min}

    def gamma_residual(self):
        r = sg.gamma_residual(self.obj["pair"], "grid", self.obj["c_grid"])
        _gate("gamma_residual", r["interior"], self.ceiling, "support-function residual")
        return {"max": r["max"], "interior": r["interior"]}

    def hypothesis(self):
        c = sg.christoffel(self.obj["pair"], "jet")
        self.obj["christoffel"] = c
        rep = cl.classify_coordinates(c, self.th)
        self.obj["report0"] = rep
        gate = fam.hypothesis_gate(rep, self.th)
        values = {k: v for k, v in rep.to_dict().items() if k not in ("thresholds",)}
        values["gate"] = gate
        if not gate["passed"]:
            raise GateFailure("hypothesis", f"first-species residual {rep.first_species_res:.3e} below floor "
                              f"{self.th.floor:.1e}: the input is in the continuous class",
                              residual=rep.first_species_res, verdict=rep.verdict)
        return values

    def hyper(self):
        pair = self.obj["pair"]
        H = hy.build(pair, self.cfg.w_max, self.th.immersion_margin)
        frac = hy.require_regular(H)
        split = hy.splitting(H, self.ceiling)
        env = hy.envelope_check(H, self.obj["seed"], "grid")
        self.obj.update(H=H, split=split)
        _gate("hyper", env["max"], self.ceiling, "envelope residual")
        return {"regular_fraction": frac, "envelope": env, "type": split.type_tag, "span_res": split.span_res,
                "canonical_J_dev": split.canonical_dev, "splitting_grid_route_dev": split.fd_route_dev,
                "gauss_map_res": hy.gauss_map_residual(H, "grid"), "shape": hy.shape_summary(H)}

    def bending(self):
        H, split = self.obj["H"], self.obj["split"]
        c = self.obj["christoffel"]
        sig = bd_mod.sigma_field(c, self.th, perturb=self.cfg.corrupt.get("bending"))
        bd = bd_mod.build_B(H, split, sig, self.th)
        exact = all(p == "analytic" for p in self.obj["seed"].provenance)
        bf = bd_mod.integrate_bending(H, bd, self.th, path_tol=None if exact else self.ceiling)
        self.obj.update(sigma=sig, B=bd, bending=bf)
        values = bd_mod.bending_summary(bf, bd)
        if self.oracle:
            values["oracle"] = bd_mod.nullspace_oracle(H, bd)
        return values

    def certificate(self):
        cert = fam.certify(self.obj["H"], self.obj["bending"], self.cfg.fractions, self.obj["report0"], self.th,
                           workers=self.workers)
        self.obj["certificate"] = cert
        fail = cert.first_failure()
        if fail is not None:
            raise GateFailure("certificate", f"clause {fail[0]} failed at t = {fail[1]}",
                              clause=fail[0], t=fail[1])
        return {"verdict": cert.verdict, "t_max": cert.t_max}


def run_grid(cfg, n, upto=None, workers=None, oracle=False):
    """Run the stages for one grid size; stop at the first failing stage or after ``upto``."""
    if upto is not None and upto not in STAGES:
        raise ConfigError(f"unknown stage {upto!r}")
    runner = _Runner(cfg, n, workers, oracle)
    run = GridRun(int(n), runner.grid.h, runner.ceiling, [StageRecord(s) for s in STAGES])
    for rec in run.stages:
        t0 = time.perf_counter()
        try:
            rec.values = getattr(runner, rec.name)()
            rec.status = "pass"
        except ScforgeError as err:
            rec.status = "fail"
            rec.error = err.describe()
            rec.values["error_type"] = type(err).__name__
            if isinstance(err, GateFailure):
                rec.values.update(err.context)
            run.failed_stage = rec.name
        rec.seconds = time.perf_counter() - t0
        if rec.status == "fail" or rec.name == upto:
            break
    run.objects = runner.obj
    run.certificate = runner.obj.get("certificate")
    rep = runner.obj.get("report0")
    if run.failed_stage == "hypothesis":
        run.verdict = cl.FIRST
    elif run.certificate is not None:
        run.verdict = run.certificate.verdict
    elif rep is not None:
        run.verdict = rep.verdict
    return run


# -- convergence table ---------------------------------------------------------------

CONVERGENCE_KEYS = (
    ("pde_residual", "max"),
    ("conjugate_residual", "interior"),
    ("gamma_residual", "interior"),
    ("hypothesis", "special_pair_res"),
    ("hyper", "envelope.max"),
    ("hyper", "splitting_grid_route_dev"),
    ("bending", "B_codazzi"),
    ("bending", "round_trip"),
    ("bending", "consistency"),
    ("bending", "bending_condition_grid"),
)


def _lookup(values, dotted):
    cur = values
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur if isinstance(cur, (int, float)) else None


def convergence_table(runs):
    """Rows (stage, quantity, n, value, ratio to the previous grid)."""
    rows = []
    for stage, key in CONVERGENCE_KEYS:
        prev = None
        for run in runs:
            rec = run.stage(stage)
            val = _lookup(rec.values, key) if rec.status == "pass" else None
            ratio = prev / val if (prev is not None and val) else None
            rows.append({"stage": stage, "quantity": key, "n": run.n, "h": run.h, "value": val, "ratio": ratio})
            prev = val
    return rows


def sweep_table(run):
    """Per-t residuals of a certificate as flat rows (for CSV and plots)."""
    if run.certificate is None:
        return []
    out = []
    for row in run.certificate.rows:
        flat = {"n": run.n, "t": row.t, "fraction": row.fraction, "verdict": row.verdict}
        flat.update({k: v for k, v in row.values.items() if isinstance(v, (int, float, str))})
        out.append(flat)
    return out
