"""Numerical thresholds shared by the classifier, the bending contracts and certificates.

Every certificate records the values in force, so a run can be audited
without reading code.
"""

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class Thresholds:
    floor: float = 1e-2            # "bounded away from zero" for normalized residuals
    ceiling_c: float = 50.0        # "approximately zero" means <= ceiling_c * h^2
    guard: float = 1e-6            # denominators must exceed guard * field scale
    coverage: float = 0.75         # fraction of guarded nodes required for a verdict
    tau_margin: float = 0.05       # |tau - 1| margin
    rho_margin: float = 0.05       # |Im rho| margin
    unit_tol: float = 1e-10        # |rho| = 1 tolerance
    metric_pair_tol: float = 1e-10
    minimality: float = 1e-3       # relative mean-curvature floor (elliptic frames)
    congruence_c: float = 0.5      # separation >= congruence_c * |t| * |B|
    exact_tol: float = 1e-6        # relative tolerance for exact-by-construction identities
    immersion_margin: float = 1e-3  # regular node: smallest/largest singular value of d psi

    def ceiling(self, h):
        return self.ceiling_c * h * h

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown threshold keys: {sorted(unknown)}")
        for key, value in data.items():
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"threshold {key!r} must be a positive number")
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT = Thresholds()
