"""Numerical tolerances shared by every module.

All defaults live here so that a run can echo its complete configuration into
``report.json``.
"""

from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class Numerics:
    # polynomial
    sep_tol: float = 1e-8
    root_tol: float = 1e-10
    eps_root: float = 1e-7

    # curve discretization
    n_points: int = 400
    n_min: int = 32
    h_min_factor: float = 0.5
    h_max_factor: float = 2.0
    resample_tol: float = 1.0
    end_guard_factor: float = 10.0

    # flow
    c_safety: float = 0.4
    conv_tol: float = 1e-3
    tau_max: float = 50.0
    dt_min: float = 1e-12
    mp_tol: float = 1e-6
    split_radius_factor: float = 3.0
    max_steps: int = 5_000_000
    record_every: int = 10
    max_split_depth: int = 4

    # slag shooting
    delta0_factor: float = 1e-4
    capture_factor: float = 1e-3
    shoot_step_factor: float = 1e-3
    box_factor: float = 4.0
    bisect_tol: float = 1e-12

    # floer
    idx_tol: float = 1e-6
    winding_bound: int = 1
    volume_floor: float = 1e-9

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown numerics key(s): {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            typ = known[key].type
            try:
                kwargs[key] = int(value) if typ in (int, "int") else float(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"numerics.{key}: expected a number, got {value!r}") from exc
        return cls(**kwargs)

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT = Numerics()
