"""Numeric thresholds that turn asymptotic statements into finite-horizon tests."""

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class Thresholds:
    tail_fraction: float = 0.25  # share of the horizon standing in for t -> infinity
    slope_tol: float = 1e-4
    limit_tol: float = 1e-6
    class_tol: float = 1e-9
    osc_tol: float = 1e-3
    inv_tol: float = 1e-9
    ext_tol: float = 1e-6
    growth_tol: float = 2.0
    blowup: float = 1e6
    quad_tol: float = 1e-10
    residual_I: float = 1e-6
    residual_N: float = 1e-5
    residual_psi: float = 1e-5

    def __post_init__(self):
        if not 0 < self.tail_fraction <= 1:
            raise ValueError(f"tail_fraction must lie in (0, 1], got {self.tail_fraction}")
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"threshold {f.name} must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown thresholds: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in obj.items()})
