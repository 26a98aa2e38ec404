"""Learned-model artifact: RKHS value function, grid, config echo, audits."""

import json
from dataclasses import dataclass, field

import numpy as np

from .grids import StabilityGrid
from .kernels import RkhsFunction
from .policy import ClfPolicy


@dataclass
class LearnedModel:
    """Serializable result of a learning run.

    The value-function centers are exactly the demonstration states followed
    by the grid points; ``n_data_states`` records the split.
    """

    V: RkhsFunction
    beta: float
    grid: StabilityGrid
    n_data_states: int
    config_echo: dict = field(default_factory=dict)
    training_meta: dict = field(default_factory=dict)
    certification: object = None

    def __post_init__(self):
        expected = self.n_data_states + len(self.grid.points)
        if len(self.V.centers) != expected:
            raise ValueError(
                f"centers must be data states + grid points "
                f"({expected}), got {len(self.V.centers)}")
        if not np.array_equal(self.V.centers[self.n_data_states:], self.grid.points):
            raise ValueError("trailing centers must equal the grid points in order")

    def policy(self, system):
        return ClfPolicy(self.V, self.beta, system)

    @property
    def data_centers(self):
        return self.V.centers[:self.n_data_states]

    def to_dict(self):
        cert = None
        if self.certification is not None:
            cert = self.certification.to_dict() if hasattr(self.certification, "to_dict") \
                else self.certification
        return {
            "value_function": self.V.to_dict(),
            "beta": float(self.beta),
            "grid": self.grid.to_dict(),
            "n_data_states": int(self.n_data_states),
            "config": self.config_echo,
            "training_meta": self.training_meta,
            "certification": cert,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            V=RkhsFunction.from_dict(d["value_function"]),
            beta=d["beta"],
            grid=StabilityGrid.from_dict(d["grid"]),
            n_data_states=d["n_data_states"],
            config_echo=d.get("config", {}),
            training_meta=d.get("training_meta", {}),
            certification=d.get("certification"),
        )


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return LearnedModel.from_dict(json.load(fh))
