"""Shared result and plan types for the certification protocols."""

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from ..errors import InvalidInputError

DECISIONS = ("accept", "reject")
DISTANCES = ("infidelity", "trace_distance")


@dataclass(frozen=True)
class Verdict:
    decision: str
    epsilon: float
    delta: float
    n_used: int
    protocol: str
    distance: str = "infidelity"
    n_planned: int = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise InvalidInputError(f"decision must be one of {DECISIONS}, got {self.decision!r}")
        if self.distance not in DISTANCES:
            raise InvalidInputError(f"distance must be one of {DISTANCES}, got {self.distance!r}")
        n_planned = self.n_used if self.n_planned is None else int(self.n_planned)
        if self.decision == "accept" and self.n_used < n_planned:
            raise InvalidInputError("accept needs the full planned sample count")
        object.__setattr__(self, "n_planned", n_planned)

    @property
    def accepted(self):
        return self.decision == "accept"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RbFit:
    A: float
    B: float
    p: float
    stderr: dict = field(default_factory=dict)
    residuals: tuple = ()

    def model(self, lengths):
        return self.A * np.power(self.p, np.asarray(lengths, dtype=float)) + self.B


@dataclass(frozen=True)
class RbCurve:
    """Mean survival per sequence length with its standard error and the fitted decay."""

    lengths: tuple
    survival: tuple
    stderr: tuple
    n_sequences: int
    shots: int
    fit: RbFit = None

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.lengths)
        if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] < 0:
            raise InvalidInputError("sequence lengths must be non-negative and strictly increasing")
        if len(self.survival) != len(lengths) or len(self.stderr) != len(lengths):
            raise InvalidInputError("one survival estimate per length is required")
        if any(not 0.0 <= s <= 1.0 for s in self.survival):
            raise InvalidInputError("survival probabilities must lie in [0, 1]")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "survival", tuple(float(s) for s in self.survival))
        object.__setattr__(self, "stderr", tuple(float(s) for s in self.stderr))

    def to_frame(self):
        df = pd.DataFrame(
            {
                "m": list(self.lengths),
                "survival": list(self.survival),
                "stderr": list(self.stderr),
                "n_sequences": self.n_sequences,
                "shots": self.shots,
            }
        )
        df["fit"] = self.fit.model(self.lengths) if self.fit is not None else np.nan
        return df

    def to_dict(self):
        out = {
            "lengths": list(self.lengths),
            "survival": list(self.survival),
            "stderr": list(self.stderr),
            "n_sequences": self.n_sequences,
            "shots": self.shots,
        }
        if self.fit is not None:
            out["fit"] = {"A": self.fit.A, "B": self.fit.B, "p": self.fit.p, "stderr": dict(self.fit.stderr)}
        return out


@dataclass(frozen=True)
class Plan:
    """Settings and shot counts a protocol needs, plus what its analysis step reads back.

    `order` lists the setting id behind each sample position when the analysis
    depends on the per-shot order; such plans run with per-shot outcomes kept.
    """

    protocol: str
    settings: tuple
    shots: tuple
    setting_ids: tuple
    order: tuple = None
    info: dict = field(default_factory=dict, compare=False)

    @property
    def n_planned(self):
        return int(sum(self.shots))

    @property
    def keep_outcomes(self):
        return self.order is not None

    def execute(self, device):
        return device.execute(self.settings, self.shots, self.setting_ids, keep_outcomes=self.keep_outcomes)


def grouped_plan(protocol, draws, info=None):
    """Builds a Plan from per-sample (setting_id, Setting) draws, merging repeats.

    Each distinct setting runs once with as many shots as it was drawn; the draw
    order is kept so `sequence_outcomes` can restore it.
    """
    ids, settings, counts = [], [], {}
    for sid, setting in draws:
        if sid not in counts:
            ids.append(sid)
            settings.append(setting)
            counts[sid] = 0
        counts[sid] += 1
    order = tuple(sid for sid, _ in draws)
    return Plan(protocol, tuple(settings), tuple(counts[s] for s in ids), tuple(ids), order, info or {})


def sequence_outcomes(plan, record):
    """Per-sample outcome labels in draw order."""
    batches = record.by_id()
    cursors = {}
    out = []
    for sid in plan.order:
        batch = batches.get(sid)
        if batch is None or batch.outcomes is None:
            raise InvalidInputError(f"record lacks per-shot outcomes for setting {sid!r}")
        i = cursors.get(sid, 0)
        if i >= len(batch.outcomes):
            raise InvalidInputError(f"record has too few shots for setting {sid!r}")
        out.append(batch.outcomes[i])
        cursors[sid] = i + 1
    return out
