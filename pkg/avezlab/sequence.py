from enum import Enum
import logging
import math

import numpy as np

import avezlab.utils as utils

logger = logging.getLogger("avezlab.sequence")


class IndexKind(Enum):
    """What a sequence is indexed by"""
    Step = "step-n"
    Exponent = "exponent-p"
    Radius = "radius-R"

    def __str__(self):
        return self.value


class AsymptoticSequence:
    """Ordered (index, value) terms approaching a limit, with the extrapolations applied to them.

    For a sequence flagged subadditive the stored values are the raw a_n, so that
    fekete_inf() = min a_n / n is an upper bound for lim a_n / n.
    """

    def __init__(self, index_kind: IndexKind | str, terms=(), subadditive=False, name=""):
        if isinstance(index_kind, str):
            try:
                index_kind = IndexKind(index_kind)
            except ValueError:
                raise ValueError(f"Invalid index kind {index_kind!r}.")
        elif not isinstance(index_kind, IndexKind):
            raise TypeError("Invalid index kind type. Expected an instance of IndexKind or a string.")
        self.index_kind: IndexKind = index_kind
        self.name = name
        self.subadditive = subadditive
        self.terms: list[tuple[float, float]] = []
        self.extrapolation: dict[str, float] = {}
        for index, value in terms:
            self.append(index, value)

    def append(self, index, value) -> None:
        if self.terms and index <= self.terms[-1][0]:
            raise ValueError(f"Indices have to increase strictly, got {index} after {self.terms[-1][0]}.")
        self.terms.append((index, float(value)))

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self) -> str:
        return f"AsymptoticSequence({self.name!r}, {self.index_kind}, {len(self)} terms)"

    @property
    def indices(self) -> np.ndarray:
        return np.array([i for i, _ in self.terms], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.terms], dtype=float)

    @property
    def last(self) -> float:
        return self.terms[-1][1]

    def fekete_inf(self) -> float:
        if not self.subadditive:
            raise ValueError(f"Sequence {self.name!r} is not flagged subadditive.")
        quotient = min(v / i for i, v in self.terms if i > 0)
        self.extrapolation["fekete_inf"] = quotient
        return quotient

    def last_difference(self) -> float:
        if len(self) < 2:
            raise ValueError("A difference needs two terms.")
        (i0, v0), (i1, v1) = self.terms[-2], self.terms[-1]
        diff = (v1 - v0) / (i1 - i0)
        self.extrapolation["last_difference"] = diff
        return diff

    def fit_inverse_p(self, use_top_half=True) -> tuple[float, float, float]:
        """Fit value = c0 + c1/index; the top half of the terms by default."""
        indices, values = self.indices, self.values
        if use_top_half and len(self) >= 4:
            indices, values = utils.top_half(indices, values)
        c0, c1, residual = utils.fit_inverse_p(indices, values)
        self.extrapolation.update({"c0": c0, "c1": c1, "fit_residual": residual})
        return c0, c1, residual

    def fit_log_linear(self) -> float:
        """Slope h of value = a + h*n + b*log n over the top half."""
        indices, values = utils.top_half(self.indices, self.values)
        slope, intercept, log_coef = utils.fit_log_linear(indices, values)
        self.extrapolation.update({"log_fit_slope": slope, "log_fit_intercept": intercept,
                                   "log_fit_log_coef": log_coef})
        return slope

    def is_monotone(self, increasing=True, slack=1e-9) -> bool:
        values = self.values
        steps = np.diff(values) if increasing else -np.diff(values)
        return bool(np.all(steps >= -slack))

    def cauchy(self, window: int, tol: float) -> bool:
        """True when the last `window` values lie within tol of each other."""
        if len(self) < window:
            return False
        tail = self.values[-window:]
        return bool(np.max(tail) - np.min(tail) <= tol)

    def to_dict(self) -> dict:
        return {"name": self.name, "index_kind": str(self.index_kind), "subadditive": self.subadditive,
                "terms": [{"index": i, "value": v} for i, v in self.terms],
                "extrapolation": dict(self.extrapolation)}

    @staticmethod
    def from_dict(data: dict) -> "AsymptoticSequence":
        seq = AsymptoticSequence(data["index_kind"], [(t["index"], t["value"]) for t in data["terms"]],
                                 subadditive=data.get("subadditive", False), name=data.get("name", ""))
        seq.extrapolation = dict(data.get("extrapolation", {}))
        return seq


class EstimateReport:
    """One estimated quantity together with its bounds, method chain and underlying sequences."""

    SLACK = 1e-12

    def __init__(self, quantity: str, estimate: float, lower: float | None = None, upper: float | None = None,
                 method: list[str] | tuple = (), sequences: dict[str, AsymptoticSequence] | None = None,
                 params: dict | None = None, tolerances: dict | None = None, seed: int | None = None,
                 flags: list[str] | None = None, diagnostics: dict | None = None):
        self.quantity = quantity
        self.estimate = float(estimate)
        self.lower = None if lower is None else float(lower)
        self.upper = None if upper is None else float(upper)
        scale = self.SLACK * max(1.0, abs(self.estimate))
        if self.lower is not None and self.lower > self.estimate + scale:
            raise ValueError(f"{quantity}: lower bound {self.lower} above estimate {self.estimate}.")
        if self.upper is not None and self.estimate > self.upper + scale:
            raise ValueError(f"{quantity}: estimate {self.estimate} above upper bound {self.upper}.")
        self.method = list(method)
        self.sequences = dict(sequences or {})
        self.params = dict(params or {})
        self.tolerances = dict(tolerances or {})
        self.seed = seed
        self.flags = list(flags or [])
        self.diagnostics = dict(diagnostics or {})

    def __repr__(self) -> str:
        return f"EstimateReport({self.quantity}={self.estimate:.6g}, [{self.lower}, {self.upper}])"

    def __eq__(self, other) -> bool:
        return isinstance(other, EstimateReport) and self.to_dict() == other.to_dict()

    def flag(self, message: str) -> None:
        self.flags.append(message)
        logger.warning(f"{self.quantity}: {message}")

    @property
    def sequence(self) -> AsymptoticSequence | None:
        """The headline sequence, the first one stored."""
        return next(iter(self.sequences.values()), None)

    def to_dict(self) -> dict:
        primary = self.sequence
        return {
            "quantity": self.quantity,
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "sequence": [] if primary is None else [{"index": i, "value": v} for i, v in primary.terms],
            "sequences": {name: seq.to_dict() for name, seq in self.sequences.items()},
            "method": self.method,
            "params": self.params,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "flags": self.flags,
            "diagnostics": self.diagnostics,
        }

    @staticmethod
    def from_dict(data: dict) -> "EstimateReport":
        return EstimateReport(
            data["quantity"], data["estimate"], data.get("lower"), data.get("upper"),
            method=data.get("method", []),
            sequences={name: AsymptoticSequence.from_dict(seq) for name, seq in data.get("sequences", {}).items()},
            params=data.get("params"), tolerances=data.get("tolerances"), seed=data.get("seed"),
            flags=data.get("flags"), diagnostics=data.get("diagnostics"))


def clamp(value: float, lower: float | None, upper: float | None) -> float:
    if lower is not None and not math.isnan(lower):
        value = max(value, lower)
    if upper is not None and not math.isnan(upper):
        value = min(value, upper)
    return value
