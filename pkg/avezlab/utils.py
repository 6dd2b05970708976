import math

import numpy as np

text_format = {"ok": "\033[92m", "warn": "\033[93m", "fail": "\033[91m", "value": "\033[96m",
               "end": "\033[0m", "bold": "\033[1m", "uline": "\033[4m"}


def compensated_sum(values) -> float:
    """Correctly rounded sum of an iterable or array of floats."""
    if isinstance(values, np.ndarray):
        values = values.ravel().tolist()
    return math.fsum(values)


def log_sum_exp(log_values: np.ndarray) -> float:
    """log(sum(exp(x))) without overflow, -inf for an empty input."""
    log_values = np.asarray(log_values, dtype=float)
    if log_values.size == 0:
        return -math.inf
    top = float(np.max(log_values))
    if math.isinf(top):
        return top
    return top + math.log(compensated_sum(np.exp(log_values - top)))


def conjugate(p: float) -> float:
    """Hölder conjugate exponent, 1/p + 1/q = 1."""
    if p <= 1:
        raise ValueError(f"Exponent {p} has no finite conjugate.")
    return p / (p - 1)


def top_half(indices, values) -> tuple[np.ndarray, np.ndarray]:
    indices = np.asarray(indices, dtype=float)
    values = np.asarray(values, dtype=float)
    start = len(indices) // 2
    return indices[start:], values[start:]


def fit_inverse_p(ps, values) -> tuple[float, float, float]:
    """Least-squares fit v(p) = c0 + c1/p, returns (c0, c1, rms residual)."""
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ps) == 1:
        return float(values[0]), 0.0, 0.0
    design = np.column_stack([np.ones_like(ps), 1.0 / ps])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = values - design @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(residual ** 2)))


def fit_log_linear(ns, values) -> tuple[float, float, float]:
    """Least-squares fit H(n) = a + h*n + b*log(n), returns (h, a, b)."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    design = np.column_stack([np.ones_like(ns), ns, np.log(ns)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(coef[1]), float(coef[0]), float(coef[2])


def fit_growth_exponent(ns, log_values) -> float:
    """Limit of log_values/n fitted as c0 + c1*log(n)/n + c2/n."""
    ns = np.asarray(ns, dtype=float)
    per_n = np.asarray(log_values, dtype=float) / ns
    if len(ns) < 3:
        return float(per_n[-1])
    design = np.column_stack([np.ones_like(ns), np.log(ns) / ns, 1.0 / ns])
    coef, *_ = np.linalg.lstsq(design, per_n, rcond=None)
    return float(coef[0])


def zeta_tail(exponent: float, n: int) -> float:
    """Sum over m > n of m**-exponent, exponent > 1."""
    if exponent <= 1:
        raise ValueError("The series diverges for exponents <= 1.")
    cutoff = n + 100_000
    m = np.arange(n + 1, cutoff + 1, dtype=float)
    # integral tail plus half the first omitted term
    tail = cutoff ** (1 - exponent) / (exponent - 1) - 0.5 * cutoff ** (-exponent)
    return compensated_sum(m ** (-exponent)) + tail


def zeta_partial(exponent: float, n: int) -> float:
    return compensated_sum(float(m) ** (-exponent) for m in range(1, n + 1))


def value_str(x: float, fancy=True) -> str:
    text = f"{x:.6f}" if isinstance(x, float) else str(x)
    return text_format["value"] + text + text_format["end"] if fancy else text


def status_str(passed: bool, fancy=True) -> str:
    text = "ok" if passed else "FAILED"
    if not fancy:
        return text
    return text_format["ok" if passed else "fail"] + text + text_format["end"]


def bold_str(s: str, fancy=True) -> str:
    return text_format["bold"] + s + text_format["end"] if fancy else s
