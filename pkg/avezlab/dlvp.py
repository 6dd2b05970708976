"""Thresholds, the functions phi, psi, Psi, F and the subadditive majorant Theta.

Given f >= 0 integrable against mu, integer thresholds c_1 < c_2 < ... with
sum_{f >= c_n} mu f < 2^-n define

    phi(y) = n                on [c_n, c_{n+1})
    psi    = 0 on [0, c_1],   linear from (c_n, n-1) to (c_{n+1}, n)
    Psi(y) = int_0^y psi,     F(y) = Psi(log(1+y))

and M = max{1, 2 c M1 - F(c)} gives F(y+y') <= F(y) + F(y') + M.
"""
from fractions import Fraction
import logging
import math
from typing import Callable

import numpy as np

from avezlab.errors import DomainError
from avezlab.groups import GroupDescriptor, GroupElement
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import Distribution, iter_powers, length_moment
from avezlab.sequence import AsymptoticSequence, EstimateReport, IndexKind

logger = logging.getLogger("avezlab.dlvp")

LENGTH_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "log1pL": np.log1p,
    "L": lambda r: np.asarray(r, dtype=float),
    "zero": lambda r: np.zeros_like(np.asarray(r, dtype=float)),
}


def length_function(f: "str | Callable") -> Callable[[np.ndarray], np.ndarray]:
    if callable(f):
        return f
    try:
        return LENGTH_FUNCTIONS[f]
    except KeyError:
        raise ValueError(f"Unknown function {f!r}, expected one of {', '.join(LENGTH_FUNCTIONS)}.")


def _values_and_masses(mu: Distribution, f, rules: LabRules) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f on each length class of mu together with the class masses and lengths."""
    prof = mu.profile(rules)
    lengths = prof.lengths.astype(float)
    values = np.asarray(length_function(f)(lengths), dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DomainError("f has to be finite and non-negative on the support.")
    return values, prof.class_mass, lengths


def _tail(values: np.ndarray, masses: np.ndarray, c: float) -> float:
    chosen = values >= c
    return float(np.sum(masses[chosen] * values[chosen]))


def _least_threshold(values: np.ndarray, masses: np.ndarray, target: float, lower: int) -> int:
    """Least integer c >= lower with sum_{f >= c} mu f < target."""
    order = np.argsort(values)
    sorted_values = values[order]
    suffix = np.cumsum((masses[order] * sorted_values)[::-1])[::-1]
    # suffix[i] is the tail above sorted_values[i]; it decreases with i
    ok = np.nonzero(suffix < target)[0]
    first = ok[0] if len(ok) else len(sorted_values)
    c = lower
    if first > 0:
        c = max(c, math.floor(sorted_values[first - 1]) + 1)
    return int(c)


class DlvpBundle:
    """Thresholds and the closed-form functions built on them.

    Beyond the last stored threshold the knots continue with unit spacing.
    """

    def __init__(self, thresholds, tails=(), certified_levels: int | None = None, uncertified: float = 0.0,
                 f_max: float = 0.0):
        thresholds = [int(c) for c in thresholds]
        if not thresholds or thresholds[0] < 1 or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("Thresholds have to be increasing positive integers.")
        self.thresholds = tuple(thresholds)
        self.tails = tuple(float(t) for t in tails)
        self.certified_levels = len(thresholds) if certified_levels is None else certified_levels
        self.uncertified = uncertified
        self.f_max = f_max
        levels = len(thresholds)
        self._knots = np.array([0.0] + [float(c) for c in thresholds])
        self._psi_knots = np.array([0.0] + [float(n - 1) for n in range(1, levels + 1)])
        Psi = [0.0, 0.0]
        for n in range(1, levels):
            width = thresholds[n] - thresholds[n - 1]
            Psi.append(Psi[-1] + width * (2 * n - 1) / 2)
        self._Psi_knots = np.array(Psi)
        # filled by find_M
        self.onset: float | None = None
        self.M1: float | None = None
        self.M: float | None = None

    def __repr__(self) -> str:
        return f"DlvpBundle({len(self.thresholds)} thresholds, M={self.M})"

    @property
    def levels(self) -> int:
        return len(self.thresholds)

    def slopes(self) -> list[Fraction]:
        """Slope of psi on each [c_n, c_{n+1}], exact."""
        c = self.thresholds
        return [Fraction(1, b - a) for a, b in zip(c, c[1:])] + [Fraction(1)]

    @staticmethod
    def _check(y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise DomainError("The functions are defined on [0, inf).")
        return y

    def _segment(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index of the stored segment containing y and the slope there."""
        idx = np.clip(np.searchsorted(self._knots, y, side="right") - 1, 0, self.levels)
        widths = np.append(np.diff(self._knots), 1.0)
        slopes = np.where(idx == 0, 0.0, 1.0 / widths[idx])
        return idx, slopes

    def phi(self, y):
        y = self._check(y)
        count = np.asarray(np.searchsorted(self._knots[1:], y, side="right"), dtype=float)
        beyond = y >= self._knots[-1]
        count[...] = np.where(beyond, self.levels + np.floor(y - self._knots[-1]), count)
        return count if count.ndim else float(count)

    def psi(self, y):
        y = self._check(y)
        idx, slopes = self._segment(y)
        out = self._psi_knots[idx] + slopes * (y - self._knots[idx])
        return out if out.ndim else float(out)

    def Psi(self, y):
        y = self._check(y)
        idx, slopes = self._segment(y)
        dy = y - self._knots[idx]
        out = self._Psi_knots[idx] + self._psi_knots[idx] * dy + slopes * dy * dy / 2
        return out if out.ndim else float(out)

    def F(self, y):
        return self.Psi(np.log1p(self._check(y)))

    def F_prime(self, y):
        y = self._check(y)
        return self.psi(np.log1p(y)) / (1 + y)

    def Lam(self, u):
        """psi(u)/e^u, the derivative of F read at y = e^u - 1."""
        u = self._check(u)
        return self.psi(u) * np.exp(-u)

    def theta(self, length: float) -> float:
        if self.M is None:
            raise DomainError("M is not computed yet, run find_M first.")
        return float(self.F(length)) + self.M

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "tails": list(self.tails),
                "slopes": [str(s) for s in self.slopes()], "certified_levels": self.certified_levels,
                "uncertified": self.uncertified, "f_max": self.f_max,
                "onset": self.onset, "M1": self.M1, "M": self.M}


def build_bundle(mu: Distribution, f: "str | Callable" = "log1pL", uncertified: float = 0.0,
                 levels: int | None = None, rules: LabRules = DEFAULT) -> DlvpBundle:
    """Greedy minimal thresholds with sum_{f >= c_n} mu f + uncertified < 2^-n.

    `uncertified` bounds the integral of f over mass missing from mu, e.g. a dropped series tail.
    """
    levels = rules.dlvp_levels if levels is None else levels
    values, masses, _ = _values_and_masses(mu, f, rules)
    if uncertified >= 0.5:
        raise DomainError(f"The uncertified tail {uncertified} blocks every tail bound, "
                          f"the support is too small to certify c_1.", uncertified=uncertified)
    thresholds, tails = [], []
    certified = 0
    for n in range(1, levels + 1):
        target = 2.0 ** -n - uncertified
        lower = thresholds[-1] + 1 if thresholds else 1
        if target <= 0:
            c = lower
        else:
            c = _least_threshold(values, masses, target, lower)
            certified = n
        thresholds.append(c)
        tails.append(_tail(values, masses, c))
    bundle = DlvpBundle(thresholds, tails, certified, uncertified, float(np.max(values, initial=0.0)))
    find_M(bundle, rules)
    logger.info(f"Thresholds {bundle.thresholds[:6]}... certified to level {certified}, M = {bundle.M:.6g}")
    return bundle


def eval_psi(bundle: DlvpBundle, y):
    return bundle.psi(y)


def eval_Psi(bundle: DlvpBundle, y):
    return bundle.Psi(y)


def eval_F(bundle: DlvpBundle, y):
    return bundle.F(y)


def eval_phi(bundle: DlvpBundle, y):
    return bundle.phi(y)


def find_M(bundle: DlvpBundle, rules: LabRules = DEFAULT) -> float:
    """M = max{1, 2 c M1 - F(c)}.

    F' = Lam(log(1+y)), so the onset is located by scanning u with step dlvp_grid_step;
    Lam is non-increasing once psi >= 1, i.e. beyond c_2.
    """
    step = rules.dlvp_grid_step
    c2 = bundle.thresholds[1] if bundle.levels > 1 else bundle.thresholds[0] + 1
    u = np.arange(0.0, c2 + 1.0 + step, step)
    lam = bundle.Lam(u)
    rises = np.nonzero(np.diff(lam) > 0)[0]
    onset_u = float(u[rises[-1] + 1]) if len(rises) else 0.0
    onset = math.expm1(onset_u)
    # |Lam'| <= 2, so the grid maximum is off by at most 2 * step
    u_window = np.arange(0.0, math.log1p(onset + 10.0) + step, step)
    M1 = float(np.max(bundle.Lam(u_window))) + 2 * step
    bundle.onset, bundle.M1 = onset, M1
    bundle.M = max(1.0, 2 * onset * M1 - float(bundle.F(onset)))
    logger.debug(f"onset c = {onset:.6g} (u = {onset_u:.3f}), M1 = {M1:.6g}")
    return bundle.M


def build_theta(bundle: DlvpBundle,
                L: Callable[[GroupElement], float] | None = None) -> Callable[[GroupElement], float]:
    """Theta(s) = F(L(s)) + M; L defaults to the word length."""
    if bundle.M is None:
        find_M(bundle)
    if L is None:
        return lambda s: bundle.theta(s.length)
    return lambda s: bundle.theta(L(s))


# --- property checks -----------------------------------------------------------------


def psi_checks(bundle: DlvpBundle, step: float = 1e-3) -> dict:
    """Monotonicity, the Lipschitz constant, psi <= phi on a grid and the exact knot slopes."""
    top = bundle.thresholds[-1] + 2.0
    y = np.arange(0.0, top, step)
    psi = bundle.psi(y)
    diffs = np.diff(psi)
    return {"monotone": bool(np.all(diffs >= -1e-12)),
            "lipschitz": float(np.max(np.abs(diffs)) / step),
            "below_phi": bool(np.all(psi <= bundle.phi(y) + 1e-12)),
            "knot_slopes_ok": all(s <= 1 for s in bundle.slopes()),
            "zero_before_c1": float(np.max(np.abs(bundle.psi(y[y <= bundle.thresholds[0]]))))}


def weak_subadditivity(bundle: DlvpBundle, grid: int = 50) -> float:
    """max of F(y+y') - F(y) - F(y') over (y, y') in {0..grid}^2."""
    y = np.arange(grid + 1, dtype=float)
    F = bundle.F(y)
    total = bundle.F(y[:, None] + y[None, :])
    return float(np.max(total - F[:, None] - F[None, :]))


def theta_pair_check(bundle: DlvpBundle, desc: GroupDescriptor, count: int = 1000, radius: int = 8, seed: int = 0,
                     rules: LabRules = DEFAULT) -> float:
    """max of Theta(st) - Theta(s) - Theta(t) over seeded pairs, non-positive when Theta is subadditive."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        s, t = desc.random_key(rng, radius), desc.random_key(rng, radius)
        st = desc.mul_key(s, t)
        worst = max(worst, bundle.theta(desc.len_key(st, rules)) - bundle.theta(desc.len_key(s, rules))
                    - bundle.theta(desc.len_key(t, rules)))
    return worst


def integrability_sums(bundle: DlvpBundle, mu: Distribution, f: "str | Callable" = "log1pL",
                       rules: LabRules = DEFAULT) -> tuple[AsymptoticSequence, float]:
    """Partial sums of sum_{|s| <= R} mu(s) Psi(f(s)) over R and a bound they stay under.

    Psi(y) <= y phi(y), so the full sum is at most sum_n sum_{f >= c_n} mu f; the knots
    beyond the stored ones each add at most the last tail.
    """
    values, masses, lengths = _values_and_masses(mu, f, rules)
    sums = AsymptoticSequence(IndexKind.Radius, name="psi_partial_sums")
    contributions = masses * bundle.Psi(values)
    for R in range(int(lengths.max(initial=0)) + 1):
        sums.append(R, float(np.sum(contributions[lengths <= R])))
    extra = max(0.0, bundle.f_max - bundle.thresholds[-1]) * bundle.tails[-1] if bundle.tails else 0.0
    return sums, sum(bundle.tails) + extra


def lambda_decreasing(bundle: DlvpBundle, step: float = 1e-3, span: float = 20.0) -> bool:
    """Lam(u) = psi(u)/e^u non-increasing on a grid beyond the first u with psi(u) >= 1."""
    start = bundle.thresholds[1] if bundle.levels > 1 else bundle.thresholds[0] + 1
    u = np.arange(start, start + span, step)
    return bool(np.all(np.diff(bundle.Lam(u)) <= 1e-15))


def vanishing_level(bundle: DlvpBundle, eps: float, step: float = 1e-3) -> float:
    """log(1 + N) for the least grid N with log(1+y)/(F(y)+M) < eps for all y >= N.

    In u = log(1+y) the ratio is u/(Psi(u)+M); it is non-increasing once
    u psi(u) - Psi(u) >= M, because that difference never decreases.
    """
    if eps <= 0:
        raise ValueError("eps has to be positive.")
    M = bundle.M if bundle.M is not None else find_M(bundle)
    end = max(float(bundle.thresholds[-1]), 1.0)
    while True:
        turning = end * float(bundle.psi(end)) - float(bundle.Psi(end)) >= M
        if turning and end / (float(bundle.Psi(end)) + M) < eps:
            break
        end *= 2
    u = np.arange(0.0, end + step, step)
    ratio = u / (bundle.Psi(u) + M)
    bad = np.nonzero(ratio >= eps)[0]
    return float(u[bad[-1] + 1]) + step if len(bad) else 0.0


def vanishing_chain(bundle: DlvpBundle, mu, n_grid, eps: float, rules: LabRules = DEFAULT) -> EstimateReport:
    """sum mu^{*n} log(1+L) <= log(1+N_eps) + eps sum mu^{*n} Theta for each n of the grid."""
    n_grid = sorted(set(int(n) for n in n_grid))
    if not n_grid or n_grid[0] < 1:
        raise ValueError("The step grid needs positive steps.")
    log1p_N = vanishing_level(bundle, eps, rules.dlvp_grid_step)
    M = bundle.M
    wanted = set(n_grid)
    log_sums = AsymptoticSequence(IndexKind.Step, name="log1pL_per_n")
    theta_sums = AsymptoticSequence(IndexKind.Step, subadditive=True, name="theta_per_n")
    slack = AsymptoticSequence(IndexKind.Step, name="chain_slack")
    for n, power in iter_powers(mu, n_grid[-1], rules):
        if n not in wanted:
            continue
        lhs = length_moment(power, np.log1p, rules)
        theta = length_moment(power, lambda r: bundle.F(r) + M, rules)
        log_sums.append(n, lhs / n)
        theta_sums.append(n, theta / n)
        slack.append(n, log1p_N + eps * theta - lhs)
    report = EstimateReport("vanishing_chain", log_sums.last, 0.0, None, ["dlvp-theta"],
                            {"log1pL_per_n": log_sums, "theta_per_n": theta_sums, "chain_slack": slack},
                            params={"eps": eps, "n_grid": n_grid},
                            diagnostics={"log1p_N": log1p_N, "M": M, "thresholds": list(bundle.thresholds),
                                         "holds": bool(np.all(slack.values >= -1e-9))})
    if not report.diagnostics["holds"]:
        report.flag("the inequality chain fails at some step")
    return report
