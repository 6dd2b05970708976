"""Property suites run by `avezlab verify`.

Checks register themselves per suite; each returns (passed, detail) and runs at desk scale.
"""
from collections import defaultdict
from fractions import Fraction
import logging
import math
import time
from typing import Callable

import numpy as np
from tqdm import tqdm

from avezlab import boundary, dlvp, estimators, spectra, utils, weights
from avezlab.groups import GroupDescriptor
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import SparseMeasure, convolution_power, iter_powers, series_measure, shannon_entropy

logger = logging.getLogger("avezlab.verify")

H_F2 = 0.5 * math.log(3)


class Check:
    def __init__(self, name: str, suite: str, run: Callable[[int, LabRules], tuple[bool, str]], slow=False):
        self.name = name
        self.suite = suite
        self.run = run
        self.slow = slow


class CheckResult:
    def __init__(self, check: Check, passed: bool, detail: str, seconds: float):
        self.name = check.name
        self.suite = check.suite
        self.passed = passed
        self.detail = detail
        self.seconds = seconds

    def __repr__(self) -> str:
        return f"CheckResult({self.suite}/{self.name}: {'ok' if self.passed else 'FAILED'})"

    def to_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3)}


class CheckStore:
    def __init__(self):
        self.dict_by_name: dict[str, Check] = {}
        self.dict_by_suite: dict[str, list[Check]] = defaultdict(list)

    def add(self, check: Check) -> None:
        if check.name in self.dict_by_name:
            raise ValueError(f"Check {check.name!r} is registered twice.")
        self.dict_by_name[check.name] = check
        self.dict_by_suite[check.suite].append(check)

    @property
    def suites(self) -> list[str]:
        return sorted(self.dict_by_suite)

    def get_by_suite(self, suite: str) -> list[Check]:
        if suite == "all":
            return [c for name in self.suites for c in self.dict_by_suite[name]]
        if suite not in self.dict_by_suite:
            raise ValueError(f"Unknown suite {suite!r}, expected one of all, {', '.join(self.suites)}.")
        return list(self.dict_by_suite[suite])


CHECKS = CheckStore()


def check(suite: str, slow=False):
    def register(func):
        CHECKS.add(Check(func.__name__, suite, func, slow))
        return func
    return register


def run_suite(suite: str = "all", seed: int = 0, rules: LabRules = DEFAULT, include_slow=True,
              progress=False, log=False) -> list[CheckResult]:
    if log:
        logger.setLevel(logging.INFO)
    if log == "DEBUG":
        logger.setLevel(logging.DEBUG)
    checks = [c for c in CHECKS.get_by_suite(suite) if include_slow or not c.slow]
    results = []
    for c in tqdm(checks, leave=False, disable=not progress, desc="verify"):
        start = time.time()
        try:
            passed, detail = c.run(seed, rules)
        except Exception as err:
            passed, detail = False, f"{type(err).__name__}: {err}"
        results.append(CheckResult(c, bool(passed), detail, time.time() - start))
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, f"{c.suite}/{c.name}: {'ok' if passed else 'FAILED'} ({detail})")
    return results


def summary(results: list[CheckResult], fancy=True) -> str:
    """One line per check and a closing count, for humans."""
    lines = [f"{utils.status_str(r.passed, fancy)} {r.suite}/{r.name} "
             f"({utils.value_str(f'{r.seconds:.3f}', fancy)} s): {r.detail}" for r in results]
    passed = sum(r.passed for r in results)
    lines.append(utils.bold_str(f"{passed}/{len(results)} checks passed", fancy))
    return "\n".join(lines)


def _f2() -> GroupDescriptor:
    return GroupDescriptor.from_spec("free:2")


def _srw(spec: str) -> SparseMeasure:
    return SparseMeasure.srw(GroupDescriptor.from_spec(spec))


# --- groups and measures --------------------------------------------------------------


@check("groups")
def group_axioms(seed: int, rules: LabRules):
    rng = np.random.default_rng(seed)
    for spec in ("free:2", "abelian:2", "cyclic:6", "lamplighter:1"):
        desc = GroupDescriptor.from_spec(spec)
        e = desc.identity_key()
        for _ in range(200):
            a, b, c = (desc.random_key(rng, 6) for _ in range(3))
            if desc.mul_key(desc.mul_key(a, b), c) != desc.mul_key(a, desc.mul_key(b, c)):
                return False, f"associativity fails in {desc}"
            if desc.mul_key(a, desc.inv_key(a)) != e:
                return False, f"inverse fails in {desc}"
    return True, "associativity and inverses on 200 triples per family"


@check("measures")
def convolution_mass(seed: int, rules: LabRules):
    worst = 0.0
    for spec in ("free:2", "abelian:2", "cyclic:6", "lamplighter:1"):
        for n, power in iter_powers(_srw(spec), 6, rules):
            worst = max(worst, abs(power.to_sparse(rules).total - 1.0))
    return worst < 1e-12, f"max mass defect {worst:.2e}"


@check("measures")
def radial_matches_sparse(seed: int, rules: LabRules):
    mu = _srw("free:2")
    exact = convolution_power(mu, 5, "exact", rules)
    radial = convolution_power(mu, 5, "radial", rules)
    gap = abs(shannon_entropy(exact, rules) - shannon_entropy(radial, rules))
    return gap < 1e-12, f"entropy gap {gap:.2e} at n=5"


# --- weights ----------------------------------------------------------------------------


@check("weights")
def weighted_entropy_identity(seed: int, rules: LabRules):
    rng = np.random.default_rng(seed)
    group = _f2()
    worst = 0.0
    for _ in range(20):
        keys = {group.random_key(rng, 3) for _ in range(6)}
        mu = SparseMeasure(group, {k: float(rng.uniform(0.1, 1.0)) for k in keys}, normalize=True)
        omega = weights.parse_weight(f"poly:d={rng.uniform(0.5, 3):.3f}")
        for n, power in iter_powers(mu, 3, rules):
            lhs = weights.weighted_shannon_entropy(power, omega, rules)
            rhs = shannon_entropy(power, rules) - weights.log_moment(power, omega, rules)
            worst = max(worst, abs(lhs - rhs))
    return worst <= 1e-9, f"max identity defect {worst:.2e} over 20 pairs"


@check("weights")
def inverse_series_domination(seed: int, rules: LabRules):
    details = []
    for spec in ("abelian:1", "free:2"):
        report = weights.verify_convolution_domination(
            weights.build_inverse_series_weight(_srw(spec), 8, rules=rules), rules)
        details.append(f"{spec}: {report.max_ratio:.4f}")
        if not report.within:
            return False, f"domination ratio {report.max_ratio:.4f} above {report.bound:.4f} for {spec}"
    return True, ", ".join(details)


# --- spectra ----------------------------------------------------------------------------


@check("spectra")
def kesten_free(seed: int, rules: LabRules):
    r = spectra.radius_pf2_symmetric(_srw("free:2"), 2000, rules)
    return 0.8650 <= r.value <= 0.8675, f"r = {r.value:.6f}"


@check("spectra", slow=True)
def kesten_amenable(seed: int, rules: LabRules):
    values = {spec: spectra.radius_pf2_symmetric(_srw(spec), 2000, rules).value
              for spec in ("abelian:1", "abelian:2", "cyclic:6", "lamplighter:1")}
    return min(values.values()) >= 0.99, ", ".join(f"{k}: {v:.5f}" for k, v in values.items())


@check("spectra", slow=True)
def pfq_sandwich(seed: int, rules: LabRules):
    details = []
    for spec in ("free:2", "abelian:1"):
        for q in (1.5, 2.0):
            lower = spectra.radius_pfq_lower(_srw(spec), q, 2000, rules).value
            upper = spectra.radius_pfq_upper_rd(_srw(spec), q, 2, 2000, rules).value
            details.append(f"{spec} q={q}: {lower:.5f} <= {upper:.5f}")
            if lower > upper + 0.02:
                return False, details[-1] + " fails"
    return True, ", ".join(details)


# --- estimators -------------------------------------------------------------------------


@check("estimators")
def avez_free(seed: int, rules: LabRules):
    h = estimators.avez_entropy(_srw("free:2"), 12, rules=rules).estimate
    return abs(h - H_F2) <= 0.05 * H_F2, f"h = {h:.6f}"


@check("estimators")
def lyapunov_log_length_vanishes(seed: int, rules: LabRules):
    report = estimators.lyapunov_direct(_srw("free:2"), weights.parse_weight("poly:d=1"), 2000, rules)
    per_n = report.sequences["per_n"]
    return per_n.last <= 0.01, f"(1/n) sum log(1+|s|) = {per_n.last:.5f} at n=2000"


@check("estimators")
def lyapunov_routes_agree(seed: int, rules: LabRules):
    mu = _srw("free:2")
    trivial = estimators.lyapunov_direct(mu, weights.ConstantWeight(1), 50, rules).estimate
    omega = weights.ExponentialWeight(rate=1.0)
    direct = estimators.lyapunov_direct(mu, omega, 400, rules).estimate
    radius = estimators.lyapunov_via_radius(mu, omega, n_max=400, rules=rules).estimate
    passed = trivial == 0 and abs(direct - radius) <= 0.02 and abs(direct - 0.5) <= 0.02
    return passed, f"direct {direct:.5f}, via radius {radius:.5f}, trivial {trivial}"


@check("estimators")
def weighted_renyi_limit(seed: int, rules: LabRules):
    mu = _srw("free:2")
    errors = {omega.spec: estimators.weighted_shannon_limit(mu, omega, rules=rules).diagnostics["error"]
              for omega in (weights.ConstantWeight(1), weights.PolynomialWeight(1))}
    return max(errors.values()) <= 1e-6, ", ".join(f"{k}: error {v:.2e}" for k, v in errors.items())


@check("estimators")
def convolution_entropy_bounds(seed: int, rules: LabRules):
    free = estimators.convolution_entropy(_srw("free:2"), n_max=400, rules=rules)
    lattice = estimators.convolution_entropy(_srw("abelian:2"), n_max=200, rules=rules)
    c, h_upper = free.estimate, free.diagnostics["h_upper"]
    passed = 0 <= c <= h_upper and abs(c - H_F2) <= 0.1 * H_F2 and 0 <= lattice.estimate <= 0.02
    return passed, f"F_2: 0 <= {c:.5f} <= {h_upper:.5f}, Z^2: {lattice.estimate:.5f}"


@check("estimators")
def inverse_series_band(seed: int, rules: LabRules):
    report = estimators.inverse_series_report(_srw("free:2"), 8, rules)
    flags = {key: report.diagnostics[key] for key in ("min_lyapunov_ok", "band_vs_h_ok", "band_ok", "gibbs_ok")}
    return all(flags.values()), f"Ly = {report.estimate:.5f}, h = {report.diagnostics['h']:.5f}, {flags}"


@check("estimators", slow=True)
def lamplighter_strict_gap(seed: int, rules: LabRules):
    report = estimators.convolution_entropy(_srw("lamplighter:3"), n_max=100, rules=rules)
    c, h = report.estimate, report.diagnostics["h_estimate"]
    return c <= 0.02 and h >= 0.05, f"c = {c:.5f}, h = {h:.5f}"


# --- boundary ---------------------------------------------------------------------------


@check("boundary")
def boundary_exact_identities(seed: int, rules: LabRules):
    mu = _srw("free:2")
    nu = boundary.harmonic_measure(2, 4, rules)
    for m in range(1, 5):
        if boundary.stationarity_defect(mu, nu, m, rules) != 0:
            return False, f"stationarity fails at depth {m}"
    for r in range(4):
        for s in nu.words(r, rules) if r else [()]:
            if boundary.rn_derivative(s, nu, max(r, 1), rules).integral() != 1:
                return False, f"integral of rho({nu.group.key_str(s)}, .) is not 1"
    if boundary.furstenberg_log_q(mu, nu, rules=rules) != Fraction(1, 2):
        return False, "Furstenberg entropy differs from log(3)/2"
    return True, "stationarity to depth 4, rho integrals for |s| <= 3, h_nu = (1/2) log 3"


def _random_word(rng: np.random.Generator, k: int, m: int) -> tuple:
    word = []
    while len(word) < m:
        letter = int(rng.integers(1, k + 1)) * (1 if rng.random() < 0.5 else -1)
        if not word or word[-1] != -letter:
            word.append(letter)
    return tuple(word)


@check("boundary")
def cocycle_pairs(seed: int, rules: LabRules):
    rng = np.random.default_rng(seed)
    nu = boundary.harmonic_measure(2, 1, rules)
    for _ in range(1000):
        s, t = nu.group.random_key(rng, 3), nu.group.random_key(rng, 3)
        m = len(s) + len(t) + 1
        words = [_random_word(rng, 2, m) for _ in range(4)]
        if boundary.cocycle_defect(s, t, nu, m, words, rules) != 0:
            return False, f"cocycle fails for ({nu.group.key_str(s)}, {nu.group.key_str(t)})"
    return True, "1000 seeded pairs, exact"


@check("boundary")
def koopman_chain(seed: int, rules: LabRules):
    mu = _srw("free:2")
    nu = boundary.harmonic_measure(2, 3, rules)
    report = boundary.koopman_limit(mu, nu, rules=rules)
    monotone = report.sequence.is_monotone(increasing=True, slack=1e-12)
    error = report.diagnostics["error"]
    return monotone and error <= 1e-3, f"limit {report.estimate:.6f}, extrapolation error {error:.2e}"


@check("boundary", slow=True)
def koopman_below_rd_radius(seed: int, rules: LabRules):
    mu = _srw("free:2")
    norm = boundary.koopman_norm_lower(mu, boundary.harmonic_measure(2, 3, rules), 2.0, 3, rules=rules)
    upper = spectra.radius_pfq_upper_rd(mu, 2.0, 2, 2000, rules).value
    p = utils.conjugate(2.0)
    passed = -p * math.log(norm) >= -p * math.log(upper) - 0.03
    return passed, f"Koopman norm {norm:.6f}, RD upper radius {upper:.6f}"


@check("boundary")
def xi_limit(seed: int, rules: LabRules):
    report = boundary.xi_entropy_limit(_srw("free:2"), boundary.harmonic_measure(2, 1, rules), 2000, rules)
    return abs(report.estimate - H_F2) <= 0.02 * H_F2, f"limit {report.estimate:.6f}"


# --- dlvp -------------------------------------------------------------------------------


@check("dlvp")
def dlvp_properties(seed: int, rules: LabRules):
    series, _ = series_measure(_srw("free:2"), [2.0 ** -(n + 1) for n in range(31)], rules)
    bundle = dlvp.build_bundle(series, "log1pL", rules=rules)
    psi = dlvp.psi_checks(bundle)
    violation = dlvp.weak_subadditivity(bundle, 50)
    theta = dlvp.theta_pair_check(bundle, _f2(), 1000, 8, seed, rules)
    sums, bound = dlvp.integrability_sums(bundle, series, "log1pL", rules)
    passed = (psi["monotone"] and psi["lipschitz"] <= 1 + 1e-9 and psi["below_phi"] and psi["knot_slopes_ok"]
              and violation <= bundle.M and theta <= 1e-12 and sums.is_monotone() and sums.last <= bound
              and dlvp.lambda_decreasing(bundle))
    return passed, (f"M = {bundle.M:.4f}, grid violation {violation:.4f}, theta {theta:.2e}, "
                    f"partial sums {sums.last:.4f} <= {bound:.4f}")

