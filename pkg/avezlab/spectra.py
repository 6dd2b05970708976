from enum import Enum
import logging
import math
from typing import Callable, Iterator

import numpy as np

from avezlab.errors import DomainError, ResourceError
from avezlab.groups import Family
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import (Distribution, LatticeMeasure, PowerPolicy, SparseMeasure,
                              iter_powers, lattice_power, log_lq_norm)
from avezlab.sequence import AsymptoticSequence, EstimateReport, IndexKind, clamp
from avezlab.weights import PolynomialWeight, Weight, log_weighted_l1_norm, log_weighted_lq_norm
import avezlab.utils as utils

logger = logging.getLogger("avezlab.spectra")


class RadiusMethod(Enum):
    """Estimators a spectral radius can come from"""
    Root = "root"
    Ratio = "ratio"
    ReturnProb = "return-prob"
    RdUpper = "rd-upper"
    LqLower = "lq-lower"
    Folner = "folner"

    def __str__(self):
        return self.value


class RadiusEstimate:
    """A spectral radius with its bounds; `sequence` holds the root terms, `ratios` the ratio terms."""

    def __init__(self, value: float, lower: float | None, upper: float | None, method: list[RadiusMethod],
                 sequence: AsymptoticSequence, ratios: AsymptoticSequence | None = None,
                 diagnostics: dict | None = None):
        if lower is not None and upper is not None and lower > upper + 1e-12:
            raise ValueError(f"Radius bounds cross: {lower} > {upper}.")
        self.value = clamp(value, lower, upper)
        self.lower = lower
        self.upper = upper
        self.method = method
        self.sequence = sequence
        self.ratios = ratios
        self.diagnostics = diagnostics or {}

    def __repr__(self) -> str:
        return f"RadiusEstimate({self.value:.6f} in [{self.lower}, {self.upper}], {'/'.join(map(str, self.method))})"

    def to_report(self, quantity: str, params: dict | None = None) -> EstimateReport:
        sequences = {"root": self.sequence}
        if self.ratios is not None and len(self.ratios):
            sequences["ratio"] = self.ratios
        return EstimateReport(quantity, self.value, self.lower, self.upper, [str(m) for m in self.method],
                              sequences, params=params, diagnostics=self.diagnostics)


# --- sweeps -------------------------------------------------------------------------------


def sample_steps(n_max: int, window: int, points=24) -> list[int]:
    """Log-spaced steps up to n_max plus the last 2*window consecutive steps."""
    if n_max < 1:
        raise ValueError("n_max has to be positive.")
    spaced = np.unique(np.round(np.geomspace(1, n_max, num=min(points, n_max))).astype(int))
    tail = range(max(1, n_max - 2 * window + 1), n_max + 1)
    return sorted(set(int(n) for n in spaced) | set(tail))


def _largest_torus_step(mu: SparseMeasure, n_max: int, rules: LabRules) -> int:
    spans = [s - 1 for s in LatticeMeasure.from_sparse(mu).array.shape]
    fits = lambda n: math.prod(n * s + 1 for s in spans) <= rules.element_cap
    if fits(n_max):
        return n_max
    low, high = 1, n_max
    while high - low > 1:
        mid = (low + high) // 2
        if fits(mid):
            low = mid
        else:
            high = mid
    return low


def power_sweep(mu: SparseMeasure, n_max: int, rules: LabRules = DEFAULT, diagnostics: dict | None = None,
                workers=1) -> Iterator[tuple[int, Distribution]]:
    """(n, mu^{*n}) along the steps a radius estimate needs, in increasing n.

    Radial free-group and cyclic measures give every step; abelian measures a sample of
    steps through the Fourier transform; anything else is enumerated up to rules.sparse_steps.
    Truncations are recorded in `diagnostics`.
    """
    diagnostics = {} if diagnostics is None else diagnostics
    family = mu.group.family
    if (family is Family.Free and mu.is_radial()) or family is Family.Cyclic:
        yield from iter_powers(mu, n_max, rules, PowerPolicy.Cap, workers)
        return
    if family is Family.Abelian:
        reach = _largest_torus_step(mu, n_max, rules)
        if reach < n_max:
            diagnostics["truncated_at"] = reach
            logger.warning(f"{mu.group}: Fourier powers stop at n={reach} under the element cap")
        for n in sample_steps(reach, rules.cauchy_window):
            yield n, lattice_power(mu, n, rules)
        return
    reach = min(n_max, rules.sparse_steps)
    try:
        for n, power in iter_powers(mu, reach, rules, PowerPolicy.Exact, workers):
            yield n, power
    except ResourceError as err:
        diagnostics["truncated_at"] = diagnostics.get("last_n", 0)
        logger.warning(f"{mu.group}: sparse powers stopped: {err}")
        return
    if reach < n_max:
        diagnostics["truncated_at"] = reach


def root_and_ratio(log_norms: list[tuple[int, float]], name: str) -> tuple[AsymptoticSequence, AsymptoticSequence]:
    """Root terms exp(l_n/n) and ratio terms exp((l_m - l_n)/(m - n)) over consecutive samples."""
    root = AsymptoticSequence(IndexKind.Step, name=f"{name}_root")
    ratio = AsymptoticSequence(IndexKind.Step, name=f"{name}_ratio")
    previous = None
    for n, log_norm in log_norms:
        root.append(n, math.exp(log_norm / n))
        if previous is not None:
            ratio.append(n, math.exp((log_norm - previous[1]) / (n - previous[0])))
        previous = (n, log_norm)
    return root, ratio


def headline(root: AsymptoticSequence, ratio: AsymptoticSequence, rules: LabRules) -> tuple[float, RadiusMethod]:
    """The ratio value when its last terms are Cauchy, else the root value."""
    if ratio.cauchy(rules.cauchy_window, rules.cauchy_tol):
        return ratio.last, RadiusMethod.Ratio
    return root.last, RadiusMethod.Root


def _log_norm_sweep(mu: SparseMeasure, n_max: int, log_norm: Callable[[Distribution], float],
                    rules: LabRules, diagnostics: dict, workers=1) -> list[tuple[int, float]]:
    values = []
    for n, power in power_sweep(mu, n_max, rules, diagnostics, workers):
        diagnostics["last_n"] = n
        values.append((n, log_norm(power)))
    if not values:
        raise ResourceError(f"No power of the measure on {mu.group} could be computed.")
    return values


# --- return probabilities -----------------------------------------------------------------


def _torus_return_probabilities(mu: SparseMeasure, steps: list[int], rules: LabRules) -> list[float]:
    """mu^{*n}(e) as the mean of the characteristic function to the n-th power over a torus grid.

    Cyclic groups use their own dual group, so the values are exact; abelian groups use a
    torus larger than the reach of n steps, so no displacement aliases to the origin.
    """
    group = mu.group
    keys = [k if isinstance(k, tuple) else (k,) for k in mu.atoms]
    masses = np.fromiter(mu.atoms.values(), dtype=float)
    if group.family is Family.Cyclic:
        sides = (group.order,)
    else:
        spans = np.abs(np.array(keys)).max(axis=0)
        sides = tuple(int(max(steps) * s + 1) for s in spans)
        if math.prod(sides) > rules.element_cap:
            raise ResourceError(f"Torus {sides} for return probabilities exceeds the element cap.")
    thetas = np.ogrid[tuple(slice(0, s) for s in sides)]
    phase = np.zeros(sides, dtype=complex)
    for key, mass in zip(keys, masses):
        angle = sum(2 * math.pi * z * t / s for z, t, s in zip(key, thetas, sides))
        phase = phase + mass * np.exp(1j * angle)
    if mu.is_symmetric():
        phase = phase.real
    return [max(0.0, float(np.mean(np.power(phase, n)).real)) for n in steps]


def return_probabilities(mu: SparseMeasure, n_max: int, rules: LabRules = DEFAULT,
                         diagnostics: dict | None = None) -> AsymptoticSequence:
    """mu^{*2m}(e) at even steps 2m <= n_max, indexed by the step count."""
    diagnostics = {} if diagnostics is None else diagnostics
    seq = AsymptoticSequence(IndexKind.Step, name="return_probability")
    family = mu.group.family
    if family in (Family.Abelian, Family.Cyclic):
        steps = [2 * m for m in sample_steps(max(1, n_max // 2), rules.cauchy_window)]
        for n, value in zip(steps, _torus_return_probabilities(mu, steps, rules)):
            seq.append(n, value)
        return seq
    for n, power in power_sweep(mu, n_max, rules, diagnostics):
        if n % 2 == 0:
            seq.append(n, power.mass_at_identity())
    return seq


def folner_lower(mu: SparseMeasure, n: int | None = None, rules: LabRules = DEFAULT) -> tuple[float, dict]:
    """Certified lower bound s_n^(1/n) on the PF_2 radius of a symmetric measure on an amenable family.

    s_n lower-bounds the chance that the walk started uniformly in a box stays in it for n
    steps; the box is [0, L)^d for the lattice part, lamps being free inside the box widened
    by the lamp reach of one step. Each coordinate is a one dimensional killed walk and the
    coordinates are combined with a union bound.
    """
    group = mu.group
    if not group.amenable:
        raise DomainError(f"{group} is not amenable, it has no Følner sets.")
    if not mu.is_symmetric():
        raise DomainError("The Følner certificate needs a symmetric measure.")
    n = max(n or 0, rules.folner_steps)
    if group.family is Family.Cyclic:
        # the whole group is invariant
        return 1.0, {"steps": n, "survival": 1.0, "box": group.order}
    match group.family:
        case Family.Abelian:
            moves = [np.array(k) for k in mu.atoms]
        case Family.Lamplighter:
            moves = [np.array(k[1]) for k in mu.atoms]
        case _:
            moves = [np.array([sum(1 if x > 0 else -1 for x in k)]) for k in mu.atoms]
    masses = np.fromiter(mu.atoms.values(), dtype=float)
    side = rules.folner_box
    escape = 0.0
    for axis in range(len(moves[0])):
        offsets = np.array([int(m[axis]) for m in moves])
        reach = int(np.abs(offsets).max())
        if reach == 0:
            continue
        kernel = np.zeros(2 * reach + 1)
        np.add.at(kernel, offsets + reach, masses)
        alive = np.full(side, 1.0 / side)
        for _ in range(n):
            alive = np.convolve(alive, kernel, mode="full")[reach:reach + side]
        escape += 1.0 - utils.compensated_sum(alive)
    survival = max(0.0, 1.0 - escape)
    bound = survival ** (1.0 / n) if survival > 0 else 0.0
    logger.debug(f"{group}: Følner box {side}, {n} steps, survival {survival:.6f}, bound {bound:.8f}")
    return bound, {"steps": n, "survival": survival, "box": side}


# --- radii --------------------------------------------------------------------------------


def radius_l1_weighted(mu: SparseMeasure, omega: Weight, p: float = 1.0, n_max: int = 200,
                       rules: LabRules = DEFAULT, workers=1) -> RadiusEstimate:
    """Spectral radius of mu in l1(G, omega_p).

    Every norm is at least the lower bound of the weight times ||mu^{*n}||_1 = 1, so the
    radius is at least 1. A declared constant C makes C^(1/p)||.||_{1,omega_p} submultiplicative
    and min_n (C^(1/p)||mu^{*n}||)^(1/n) an upper bound.
    """
    omega_p = omega.power(p)
    diagnostics = {}
    log_norms = _log_norm_sweep(mu, n_max, lambda d: log_weighted_l1_norm(d, omega_p, rules), rules,
                                diagnostics, workers)
    root, ratio = root_and_ratio(log_norms, "l1_weighted")
    value, method = headline(root, ratio, rules)
    upper = None
    if omega.C is not None:
        log_c = math.log(omega.C) / p
        upper = math.exp(min((l + log_c) / n for n, l in log_norms))
        upper = max(upper, 1.0)
    diagnostics.update({"root": root.last, "ratio": ratio.last if len(ratio) else None, "p": p,
                        "root_decreasing": root.is_monotone(increasing=False, slack=1e-9)})
    return RadiusEstimate(value, 1.0, upper, [method], root, ratio, diagnostics)


def radius_pf2_symmetric(mu: SparseMeasure, n_max: int = 2000, rules: LabRules = DEFAULT) -> RadiusEstimate:
    """Kesten radius from return probabilities; every root mu^{*2m}(e)^(1/2m) is a lower bound."""
    if not mu.is_symmetric():
        raise DomainError("The return-probability route needs a symmetric measure.")
    diagnostics = {}
    returns = return_probabilities(mu, n_max, rules, diagnostics)
    log_terms = [(n, math.log(v)) for n, v in returns if v > 0]
    if not log_terms:
        raise DomainError("No positive return probability was found.")
    root, ratio = root_and_ratio(log_terms, "return")
    value, method = headline(root, ratio, rules)
    lower = float(root.values.max())
    methods = [RadiusMethod.ReturnProb, method]
    if mu.group.amenable:
        folner, info = folner_lower(mu, n_max, rules)
        diagnostics["folner"] = info | {"bound": folner}
        if folner > lower:
            lower = folner
            methods.append(RadiusMethod.Folner)
    diagnostics.update({"last_return_probability": returns.last, "return_steps": len(returns)})
    estimate = RadiusEstimate(value, min(lower, 1.0), 1.0, methods, root, ratio, diagnostics)
    logger.info(f"{mu.group}: PF_2 radius {estimate.value:.6f} (lower {estimate.lower:.6f})")
    return estimate


def _pf2_certified_lower(mu: SparseMeasure, n_max: int, rules: LabRules) -> tuple[float, list[RadiusMethod]]:
    if not mu.is_symmetric():
        return 0.0, []
    pf2 = radius_pf2_symmetric(mu, n_max, rules)
    return pf2.lower, [m for m in pf2.method if m in (RadiusMethod.ReturnProb, RadiusMethod.Folner)]


def radius_pfq_lower(mu: SparseMeasure, q: float, n_max: int = 2000, rules: LabRules = DEFAULT,
                     workers=1) -> RadiusEstimate:
    """lim ||mu^{*n}||_q^(1/n), a lower estimate of the PF_q radius.

    The certified lower bound is the PF_2 one, valid for symmetric mu and 1 < q <= 2 by interpolation.
    """
    if q <= 1:
        raise DomainError(f"PF_q needs q > 1, got {q}.")
    diagnostics = {"q": q}
    log_norms = _log_norm_sweep(mu, n_max, lambda d: log_lq_norm(d, q, rules), rules, diagnostics, workers)
    root, ratio = root_and_ratio(log_norms, "lq")
    value, method = headline(root, ratio, rules)
    lower, methods = _pf2_certified_lower(mu, n_max, rules) if q <= 2 else (0.0, [])
    return RadiusEstimate(value, lower, 1.0, [RadiusMethod.LqLower, method] + methods, root, ratio, diagnostics)


def radius_pfq_upper_rd(mu: SparseMeasure, q: float, d: float | None = None, n_max: int = 2000,
                        rules: LabRules = DEFAULT, workers=1) -> RadiusEstimate:
    """lim ||mu^{*n}||_{q, omega_p}^(1/n) with omega = (1+L)^d, an upper estimate of the PF_q radius
    on groups with property RD. The inclusion constant disappears in the n-th root."""
    if not mu.group.rd_capable:
        raise DomainError(f"{mu.group} does not have property RD.")
    if q <= 1:
        raise DomainError(f"PF_q needs q > 1, got {q}.")
    d = rules.rd_degree if d is None else d
    omega_p = PolynomialWeight(d).power(utils.conjugate(q))
    diagnostics = {"q": q, "d": d}
    log_norms = _log_norm_sweep(mu, n_max, lambda dist: log_weighted_lq_norm(dist, q, omega_p, rules), rules,
                                diagnostics, workers)
    root, ratio = root_and_ratio(log_norms, "rd")
    value, method = headline(root, ratio, rules)
    lower_estimate = radius_pfq_lower(mu, q, n_max, rules, workers)
    lower = lower_estimate.lower
    methods = [m for m in lower_estimate.method if m in (RadiusMethod.ReturnProb, RadiusMethod.Folner)]
    diagnostics["lower_estimate"] = lower_estimate.value
    diagnostics["gap"] = min(value, 1.0) - lower_estimate.value
    diagnostics["unclamped"] = value
    if diagnostics["gap"] < -0.02:
        logger.warning(f"{mu.group}: RD upper estimate {value:.5f} below the lq estimate {lower_estimate.value:.5f}")
    return RadiusEstimate(value, lower, 1.0, [RadiusMethod.RdUpper, method] + methods, root, ratio, diagnostics)
