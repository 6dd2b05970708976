from enum import Enum
import logging
import math

import numpy as np

from avezlab.errors import ConfigError, DomainError
from avezlab.groups import Family, GroupDescriptor, GroupElement, sphere_keys
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import (Distribution, LatticeMeasure, Profile, RadialMeasure, SparseMeasure,
                              _lattice_convolve, _radial_convolve, convolve_functions, iter_powers)
from avezlab.sequence import AsymptoticSequence, IndexKind
import avezlab.utils as utils

logger = logging.getLogger("avezlab.weights")


class WeightKind(Enum):
    """Kinds of weights"""
    Constant = "const"
    Polynomial = "poly"
    Exponential = "exp"
    Table = "table"
    InverseSeries = "invseries"

    def __str__(self):
        return self.value


class Weight:
    """Positive weight on a group, evaluated in log space.

    Length based weights depend on an element only through its word length and can be
    applied to radial measures; the others need element keys.
    """
    kind: WeightKind
    length_based = True
    lower_bound = 1.0
    C: float | None = 1.0

    def log_of_lengths(self, lengths: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_of_key(self, group: GroupDescriptor, key, rules: LabRules = DEFAULT) -> float:
        return float(self.log_of_lengths(np.array([group.len_key(key, rules)], dtype=float))[0])

    def log_value(self, element: GroupElement) -> float:
        return self.log_of_key(element.group, element.key)

    def __call__(self, element: GroupElement) -> float:
        return math.exp(self.log_value(element))

    def power(self, p: float) -> "WeightPower":
        return WeightPower(self, p)

    @property
    def spec(self) -> str:
        return str(self.kind)

    def __repr__(self) -> str:
        return f"Weight({self.spec})"


class ConstantWeight(Weight):
    kind = WeightKind.Constant

    def __init__(self, c: float = 1.0):
        if c <= 0:
            raise ValueError(f"A constant weight has to be positive, got {c}.")
        self.c = float(c)
        self.lower_bound = self.c
        self.C = max(1.0, 1.0 / self.c)

    def log_of_lengths(self, lengths):
        return np.full(np.shape(lengths), math.log(self.c))

    @property
    def spec(self) -> str:
        return f"const:{self.c:g}"


class PolynomialWeight(Weight):
    """(1 + L)^d"""
    kind = WeightKind.Polynomial

    def __init__(self, d: float):
        if d <= 0:
            raise ValueError(f"A polynomial weight needs a positive degree, got {d}.")
        self.d = d

    def log_of_lengths(self, lengths):
        return self.d * np.log1p(np.asarray(lengths, dtype=float))

    @property
    def spec(self) -> str:
        return f"poly:d={self.d:g}"


class ExponentialWeight(Weight):
    """a^L, stored through its rate log a."""
    kind = WeightKind.Exponential

    def __init__(self, a: float | None = None, rate: float | None = None):
        if rate is None:
            if a is None or a <= 1:
                raise ValueError(f"An exponential weight needs a base above 1, got {a}.")
            rate = math.log(a)
        if rate <= 0:
            raise ValueError(f"An exponential weight needs a positive rate, got {rate}.")
        self.rate = float(rate)

    @property
    def base(self) -> float:
        return math.exp(self.rate)

    def log_of_lengths(self, lengths):
        return self.rate * np.asarray(lengths, dtype=float)

    @property
    def spec(self) -> str:
        return f"exp:rate={self.rate!r}"


class TableWeight(Weight):
    """Finite table of values, a fallback weight everywhere else."""
    kind = WeightKind.Table
    length_based = False
    C = None

    def __init__(self, table: dict, default: Weight | None = None):
        if any(v <= 0 for v in table.values()):
            raise ValueError("Table weights have to be positive.")
        self.log_table = {key: math.log(v) for key, v in table.items()}
        self.default = default or ConstantWeight(1.0)
        self.lower_bound = min([math.exp(v) for v in self.log_table.values()] + [self.default.lower_bound])

    def log_of_key(self, group, key, rules: LabRules = DEFAULT) -> float:
        if key in self.log_table:
            return self.log_table[key]
        return self.default.log_of_key(group, key, rules)


class InverseSeriesWeight(Weight):
    """The weight whose inverse is sum_{n<=N} mu^{*n} / n^exponent.

    Elements outside the accumulated support evaluate to +inf.
    """
    kind = WeightKind.InverseSeries
    C = None

    def __init__(self, inverse: Distribution, n_terms: int, exponent: float, tail_bound: float):
        self.inverse = inverse
        self.n_terms = n_terms
        self.exponent = exponent
        self.tail_bound = tail_bound
        self.length_based = isinstance(inverse, RadialMeasure)
        self.lower_bound = 1.0 / float(np.max(inverse.masses if self.length_based else _values(inverse)))

    def log_of_lengths(self, lengths):
        if not self.length_based:
            raise DomainError("This inverse-series weight is not radial.")
        lengths = np.asarray(lengths, dtype=np.int64)
        log_sizes = self.inverse.log_sphere_sizes(max(self.inverse.radius, int(lengths.max(initial=0))))
        padded = np.zeros(len(log_sizes))
        padded[:self.inverse.radius + 1] = self.inverse.masses
        with np.errstate(divide="ignore"):
            return log_sizes[lengths] - np.log(padded[lengths])

    def log_of_key(self, group, key, rules: LabRules = DEFAULT) -> float:
        return -self.inverse.log_element_mass(key)

    def inverse_l1_norm(self) -> float:
        return utils.zeta_partial(self.exponent, self.n_terms)

    @property
    def spec(self) -> str:
        return f"invseries:N={self.n_terms}"


class WeightPower(Weight):
    """omega_p = omega^(1/p)."""

    def __init__(self, base: Weight, p: float):
        if p < 1:
            raise ValueError(f"Weight powers need p >= 1, got {p}.")
        self.base = base
        self.p = float(p)
        self.kind = base.kind
        self.length_based = base.length_based
        self.lower_bound = base.lower_bound ** (1 / p)
        self.C = None if base.C is None else base.C ** (1 / p)

    def log_of_lengths(self, lengths):
        return self.base.log_of_lengths(lengths) / self.p

    def log_of_key(self, group, key, rules: LabRules = DEFAULT) -> float:
        return self.base.log_of_key(group, key, rules) / self.p

    @property
    def spec(self) -> str:
        return f"{self.base.spec}^(1/{self.p:g})"


def _values(measure: Distribution) -> np.ndarray:
    if isinstance(measure, LatticeMeasure):
        return measure.array[measure.array > 0]
    return np.fromiter(measure.atoms.values(), dtype=float)


def parse_weight(spec: str, mu: SparseMeasure | None = None, rules: LabRules = DEFAULT) -> Weight:
    """Weight from 'const:1', 'poly:d=2', 'exp:a=1.5', 'exp:a=e', 'exp:rate=2' or 'invseries:N=12'."""
    kind, _, args = spec.strip().partition(":")
    params = {}
    for part in filter(None, args.split(",")):
        name, eq, value = part.partition("=")
        if not eq:
            name, value = "", name
        params[name.strip()] = value.strip()

    def number(name, fallback=None):
        raw = params.get(name, params.get("", fallback))
        if raw is None:
            raise ConfigError(f"Weight spec {spec!r} misses {name}.")
        return math.e if raw == "e" else float(raw)

    try:
        match kind:
            case "const" | "one":
                return ConstantWeight(number("c", "1"))
            case "poly":
                return PolynomialWeight(number("d"))
            case "exp":
                if "rate" in params:
                    return ExponentialWeight(rate=number("rate"))
                return ExponentialWeight(a=number("a"))
            case "invseries":
                if mu is None:
                    raise ConfigError("The inverse-series weight needs a measure.")
                return build_inverse_series_weight(mu, int(number("N")), rules=rules)
            case _:
                raise ConfigError(f"Unknown weight kind {kind!r}.")
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"Invalid weight spec {spec!r}: {err}")


# --- weighted sums -----------------------------------------------------------------------


def weighted_profile(f: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> tuple[Profile, np.ndarray]:
    """Profile of f with the log weight of every class."""
    if omega.length_based:
        prof = f.profile(rules)
        return prof, omega.log_of_lengths(prof.lengths)
    if isinstance(f, RadialMeasure):
        f = f.to_sparse(rules)
    prof = f.profile(rules, with_keys=True) if isinstance(f, LatticeMeasure) else f.profile(rules)
    log_w = np.array([omega.log_of_key(f.group, key, rules) for key in prof.keys], dtype=float)
    return prof, log_w


def _offending(f: Distribution, prof: Profile, log_w: np.ndarray) -> str:
    index = int(np.argmax(np.isinf(log_w)))
    if prof.keys is not None:
        return f.group.key_str(prof.keys[index])
    return f"sphere of radius {int(prof.lengths[index])}"


def log_weighted_l1_norm(f: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> float:
    prof, log_w = weighted_profile(f, omega, rules)
    return utils.log_sum_exp(prof.log_mass + prof.log_mult + log_w)


def weighted_l1_norm(f: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> float:
    """sum_s |f(s)| omega(s)"""
    return math.exp(log_weighted_l1_norm(f, omega, rules))


def log_weighted_lq_norm(f: Distribution, q: float, omega: Weight, rules: LabRules = DEFAULT) -> float:
    if q <= 1:
        raise DomainError(f"Weighted lq norms need q > 1, got {q}.")
    prof, log_w = weighted_profile(f, omega, rules)
    return utils.log_sum_exp(q * (prof.log_mass + log_w) + prof.log_mult) / q


def weighted_lq_norm(f: Distribution, q: float, omega: Weight, rules: LabRules = DEFAULT) -> float:
    """(sum_s |f(s) omega(s)|^q)^(1/q)"""
    return math.exp(log_weighted_lq_norm(f, q, omega, rules))


def log_moment(mu: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> float:
    """sum_s mu(s) log omega(s); an infinite log weight on the support is a domain error."""
    prof, log_w = weighted_profile(mu, omega, rules)
    if np.any(np.isinf(log_w)):
        raise DomainError(f"Weight {omega.spec} is infinite at {_offending(mu, prof, log_w)} "
                          f"inside the support.")
    return utils.compensated_sum(prof.class_mass * log_w)


def weighted_shannon_entropy(mu: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> float:
    """-sum_s mu(s) log(mu(s) omega(s)), computed directly."""
    prof, log_w = weighted_profile(mu, omega, rules)
    if np.any(np.isinf(log_w)):
        raise DomainError(f"Weight {omega.spec} is infinite at {_offending(mu, prof, log_w)}.")
    return -utils.compensated_sum(prof.class_mass * (prof.log_mass + log_w))


def kl_form(mu: Distribution, omega: Weight, rules: LabRules = DEFAULT) -> float:
    """The weighted Shannon entropy as minus the relative entropy of mu to the measure 1/omega."""
    prof, log_w = weighted_profile(mu, omega, rules)
    log_reference = -log_w
    relative = utils.compensated_sum(prof.class_mass * (prof.log_mass - log_reference))
    return -relative


def gibbs_slack(mu: Distribution, omega: Weight, log_inverse_norm: float, rules: LabRules = DEFAULT) -> float:
    """sum mu log omega + log ||1/omega||_1 - H(mu), non-negative by Gibbs' inequality."""
    from avezlab.measures import shannon_entropy
    return log_moment(mu, omega, rules) + log_inverse_norm - shannon_entropy(mu, rules)


def l1_interpolation(f: Distribution, omega: Weight, u: float, p: float,
                     rules: LabRules = DEFAULT) -> tuple[float, float]:
    """(lhs, rhs) of ||f||_{1,w_p} <= ||f||_1^(1-t) ||f||_{1,w_u}^t with t = u/p, u <= p."""
    if not 1 <= u <= p:
        raise ValueError("Interpolation needs 1 <= u <= p.")
    theta = u / p
    one = log_weighted_l1_norm(f, ConstantWeight(1.0), rules)
    lhs = log_weighted_l1_norm(f, omega.power(p), rules)
    rhs = (1 - theta) * one + theta * log_weighted_l1_norm(f, omega.power(u), rules)
    return math.exp(lhs), math.exp(rhs)


def lq_interpolation(f: Distribution, omega: Weight, p0: float, p1: float,
                     rules: LabRules = DEFAULT) -> tuple[float, float]:
    """(lhs, rhs) of ||f||_{q1,w_p1} <= ||f||_1^(1-t) ||f||_{q0,w_p0}^t with t = p0/p1."""
    if not 1 < p0 <= p1:
        raise ValueError("Interpolation needs 1 < p0 <= p1.")
    theta = p0 / p1
    q0, q1 = utils.conjugate(p0), utils.conjugate(p1)
    one = log_weighted_l1_norm(f, ConstantWeight(1.0), rules)
    lhs = log_weighted_lq_norm(f, q1, omega.power(p1), rules)
    rhs = (1 - theta) * one + theta * log_weighted_lq_norm(f, q0, omega.power(p0), rules)
    return math.exp(lhs), math.exp(rhs)


def weighted_renyi_sequence(f: Distribution, omega: Weight, p_grid, rules: LabRules = DEFAULT) -> AsymptoticSequence:
    """p -> -p log ||f||_{q, w_p}, non-decreasing in p for probability measures."""
    seq = AsymptoticSequence(IndexKind.Exponent, name="weighted_renyi")
    for p in sorted(p_grid):
        seq.append(p, -p * log_weighted_lq_norm(f, utils.conjugate(p), omega.power(p), rules))
    return seq


# --- growth and submultiplicativity -----------------------------------------------------


def growth_rate_sequence(omega: Weight, desc: GroupDescriptor, r_max: int,
                         rules: LabRules = DEFAULT) -> AsymptoticSequence:
    """sup over the ball of radius n of omega^(1/n), n = 1..r_max; the fitted limit is stored as 'limit'."""
    seq = AsymptoticSequence(IndexKind.Step, name="growth_rate")
    diameter = desc.param // 2 if desc.family is Family.Cyclic else None
    running = -math.inf
    logs = []
    for n in range(0, r_max + 1):
        if diameter is None or n <= diameter:
            if omega.length_based:
                sphere_sup = float(omega.log_of_lengths(np.array([n], dtype=float))[0])
            else:
                sphere_sup = max(omega.log_of_key(desc, key, rules) for key in sphere_keys(desc, n, rules))
            running = max(running, sphere_sup)
        if n >= 1:
            logs.append(running)
            seq.append(n, math.exp(running / n))
    limit = utils.fit_growth_exponent(np.arange(1, r_max + 1), np.array(logs))
    seq.extrapolation["limit"] = math.exp(limit)
    return seq


def growth_rate(omega: Weight, desc: GroupDescriptor, r_max: int = 60, rules: LabRules = DEFAULT) -> float:
    return growth_rate_sequence(omega, desc, r_max, rules).extrapolation["limit"]


def check_submultiplicative(omega: Weight, desc: GroupDescriptor, count=1000, radius=8, seed=0,
                            rules: LabRules = DEFAULT) -> float:
    """Largest omega(st)/(omega(s)omega(t)) over seeded pairs; fails if above the declared constant."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        s, t = desc.random_key(rng, radius), desc.random_key(rng, radius)
        logs = (omega.log_of_key(desc, desc.mul_key(s, t), rules), omega.log_of_key(desc, s, rules),
                omega.log_of_key(desc, t, rules))
        if any(math.isinf(x) for x in logs):
            continue
        worst = max(worst, logs[0] - logs[1] - logs[2])
    estimate = math.exp(worst) if worst > -math.inf else 0.0
    if omega.C is not None and estimate > omega.C * (1 + 1e-12):
        raise DomainError(f"Weight {omega.spec} violates submultiplicativity: ratio {estimate} > C = {omega.C}.")
    return estimate


# --- the inverse-series weight ------------------------------------------------------------


def build_inverse_series_weight(mu: SparseMeasure, n_terms: int, exponent: float | None = None,
                                rules: LabRules = DEFAULT) -> InverseSeriesWeight:
    """The weight omega with omega^-1 = sum_{n=1..N} mu^{*n} / n^exponent."""
    exponent = rules.cube_exponent if exponent is None else exponent
    if n_terms < 1:
        raise ValueError("The series needs at least one term.")
    if exponent <= 1:
        raise ValueError("The exponent has to exceed 1 for a summable series.")
    inverse = None
    for n, power in iter_powers(mu, n_terms, rules):
        factor = float(n) ** (-exponent)
        match power:
            case RadialMeasure():
                masses = np.zeros(power.radius + 1)
                if inverse is not None:
                    masses[:inverse.radius + 1] += inverse.masses
                masses += factor * power.masses
                inverse = RadialMeasure(mu.group, masses, check=False)
            case LatticeMeasure():
                inverse = _add_lattice(inverse, power, factor)
            case _:
                atoms = {} if inverse is None else dict(inverse.atoms)
                for key, mass in power.items():
                    atoms[key] = atoms.get(key, 0.0) + factor * mass
                inverse = SparseMeasure(mu.group, atoms, check=False)
    tail = utils.zeta_tail(exponent, n_terms)
    logger.debug(f"inverse series weight of {mu.group}, N={n_terms}: tail bound {tail:.3g}")
    return InverseSeriesWeight(inverse, n_terms, exponent, tail)


def _add_lattice(acc: LatticeMeasure | None, power: LatticeMeasure, factor: float) -> LatticeMeasure:
    if acc is None:
        return LatticeMeasure(power.group, factor * power.array, power.origin)
    if power.circular:
        return LatticeMeasure(power.group, acc.array + factor * power.array, (0,))
    # powers grow around the same origin, so the older box sits inside the newer one
    array = factor * power.array
    window = tuple(slice(po - ao, po - ao + s) for po, ao, s in zip(power.origin, acc.origin, acc.array.shape))
    array[window] += acc.array
    return LatticeMeasure(power.group, array, power.origin)


class DominationReport:
    """max_s (g*g)(s)/g(s) for g = omega^-1 over the support of g."""

    def __init__(self, max_ratio: float, argmax: str, exponent: float, tail_bound: float):
        self.max_ratio = max_ratio
        self.argmax = argmax
        self.exponent = exponent
        self.tail_bound = tail_bound
        # the constant 8 * zeta(3) comes from (k+m)^3 <= 4(k^3+m^3)
        self.bound = 8 * utils.zeta_partial(3, 10 ** 6) if exponent == 3 else None

    @property
    def within(self) -> bool | None:
        return None if self.bound is None else self.max_ratio <= self.bound + 0.01

    def to_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "argmax": self.argmax, "bound": self.bound,
                "exponent": self.exponent, "tail_bound": self.tail_bound, "within": self.within}


def verify_convolution_domination(omega_bar: InverseSeriesWeight, rules: LabRules = DEFAULT) -> DominationReport:
    g = omega_bar.inverse
    match g:
        case RadialMeasure():
            k = g.group.param
            square = _radial_convolve(g.masses, g.masses, k)[:g.radius + 1]
            radii = np.nonzero(g.masses > 0)[0]
            ratios = square[radii] / g.masses[radii]
            index = int(np.argmax(ratios))
            return DominationReport(float(ratios[index]), f"sphere of radius {int(radii[index])}",
                                    omega_bar.exponent, omega_bar.tail_bound)
        case LatticeMeasure():
            square = _lattice_convolve(g.group, g, g, rules)
            prof = g.profile(rules, with_keys=True)
            ratios = np.array([math.exp(square.log_element_mass(key)) for key in prof.keys]) / np.exp(prof.log_mass)
            index = int(np.argmax(ratios))
            return DominationReport(float(ratios[index]), g.group.key_str(prof.keys[index]),
                                    omega_bar.exponent, omega_bar.tail_bound)
        case _:
            square = convolve_functions(g.group, g.atoms, g.atoms, rules)
            worst_key = max(g.atoms, key=lambda key: square.get(key, 0.0) / g.atoms[key])
            return DominationReport(square.get(worst_key, 0.0) / g.atoms[worst_key], g.group.key_str(worst_key),
                                    omega_bar.exponent, omega_bar.tail_bound)
