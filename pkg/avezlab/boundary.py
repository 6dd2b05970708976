from fractions import Fraction
from functools import lru_cache
import logging
import math
from typing import Iterator, NamedTuple

import numpy as np

from avezlab.errors import DomainError, ResourceError
from avezlab.groups import Family, GroupDescriptor, sphere_keys
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import SparseMeasure, iter_powers, length_moment
from avezlab.sequence import AsymptoticSequence, EstimateReport, IndexKind, clamp
import avezlab.utils as utils

logger = logging.getLogger("avezlab.boundary")


class QPower(NamedTuple):
    """coeff * q^exp with q = 2k-1 kept implicit."""
    exp: int
    coeff: Fraction = Fraction(1)

    @staticmethod
    def from_fraction(x: Fraction, q: int) -> "QPower":
        if x <= 0:
            raise ValueError(f"Only positive values have a q-power form, got {x}.")
        exp = 0
        while x.numerator % q == 0:
            x /= q
            exp += 1
        while x.denominator % q == 0:
            x *= q
            exp -= 1
        return QPower(exp, x)

    def to_fraction(self, q: int) -> Fraction:
        return self.coeff * Fraction(q) ** self.exp

    def log(self, q: int) -> float:
        return math.log(self.coeff) + self.exp * math.log(q)

    def root(self, q: int, a: float) -> float:
        """value ** a, evaluated in log space."""
        return math.exp(a * self.log(q))

    def __mul__(self, other: "QPower") -> "QPower":
        return QPower(self.exp + other.exp, self.coeff * other.coeff)


class CylinderMeasure:
    """The uniform harmonic measure on the boundary of F_k, nu(C_w) = 1/(2k q^(|w|-1)), up to depth m."""

    def __init__(self, k: int, depth: int):
        if k < 2:
            raise ValueError(f"The boundary needs rank k >= 2, got {k}.")
        if depth < 1:
            raise ValueError(f"Cylinder depth has to be positive, got {depth}.")
        self.k = k
        self.depth = depth
        self.q = 2 * k - 1
        self.group = GroupDescriptor(Family.Free, k)

    def __repr__(self) -> str:
        return f"CylinderMeasure(k={self.k}, depth={self.depth})"

    def mass(self, word: tuple) -> Fraction:
        if not word:
            return Fraction(1)
        return Fraction(1, 2 * self.k * self.q ** (len(word) - 1))

    def words(self, m: int | None = None, rules: LabRules = DEFAULT) -> list[tuple]:
        """All reduced words of length m, the cylinders at depth m."""
        return sphere_keys(self.group, self.depth if m is None else m, rules)

    def children(self, word: tuple) -> Iterator[tuple]:
        for letter in range(-self.k, self.k + 1):
            if letter and (not word or word[-1] != -letter):
                yield word + (letter,)

    def total(self, m: int | None = None) -> Fraction:
        return sum((self.mass(w) for w in self.words(m)), Fraction(0))

    def refinement_defect(self, word: tuple) -> Fraction:
        """nu(C_w) minus the mass of its children."""
        return self.mass(word) - sum((self.mass(c) for c in self.children(word)), Fraction(0))


def harmonic_measure(k: int, m: int, rules: LabRules = DEFAULT) -> CylinderMeasure:
    if k >= 2 and m > rules.depth_cap(k):
        raise ResourceError(f"Depth {m} exceeds the cylinder cap for k={k} (at most {rules.depth_cap(k)}).")
    return CylinderMeasure(k, m)


def image_mass(nu: CylinderMeasure, s: tuple, word: tuple) -> Fraction:
    """nu(s C_w), exact.

    If s cancels less than all of w the image is the cylinder of the reduced word;
    otherwise C_w is refined by one letter until it does.
    """
    if not word:
        return Fraction(1)
    t, limit = 0, min(len(s), len(word))
    while t < limit and s[-1 - t] == -word[t]:
        t += 1
    if t < len(word):
        return nu.mass(s[:len(s) - t] + word[t:])
    return sum((image_mass(nu, s, child) for child in nu.children(word)), Fraction(0))


def cylinder_ratio(nu: CylinderMeasure, s: tuple, word: tuple) -> Fraction:
    """nu(s C_w)/nu(C_w), the value of the cocycle on C_w when |w| >= |s|."""
    return image_mass(nu, s, word) / nu.mass(word)


class RNCocycle:
    """rho(s, x) = d(s^-1 nu)/d nu (x) on the cylinders of depth m, as exact q-powers."""

    def __init__(self, nu: CylinderMeasure, s: tuple, depth: int, values: dict[tuple, QPower]):
        self.nu = nu
        self.s = s
        self.depth = depth
        self.values = values

    def __repr__(self) -> str:
        return f"RNCocycle({self.nu.group.key_str(self.s)}, depth {self.depth})"

    def value(self, word: tuple) -> QPower:
        """The cocycle on C_w for |w| >= depth, constant on refinements."""
        if len(word) < self.depth:
            raise DomainError(f"The cocycle is only constant on cylinders of depth >= {self.depth}.")
        return self.values[word[:self.depth]]

    def classes(self) -> dict[QPower, Fraction]:
        """nu-mass of each value."""
        out: dict[QPower, Fraction] = {}
        for word, value in self.values.items():
            out[value] = out.get(value, Fraction(0)) + self.nu.mass(word)
        return out

    def integral(self) -> Fraction:
        return sum((mass * value.to_fraction(self.nu.q) for value, mass in self.classes().items()), Fraction(0))

    def moment(self, a: float) -> float:
        """The integral of rho^a."""
        return utils.compensated_sum(float(mass) * value.root(self.nu.q, a) for value, mass in self.classes().items())


def _check_word(nu: CylinderMeasure, s) -> tuple:
    if isinstance(s, str):
        return nu.group.parse_key(s)
    return nu.group.canonical(s)


def rn_derivative(s, nu: CylinderMeasure, m: int | None = None, rules: LabRules = DEFAULT) -> RNCocycle:
    s = _check_word(nu, s)
    m = max(nu.depth, len(s), 1) if m is None else m
    if m < max(len(s), 1):
        raise DomainError(f"rho({nu.group.key_str(s)}, .) is not constant on cylinders of depth {m} < {len(s)}.")
    values = {w: QPower.from_fraction(cylinder_ratio(nu, s, w), nu.q) for w in nu.words(m, rules)}
    return RNCocycle(nu, s, m, values)


def stationarity_defect(mu: SparseMeasure, nu: "CylinderMeasure | FiniteStationarySpace", m: int | None = None,
                        rules: LabRules = DEFAULT) -> Fraction:
    """max over depth-m cylinders of |(mu * nu)(C_w) - nu(C_w)|, exact."""
    if isinstance(nu, FiniteStationarySpace):
        return nu.stationarity_defect(mu)
    _check_group(mu, nu)
    atoms = _exact_atoms(mu)
    worst = Fraction(0)
    for w in nu.words(m, rules):
        pushed = sum((mass * image_mass(nu, mu.group.inv_key(s), w) for s, mass in atoms.items()), Fraction(0))
        worst = max(worst, abs(pushed - nu.mass(w)))
    return worst


def cocycle_defect(s, t, nu: CylinderMeasure, m: int | None = None, words: list[tuple] | None = None,
                   rules: LabRules = DEFAULT) -> Fraction:
    """max |rho(st, C_w) - rho(s, t C_w) rho(t, C_w)| over the given or all depth-m cylinders, exact."""
    s, t = _check_word(nu, s), _check_word(nu, t)
    m = len(s) + len(t) + 1 if m is None else m
    if m < len(s) + len(t) + 1:
        raise DomainError(f"The cocycle identity needs depth > |s| + |t| = {len(s) + len(t)}.")
    st = nu.group.mul_key(s, t)
    worst = Fraction(0)
    for w in (nu.words(m, rules) if words is None else words):
        image = nu.group.mul_key(t, w)
        lhs = cylinder_ratio(nu, st, w)
        rhs = cylinder_ratio(nu, s, image) * cylinder_ratio(nu, t, w)
        worst = max(worst, abs(lhs - rhs))
    return worst


def harish_chandra_xi(s, nu: CylinderMeasure, m: int | None = None, rules: LabRules = DEFAULT) -> float:
    """Xi(s), the integral of rho(s, .)^(1/2), from the exact value classes."""
    s = _check_word(nu, s)
    return rn_derivative(s, nu, max(len(s), 1) if m is None else m, rules).moment(0.5)


@lru_cache(maxsize=None)
def radial_classes(k: int, r: int) -> tuple[tuple[Fraction, int], ...]:
    """(mass, e) pairs with rho = q^e for any |s| = r; e = 2j - r where j letters of s cancel."""
    q = 2 * k - 1
    if r == 0:
        return ((Fraction(1), 0),)
    classes = [(1 - Fraction(1, 2 * k), -r)]
    for j in range(1, r):
        classes.append((Fraction(q - 1, 2 * k * q ** j), 2 * j - r))
    classes.append((Fraction(1, 2 * k * q ** (r - 1)), r))
    return tuple(classes)


def radial_log_moment_table(k: int, r_max: int, a: float) -> np.ndarray:
    """log of the integral of rho(s, .)^a for |s| = 0..r_max, in log space."""
    q = 2 * k - 1
    log_q = math.log(q)
    table = np.zeros(r_max + 1)
    for r in range(1, r_max + 1):
        j = np.arange(0, r + 1, dtype=float)
        log_mass = math.log(q - 1) - math.log(2 * k) - j * log_q
        log_mass[0] = math.log1p(-1.0 / (2 * k))
        log_mass[r] = -math.log(2 * k) - (r - 1) * log_q
        table[r] = utils.log_sum_exp(log_mass + a * (2 * j - r) * log_q)
    return table


def xi_radial_table(k: int, r_max: int) -> np.ndarray:
    """log Xi(r) for r = 0..r_max."""
    return radial_log_moment_table(k, r_max, 0.5)


def _check_group(mu: SparseMeasure, nu: CylinderMeasure) -> None:
    if mu.group != nu.group:
        raise DomainError(f"The measure lives on {mu.group}, the boundary belongs to {nu.group}.")


def _exact_atoms(mu: SparseMeasure) -> dict:
    if mu.exact is not None:
        return mu.exact
    return {key: Fraction(mass) for key, mass in mu.items()}


def furstenberg_log_q(mu: SparseMeasure, nu: CylinderMeasure, m: int | None = None,
                      rules: LabRules = DEFAULT) -> Fraction:
    """The Furstenberg entropy as an exact multiple of log q."""
    _check_group(mu, nu)
    total = Fraction(0)
    for s, mass in _exact_atoms(mu).items():
        depth = max(len(s), 1) if m is None else m
        for value, share in rn_derivative(s, nu, depth, rules).classes().items():
            if value.coeff != 1:
                raise DomainError(f"rho({nu.group.key_str(s)}, .) is not a pure power of q.")
            total -= mass * share * value.exp
    return total


def furstenberg_entropy(mu: SparseMeasure, nu: "CylinderMeasure | FiniteStationarySpace", m: int | None = None,
                        rules: LabRules = DEFAULT) -> float:
    """-sum_s mu(s) int log rho(s, x) dnu(x)."""
    if isinstance(nu, FiniteStationarySpace):
        return nu.furstenberg_entropy(mu)
    return float(furstenberg_log_q(mu, nu, m, rules)) * math.log(nu.q)


def koopman_pairing(mu: SparseMeasure, nu: CylinderMeasure, p: float, m: int | None = None,
                    rules: LabRules = DEFAULT) -> float:
    """<pi_q(mu) 1, 1> = sum_s mu(s) int rho(s, x)^(1/p) dnu(x), q conjugate to p."""
    if p < 2:
        raise DomainError(f"The Koopman pairing is taken for p >= 2, got {p}.")
    _check_group(mu, nu)
    if m is not None:
        return utils.compensated_sum(mass * rn_derivative(s, nu, max(m, len(s), 1), rules).moment(1 / p)
                                     for s, mass in mu.items())
    # the value classes of rho(s, .) only depend on |s|
    log_q = math.log(nu.q)
    by_radius: dict[int, float] = {}
    for s, mass in mu.items():
        by_radius[len(s)] = by_radius.get(len(s), 0.0) + mass
    return utils.compensated_sum(mass * float(share) * math.exp(e * log_q / p)
                                 for r, mass in by_radius.items()
                                 for share, e in radial_classes(nu.k, r))


def koopman_limit(mu: SparseMeasure, nu: CylinderMeasure, p_grid=None, rules: LabRules = DEFAULT) -> EstimateReport:
    """-p log <pi_q(mu) 1, 1>, non-decreasing in p and bounded by the Furstenberg entropy."""
    p_grid = sorted(rules.p_grid_closed_form if p_grid is None else p_grid)
    values = AsymptoticSequence(IndexKind.Exponent, name="koopman")
    for p in p_grid:
        values.append(p, -p * math.log(koopman_pairing(mu, nu, p, rules=rules)))
    c0, _, residual = values.fit_inverse_p()
    h_x = furstenberg_entropy(mu, nu, rules=rules)
    estimate = clamp(c0, values.last, max(h_x, values.last))
    report = EstimateReport("koopman_entropy", estimate, values.last, max(h_x, values.last),
                            ["koopman-pairing", "inverse-p-fit"], {"koopman": values},
                            params={"k": nu.k, "p_grid": p_grid}, tolerances={"fit_residual": residual},
                            diagnostics={"furstenberg": h_x, "error": abs(c0 - h_x)})
    if not values.is_monotone(increasing=True, slack=1e-12):
        report.flag("-p log <pi_q(mu)1,1> is not non-decreasing")
    return report


def xi_entropy_limit(mu: SparseMeasure, nu: CylinderMeasure, n_max: int = 2000, rules: LabRules = DEFAULT,
                     progress=False) -> EstimateReport:
    """-(2/n) sum_s mu^{*n}(s) log Xi(s); Xi is radial, so only the length profile of mu^{*n} is used."""
    _check_group(mu, nu)
    reach = n_max * mu.max_length(rules)
    table = xi_radial_table(nu.k, max(reach, 1))
    sums = AsymptoticSequence(IndexKind.Step, name="xi_sum")
    for n, power in iter_powers(mu, n_max, rules):
        sums.append(n, -2 * length_moment(power, lambda r: table[r.astype(np.int64)], rules))
    per_n = AsymptoticSequence(IndexKind.Step, [(n, v / n) for n, v in sums], name="xi_per_n")
    if len(sums) >= rules.fit_min_terms:
        estimate, method = sums.fit_log_linear(), "log-linear-fit"
    else:
        estimate, method = per_n.last, "per-n"
    report = EstimateReport("xi_entropy", max(estimate, 0.0), 0.0, None, ["radial-xi", method],
                            {"per_n": per_n, "sums": sums}, params={"k": nu.k, "n_max": n_max},
                            diagnostics={"per_n_last": per_n.last})
    logger.info(f"F_{nu.k}: Xi entropy limit {report.estimate:.6f} at n={n_max}")
    return report


class KoopmanTruncation:
    """pi_q(mu) compressed to functions constant on the depth-m cylinders.

    entry (w, u) = sum_s mu(s) sum over v extending w by |s| letters with s^-1 C_v inside C_u
    of nu(C_v)/nu(C_w) rho(s^-1, C_v)^(1/q). Stored as coordinate lists.
    """

    def __init__(self, mu: SparseMeasure, nu: CylinderMeasure, q: float, m: int, rules: LabRules = DEFAULT):
        _check_group(mu, nu)
        if q <= 1:
            raise DomainError(f"The Koopman representation needs q > 1, got {q}.")
        self.q = q
        self.depth = m
        words = nu.words(m, rules)
        index = {w: i for i, w in enumerate(words)}
        self.size = len(words)
        self.weights = np.array([float(nu.mass(w)) for w in words])
        expected = self.size * sum(nu.q ** len(s) for s in mu.atoms)
        if expected > rules.koopman_entry_cap:
            raise ResourceError(f"The depth {m} truncation needs {expected} entries, "
                                f"above the cap {rules.koopman_entry_cap}.")
        rows, cols, values = [], [], []
        group = nu.group
        for s, mass in mu.items():
            s_inv = group.inv_key(s)
            for w in words:
                extensions = [w]
                for _ in range(len(s)):
                    extensions = [c for v in extensions for c in nu.children(v)]
                for v in extensions:
                    target = group.mul_key(s_inv, v)[:m]
                    share = float(nu.mass(v) / nu.mass(w))
                    rho = QPower.from_fraction(cylinder_ratio(nu, s_inv, v), nu.q)
                    rows.append(index[w])
                    cols.append(index[target])
                    values.append(mass * share * rho.root(nu.q, 1 / q))
        self.rows = np.array(rows, dtype=np.int64)
        self.cols = np.array(cols, dtype=np.int64)
        self.values = np.array(values)
        logger.debug(f"Koopman truncation at depth {m}: {self.size} cylinders, {len(values)} entries")

    def apply(self, f: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=self.values * f[self.cols], minlength=self.size)

    def norm(self, f: np.ndarray) -> float:
        """Norm in l^q of the cylinder weights."""
        return float(np.sum(self.weights * np.abs(f) ** self.q) ** (1 / self.q))

    def pairing_with_constant(self) -> float:
        return float(np.sum(self.weights * self.apply(np.ones(self.size))))


def koopman_norm_lower(mu: SparseMeasure, nu: CylinderMeasure, q: float = 2.0, m: int = 1, iters: int = 200,
                       tol: float = 1e-13, rules: LabRules = DEFAULT) -> float:
    """Largest ratio ||T f|| / ||f|| met by power iteration from the constant function.

    The compression is a contraction of pi_q(mu), so every ratio bounds its norm from below.
    """
    truncation = KoopmanTruncation(mu, nu, q, m, rules)
    f = np.ones(truncation.size)
    best, previous = 0.0, math.inf
    for it in range(iters):
        image = truncation.apply(f)
        ratio = truncation.norm(image) / truncation.norm(f)
        best = max(best, ratio)
        if ratio == 0 or abs(ratio - previous) <= tol * ratio:
            break
        previous = ratio
        f = image / truncation.norm(image)
    logger.info(f"Koopman norm lower bound {best:.8f} at depth {m} after {it + 1} iterations")
    return best


class FiniteStationarySpace:
    """A cyclic group acting on itself by translation with a probability vector xi."""

    def __init__(self, group: GroupDescriptor, masses=None):
        if group.family is not Family.Cyclic:
            raise DomainError("Finite stationary spaces are built on cyclic groups.")
        n = group.order
        masses = [Fraction(1, n)] * n if masses is None else [Fraction(m) for m in masses]
        if len(masses) != n or any(m <= 0 for m in masses) or sum(masses) != 1:
            raise ValueError("xi has to be a positive probability vector on the group.")
        self.group = group
        self.masses = masses

    def rn(self, s: int, x: int) -> Fraction:
        """rho(s, x) = xi(s x)/xi(x)."""
        return self.masses[self.group.mul_key(s, x)] / self.masses[x]

    def stationarity_defect(self, mu: SparseMeasure) -> Fraction:
        atoms = _exact_atoms(mu)
        worst = Fraction(0)
        for x in range(self.group.order):
            pushed = sum((mass * self.masses[self.group.mul_key(self.group.inv_key(s), x)]
                          for s, mass in atoms.items()), Fraction(0))
            worst = max(worst, abs(pushed - self.masses[x]))
        return worst

    def furstenberg_entropy(self, mu: SparseMeasure) -> float:
        return -utils.compensated_sum(mass * float(self.masses[x]) * math.log(self.rn(s, x))
                                      for s, mass in mu.items() for x in range(self.group.order))
