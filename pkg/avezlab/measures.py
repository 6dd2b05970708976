from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from fractions import Fraction
import json
import logging
import math
from typing import Callable, Iterator, NamedTuple

import numpy as np

from avezlab.errors import ConfigError, DomainError, ResourceError
from avezlab.groups import Family, GroupDescriptor, GroupElement, sphere_keys, sphere_size
from avezlab.labrules import DEFAULT, LabRules
import avezlab.utils as utils

logger = logging.getLogger("avezlab.measures")

MASS_TOLERANCE = 1e-12


class Profile(NamedTuple):
    """Atoms grouped into classes of equal element mass.

    log_mass is the log of the mass of one element of the class, log_mult the log
    of the class size. keys is only present when every class is a single atom, lengths
    is None for mass-only profiles.
    """
    log_mass: np.ndarray
    log_mult: np.ndarray
    lengths: np.ndarray | None
    keys: list | None

    @property
    def class_mass(self) -> np.ndarray:
        return np.exp(self.log_mass + self.log_mult)


class SparseMeasure:
    """Finitely supported probability measure, atoms keyed by canonical element keys.

    An exact rational shadow is carried along for small supports built from rational data.
    """

    def __init__(self, group: GroupDescriptor, atoms: dict, normalize=False, exact: dict | None = None,
                 check=True):
        self.group = group
        cleaned = {}
        for key, mass in atoms.items():
            mass = float(mass)
            if mass < 0 or math.isnan(mass):
                raise ValueError(f"Invalid mass {mass} at {group.key_str(key)}.")
            if mass > 0:
                cleaned[key] = mass
        if not cleaned:
            raise ValueError("A probability measure needs at least one atom.")
        self.total = utils.compensated_sum(cleaned.values())
        if normalize:
            cleaned = {key: mass / self.total for key, mass in cleaned.items()}
            if exact is not None:
                exact_total = sum(exact.values(), Fraction(0))
                exact = {key: mass / exact_total for key, mass in exact.items()}
            self.total = utils.compensated_sum(cleaned.values())
        elif check and abs(self.total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"Masses sum to {self.total!r}, not 1.")
        self.atoms: dict = cleaned
        self.exact: dict | None = exact

    # --- constructors ---------------------------------------------------------------

    @staticmethod
    def point_mass(group: GroupDescriptor, key=None) -> "SparseMeasure":
        key = group.identity_key() if key is None else group.canonical(key)
        return SparseMeasure(group, {key: 1.0}, exact={key: Fraction(1)})

    @staticmethod
    def uniform(group: GroupDescriptor, keys) -> "SparseMeasure":
        keys = list(dict.fromkeys(group.canonical(k) for k in keys))
        share = Fraction(1, len(keys))
        return SparseMeasure(group, {k: float(share) for k in keys}, exact={k: share for k in keys})

    @staticmethod
    def srw(group: GroupDescriptor) -> "SparseMeasure":
        """Uniform on the standard symmetric generators."""
        gens = group.generator_keys()
        if not gens:
            return SparseMeasure.point_mass(group)
        return SparseMeasure.uniform(group, gens)

    @staticmethod
    def lazy_srw(group: GroupDescriptor, hold: float | Fraction = Fraction(1, 2)) -> "SparseMeasure":
        hold = Fraction(hold).limit_denominator(10 ** 12) if not isinstance(hold, Fraction) else hold
        if not 0 <= hold < 1:
            raise ValueError(f"Hold probability {hold} outside [0, 1).")
        gens = group.generator_keys()
        exact = {k: (1 - hold) / len(gens) for k in gens} if gens else {}
        exact[group.identity_key()] = exact.get(group.identity_key(), Fraction(0)) + (hold if gens else 1)
        exact = {k: m for k, m in exact.items() if m > 0}
        return SparseMeasure(group, {k: float(m) for k, m in exact.items()}, exact=exact)

    @staticmethod
    def switch_walk_switch(group: GroupDescriptor) -> "SparseMeasure":
        """Lamplighter walk: randomize the lamp, move the cursor, randomize the lamp again."""
        if group.family is not Family.Lamplighter:
            raise DomainError("The switch-walk-switch preset needs a lamplighter group.")
        gens = group.generator_keys()
        switch, moves = gens[-1], gens[:-1]
        e = group.identity_key()
        counts: dict = {}
        for first in (e, switch):
            for move in moves:
                for last in (e, switch):
                    key = group.mul_key(group.mul_key(first, move), last)
                    counts[key] = counts.get(key, 0) + 1
        total = sum(counts.values())
        exact = {k: Fraction(c, total) for k, c in counts.items()}
        return SparseMeasure(group, {k: float(m) for k, m in exact.items()}, exact=exact)

    @staticmethod
    def from_spec(spec: "str | dict", group: GroupDescriptor | None = None) -> "SparseMeasure":
        """Measure from 'preset:srw', 'preset:lazy-srw:0.5', a JSON string/dict or a JSON file path."""
        if isinstance(spec, str):
            spec = spec.strip()
            if spec.startswith("preset:"):
                name, _, arg = spec[len("preset:"):].partition(":")
                spec = {"preset": name}
                if arg:
                    spec["hold"] = arg
            elif spec.startswith("{"):
                spec = json.loads(spec)
            else:
                try:
                    with open(spec, "r") as f:
                        spec = json.load(f)
                except OSError as err:
                    raise ConfigError(f"Cannot read measure spec {spec!r}: {err}")
        if not isinstance(spec, dict):
            raise ConfigError(f"Invalid measure spec {spec!r}.")
        if "group" in spec:
            group = GroupDescriptor.from_spec(spec["group"])
        if group is None:
            raise ConfigError("The measure spec names no group.")
        try:
            if "preset" in spec:
                match spec["preset"]:
                    case "srw":
                        return SparseMeasure.srw(group)
                    case "lazy-srw":
                        return SparseMeasure.lazy_srw(group, Fraction(str(spec.get("hold", "1/2"))))
                    case "sws":
                        return SparseMeasure.switch_walk_switch(group)
                    case "delta" | "point":
                        return SparseMeasure.point_mass(group)
                    case other:
                        raise ConfigError(f"Unknown preset {other!r}.")
            exact = {}
            for atom in spec["atoms"]:
                key = group.parse_key(str(atom["elem"]))
                exact[key] = exact.get(key, Fraction(0)) + Fraction(str(atom["mass"]))
            return SparseMeasure(group, {k: float(m) for k, m in exact.items()}, exact=exact,
                                 normalize=bool(spec.get("normalize", False)))
        except (KeyError, ValueError, ZeroDivisionError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"Invalid measure spec: {err}")

    def to_spec(self) -> dict:
        return {"group": self.group.to_spec(),
                "atoms": [{"elem": self.group.key_str(k), "mass": str(self.exact[k]) if self.exact else m}
                          for k, m in self.atoms.items()]}

    # --- queries -------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"SparseMeasure({self.group}, {len(self)} atoms)"

    def items(self):
        return self.atoms.items()

    def support(self) -> list[GroupElement]:
        return [GroupElement(self.group, k, canonical=True) for k in self.atoms]

    def mass(self, element: "GroupElement | str") -> float:
        if isinstance(element, str):
            key = self.group.parse_key(element)
        elif isinstance(element, GroupElement):
            key = element.key
        else:
            key = self.group.canonical(element)
        return self.atoms.get(key, 0.0)

    def mass_at_identity(self) -> float:
        return self.atoms.get(self.group.identity_key(), 0.0)

    def log_element_mass(self, key) -> float:
        mass = self.atoms.get(key, 0.0)
        return math.log(mass) if mass > 0 else -math.inf

    def is_symmetric(self, tol=1e-15) -> bool:
        return all(abs(m - self.atoms.get(self.group.inv_key(k), 0.0)) <= tol for k, m in self.atoms.items())

    def max_length(self, rules: LabRules = DEFAULT) -> int:
        return max(self.group.len_key(k, rules) for k in self.atoms)

    def is_radial(self, tol=1e-12) -> bool:
        if self.group.family is not Family.Free:
            return False
        by_radius: dict[int, list[float]] = {}
        for key, mass in self.atoms.items():
            by_radius.setdefault(len(key), []).append(mass)
        for r, masses in by_radius.items():
            if len(masses) != sphere_size(self.group, r):
                return False
            if max(masses) - min(masses) > tol * max(masses):
                return False
        return True

    def profile(self, rules: LabRules = DEFAULT) -> Profile:
        keys = list(self.atoms)
        masses = np.fromiter(self.atoms.values(), dtype=float, count=len(keys))
        lengths = np.fromiter((self.group.len_key(k, rules) for k in keys), dtype=np.int64, count=len(keys))
        return Profile(np.log(masses), np.zeros(len(keys)), lengths, keys)

    def to_sparse(self, rules: LabRules = DEFAULT) -> "SparseMeasure":
        return self


class RadialMeasure:
    """Measure on a free group that is constant on spheres; masses[r] is the mass of the whole sphere."""

    def __init__(self, group: GroupDescriptor, masses, check=True):
        if group.family is not Family.Free:
            raise DomainError(f"Radial measures live on free groups, not on {group}.")
        self.group = group
        masses = np.trim_zeros(np.asarray(masses, dtype=float), "b")
        if masses.size == 0 or np.any(masses < 0):
            raise ValueError("Sphere masses have to be non-negative and not all zero.")
        self.masses = masses
        self.total = utils.compensated_sum(masses)
        if check and abs(self.total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"Sphere masses sum to {self.total!r}, not 1.")

    def __repr__(self) -> str:
        return f"RadialMeasure({self.group}, radius {self.radius})"

    @property
    def radius(self) -> int:
        return len(self.masses) - 1

    @staticmethod
    def from_sparse(measure: SparseMeasure) -> "RadialMeasure":
        if not measure.is_radial():
            raise DomainError("Measure is not constant on spheres.")
        masses = np.zeros(max(len(k) for k in measure.atoms) + 1)
        for key, mass in measure.atoms.items():
            masses[len(key)] += mass
        return RadialMeasure(measure.group, masses)

    def log_sphere_sizes(self, radius: int | None = None) -> np.ndarray:
        k = self.group.param
        r = np.arange((self.radius if radius is None else radius) + 1, dtype=float)
        sizes = math.log(2 * k) + (r - 1) * math.log(2 * k - 1)
        sizes[0] = 0.0
        return sizes

    def mass_at_identity(self) -> float:
        return float(self.masses[0])

    def log_element_mass(self, key) -> float:
        r = len(key)
        if r > self.radius or self.masses[r] <= 0:
            return -math.inf
        return math.log(self.masses[r]) - float(self.log_sphere_sizes(r)[r])

    def is_symmetric(self, tol=0.0) -> bool:
        return True

    def profile(self, rules: LabRules = DEFAULT) -> Profile:
        radii = np.nonzero(self.masses > 0)[0]
        log_sizes = self.log_sphere_sizes()[radii]
        return Profile(np.log(self.masses[radii]) - log_sizes, log_sizes, radii, None)

    def to_sparse(self, rules: LabRules = DEFAULT) -> SparseMeasure:
        count = sum(sphere_size(self.group, int(r)) for r in np.nonzero(self.masses)[0])
        if count > rules.element_cap:
            raise ResourceError(f"Expanding radius {self.radius} of {self.group} needs {count} atoms.")
        atoms = {}
        for r in np.nonzero(self.masses)[0]:
            share = self.masses[r] / sphere_size(self.group, int(r))
            for key in sphere_keys(self.group, int(r), rules):
                atoms[key] = share
        return SparseMeasure(self.group, atoms, check=False)


class LatticeMeasure:
    """Dense array representation on free abelian (offset box) and cyclic (circular) groups."""

    def __init__(self, group: GroupDescriptor, array: np.ndarray, origin: tuple[int, ...]):
        if group.family not in (Family.Abelian, Family.Cyclic):
            raise DomainError(f"Lattice measures live on abelian or cyclic groups, not on {group}.")
        self.group = group
        self.array = array
        self.origin = tuple(origin)
        self.total = utils.compensated_sum(array)

    def __repr__(self) -> str:
        return f"LatticeMeasure({self.group}, shape {self.array.shape})"

    @property
    def circular(self) -> bool:
        return self.group.family is Family.Cyclic

    @staticmethod
    def from_sparse(measure: SparseMeasure) -> "LatticeMeasure":
        group = measure.group
        if group.family is Family.Cyclic:
            array = np.zeros(group.param)
            for key, mass in measure.items():
                array[key] += mass
            return LatticeMeasure(group, array, (0,))
        points = np.array(list(measure.atoms), dtype=np.int64).reshape(len(measure), group.param)
        low, high = points.min(axis=0), points.max(axis=0)
        array = np.zeros(tuple(high - low + 1))
        for point, mass in zip(points, measure.atoms.values()):
            array[tuple(point - low)] += mass
        return LatticeMeasure(group, array, tuple(-low))

    def _index(self, key) -> tuple | None:
        if self.circular:
            return (key,)
        index = tuple(x + o for x, o in zip(key, self.origin))
        if any(i < 0 or i >= s for i, s in zip(index, self.array.shape)):
            return None
        return index

    def mass_at_identity(self) -> float:
        return float(self.array[self._index(self.group.identity_key())])

    def log_element_mass(self, key) -> float:
        index = self._index(key)
        mass = 0.0 if index is None else float(self.array[index])
        return math.log(mass) if mass > 0 else -math.inf

    def _lengths(self, index: tuple[np.ndarray, ...]) -> np.ndarray:
        if self.circular:
            n = self.group.param
            return np.minimum(index[0], n - index[0])
        return sum(np.abs(ix - o) for ix, o in zip(index, self.origin))

    def _keys(self, index: tuple[np.ndarray, ...]) -> list:
        if self.circular:
            return [int(x) for x in index[0]]
        coords = np.stack([ix - o for ix, o in zip(index, self.origin)], axis=1)
        return [tuple(int(x) for x in row) for row in coords]

    def profile(self, rules: LabRules = DEFAULT, with_keys=False) -> Profile:
        index = np.nonzero(self.array > 0)
        masses = self.array[index]
        keys = self._keys(index) if with_keys else None
        return Profile(np.log(masses), np.zeros(len(masses)), self._lengths(index).astype(np.int64), keys)

    def is_symmetric(self, tol=1e-15) -> bool:
        return self.to_sparse().is_symmetric(tol)

    def to_sparse(self, rules: LabRules = DEFAULT) -> SparseMeasure:
        index = np.nonzero(self.array > 0)
        if len(index[0]) > rules.element_cap:
            raise ResourceError(f"{len(index[0])} lattice atoms exceed the element cap.")
        return SparseMeasure(self.group, dict(zip(self._keys(index), self.array[index].tolist())), check=False)


Distribution = SparseMeasure | RadialMeasure | LatticeMeasure


class PowerPolicy(Enum):
    """How convolution powers are computed"""
    Exact = "exact"     # generic sparse products
    Radial = "radial"   # sphere-mass recursion, radial measures on free groups only
    Cap = "cap"         # fastest exact representation available, bounded by the element cap

    def __str__(self):
        return self.value


# --- convolution ---------------------------------------------------------------------


def _convolve_shard(group: GroupDescriptor, shard: list, right: list, cap: int) -> dict:
    out: dict = {}
    mul = group.mul_key
    for s, m in shard:
        for t, w in right:
            key = mul(s, t)
            out[key] = out.get(key, 0.0) + m * w
        if len(out) > cap:
            raise ResourceError(f"Convolution support exceeds the element cap {cap}; "
                                f"use a radial or lattice representation or Monte Carlo sampling.")
    return out


def convolve_functions(group: GroupDescriptor, left: dict, right: dict, rules: LabRules = DEFAULT,
                       workers=1) -> dict:
    """(f*g)(s) = sum_t f(t) g(t^-1 s) for finitely supported f, g given as key -> value."""
    if len(left) * len(right) > rules.work_cap:
        raise ResourceError(f"Convolution of {len(left)} by {len(right)} atoms exceeds the work cap; "
                            f"use a radial or lattice representation or Monte Carlo sampling.")
    items = list(left.items())
    right_items = list(right.items())
    size = max(1, math.ceil(len(items) / rules.convolution_shards))
    shards = [items[i:i + size] for i in range(0, len(items), size)]
    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda shard: _convolve_shard(group, shard, right_items, rules.element_cap),
                                  shards))
    else:
        parts = [_convolve_shard(group, shard, right_items, rules.element_cap) for shard in shards]
    # merged in shard order, independent of the worker count
    merged = parts[0]
    for part in parts[1:]:
        for key, value in part.items():
            merged[key] = merged.get(key, 0.0) + value
        if len(merged) > rules.element_cap:
            raise ResourceError(f"Convolution support exceeds the element cap {rules.element_cap}.")
    logger.debug(f"{group}: convolved {len(left)} x {len(right)} atoms into {len(merged)} "
                 f"over {len(shards)} shards")
    return merged


def _exact_convolution(group: GroupDescriptor, left: dict, right: dict) -> dict:
    out: dict = {}
    for s, m in left.items():
        for t, w in right.items():
            key = group.mul_key(s, t)
            out[key] = out.get(key, Fraction(0)) + m * w
    return out


def _radial_convolve(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """Sphere masses of xy for independent radial x, y.

    For x uniform on sphere i and y uniform on sphere j the number t of cancelled letters
    has P(t=0) = q/2k, P(t=s) = q^-(s-1)(q-1)/(2kq) for 0 < s < min(i,j) and
    P(t=min(i,j)) = q^-(min(i,j)-1)/2k with q = 2k-1; the product is uniform on sphere i+j-2t.
    """
    q = 2 * k - 1
    ra, rb = len(a) - 1, len(b) - 1
    out = np.zeros(ra + rb + 1)
    radii = np.arange(1, ra + 1)
    inner = a[1:]
    for j in range(rb + 1):
        bj = b[j]
        if bj == 0:
            continue
        if j == 0:
            out[:ra + 1] += a * bj
            continue
        out[j] += a[0] * bj
        if ra == 0:
            continue
        out[radii + j] += inner * bj * (q / (2 * k))
        cap = np.minimum(radii, j)
        for t in range(1, min(j, ra) + 1):
            sel = radii >= t
            base = float(q) ** (-(t - 1)) / (2 * k)
            prob = np.where(cap[sel] == t, base, base * (q - 1) / q)
            out[radii[sel] + j - 2 * t] += inner[sel] * bj * prob
    return out


def _lattice_convolve(group: GroupDescriptor, a: LatticeMeasure, b: LatticeMeasure,
                      rules: LabRules) -> LatticeMeasure:
    if np.count_nonzero(a.array) < np.count_nonzero(b.array):
        a, b = b, a
    if a.circular:
        out = np.zeros_like(a.array)
        for shift in np.nonzero(b.array)[0]:
            out += b.array[shift] * np.roll(a.array, int(shift))
        return LatticeMeasure(group, out, (0,))
    shape = tuple(sa + sb - 1 for sa, sb in zip(a.array.shape, b.array.shape))
    if math.prod(shape) > rules.element_cap:
        raise ResourceError(f"Lattice box {shape} exceeds the element cap {rules.element_cap}.")
    out = np.zeros(shape)
    for index in zip(*np.nonzero(b.array)):
        window = tuple(slice(i, i + s) for i, s in zip(index, a.array.shape))
        out[window] += b.array[index] * a.array
    return LatticeMeasure(group, out, tuple(x + y for x, y in zip(a.origin, b.origin)))


def convolve(mu: Distribution, nu: Distribution, rules: LabRules = DEFAULT, workers=1) -> Distribution:
    """mu * nu in the representation of the inputs; mixed inputs fall back to sparse atoms."""
    if mu.group != nu.group:
        raise DomainError(f"Cannot convolve measures on {mu.group} and {nu.group}.")
    if isinstance(mu, RadialMeasure) and isinstance(nu, RadialMeasure):
        return RadialMeasure(mu.group, _radial_convolve(mu.masses, nu.masses, mu.group.param), check=False)
    if isinstance(mu, LatticeMeasure) and isinstance(nu, LatticeMeasure):
        return _lattice_convolve(mu.group, mu, nu, rules)
    mu, nu = mu.to_sparse(rules), nu.to_sparse(rules)
    atoms = convolve_functions(mu.group, mu.atoms, nu.atoms, rules, workers)
    exact = None
    if mu.exact is not None and nu.exact is not None and len(atoms) <= rules.exact_shadow_limit \
            and len(mu) * len(nu) <= 20 * rules.exact_shadow_limit:
        exact = _exact_convolution(mu.group, mu.exact, nu.exact)
    return SparseMeasure(mu.group, atoms, exact=exact, check=False)


def best_representation(mu: SparseMeasure) -> Distribution:
    """Radial on free groups when possible, dense arrays on abelian and cyclic groups, else sparse."""
    match mu.group.family:
        case Family.Free if mu.is_radial():
            return RadialMeasure.from_sparse(mu)
        case Family.Abelian | Family.Cyclic:
            return LatticeMeasure.from_sparse(mu)
    return mu


def iter_powers(mu: SparseMeasure, n_max: int, rules: LabRules = DEFAULT, policy=PowerPolicy.Cap,
                workers=1) -> Iterator[tuple[int, Distribution]]:
    """Yields (n, mu^{*n}) for n = 1..n_max, each in the representation chosen by the policy."""
    policy = PowerPolicy(policy)
    match policy:
        case PowerPolicy.Cap:
            step = best_representation(mu)
        case PowerPolicy.Radial:
            step = RadialMeasure.from_sparse(mu)
        case PowerPolicy.Exact:
            step = mu
    current = step
    for n in range(1, n_max + 1):
        if n > 1:
            current = convolve(current, step, rules, workers)
            if isinstance(current, SparseMeasure) and current.exact is None and mu.exact is not None:
                logger.debug(f"exact shadow dropped at n={n} ({len(current)} atoms)")
        yield n, current


def convolution_power(mu: SparseMeasure, n: int, policy: PowerPolicy | str = PowerPolicy.Exact,
                      rules: LabRules = DEFAULT, workers=1) -> SparseMeasure:
    if n < 0:
        raise ValueError("Convolution powers need n >= 0.")
    if n == 0:
        return SparseMeasure.point_mass(mu.group)
    result = mu
    for _, result in iter_powers(mu, n, rules, policy, workers):
        pass
    return result.to_sparse(rules)


def _sumset_mask(indicator: np.ndarray, n: int, forward, inverse) -> np.ndarray:
    """Support of the n-fold sum of a 0/1 array, by repeated squaring of indicator transforms.

    Products count representations, at most the number of cells, so 0.5 separates them from
    transform noise.
    """
    base, result = forward(indicator.astype(float)), None
    while n:
        if n & 1:
            result = base if result is None else forward((inverse(result * base) > 0.5).astype(float))
        n >>= 1
        if n:
            base = forward((inverse(base * base) > 0.5).astype(float))
    return inverse(result) > 0.5


def lattice_power(mu: SparseMeasure, n: int, rules: LabRules = DEFAULT) -> LatticeMeasure:
    """mu^{*n} on an abelian or cyclic group.

    Repeated direct convolution while the work stays under the work cap, else the discrete
    Fourier transform on the n-fold sum box, so nothing wraps around. On the transform path
    cells outside the exact support are zero and negative noise is clipped; every cell of the
    support is retained, including the ones below the retention floor.
    """
    base = LatticeMeasure.from_sparse(mu)
    if n < 1:
        raise ValueError("Lattice powers need n >= 1.")
    shape = base.array.shape if base.circular else tuple(n * (s - 1) + 1 for s in base.array.shape)
    if math.prod(shape) > rules.element_cap:
        raise ResourceError(f"Torus {shape} for step {n} exceeds the element cap {rules.element_cap}.")
    if n * np.count_nonzero(base.array) * math.prod(shape) <= rules.work_cap:
        current = base
        for _ in range(n - 1):
            current = _lattice_convolve(mu.group, current, base, rules)
        return current
    if base.circular:
        forward, inverse = np.fft.fft, lambda spectrum: np.fft.ifft(spectrum).real
        origin = (0,)
    else:
        forward = lambda array: np.fft.rfftn(array, s=shape)
        inverse = lambda spectrum: np.fft.irfftn(spectrum, s=shape)
        origin = tuple(n * o for o in base.origin)
    array = np.clip(inverse(forward(base.array) ** n), 0.0, None)
    support = _sumset_mask(base.array > 0, n, forward, inverse)
    array[~support] = 0.0
    faint = support & (array < rules.retention_floor)
    if np.any(faint):
        # unresolved cells of the support keep the smallest normal mass
        array[support & (array <= 0.0)] = np.finfo(float).tiny
        logger.info(f"{mu.group}: {np.count_nonzero(faint)} atoms of step {n} lie below "
                    f"{rules.retention_floor:g} and are kept at transform resolution")
    return LatticeMeasure(mu.group, array, origin)


def series_measure(mu: SparseMeasure, coefficients, rules: LabRules = DEFAULT) -> tuple[Distribution, float]:
    """Truncated mixture sum_n a_n mu^{*n}, renormalized; returns it with the dropped tail mass."""
    coefficients = [float(a) for a in coefficients]
    if not coefficients or coefficients[0] <= 0 or any(a < 0 for a in coefficients):
        raise ValueError("Series coefficients have to be non-negative with a_0 > 0.")
    weight = utils.compensated_sum(coefficients)
    if weight > 1 + MASS_TOLERANCE:
        raise ValueError(f"Series coefficients sum to {weight} > 1.")
    tail = max(0.0, 1.0 - weight)
    powers = [(0, SparseMeasure.point_mass(mu.group))]
    if len(coefficients) > 1:
        powers += list(iter_powers(mu, len(coefficients) - 1, rules))
    if all(isinstance(p, RadialMeasure) for _, p in powers[1:]) and len(powers) > 1:
        masses = np.zeros(max(p.radius for _, p in powers[1:]) + 1)
        masses[0] += coefficients[0]
        for n, power in powers[1:]:
            masses[:power.radius + 1] += coefficients[n] * power.masses
        return RadialMeasure(mu.group, masses / weight), tail
    atoms: dict = {}
    for n, power in powers:
        if coefficients[n] == 0:
            continue
        for key, mass in power.to_sparse(rules).items():
            atoms[key] = atoms.get(key, 0.0) + coefficients[n] * mass
    return SparseMeasure(mu.group, atoms, normalize=True), tail


# --- functionals ---------------------------------------------------------------------


def mass_profile(mu: Distribution, rules: LabRules = DEFAULT) -> Profile:
    """Masses and class sizes only; word lengths of sparse atoms are never computed."""
    if isinstance(mu, SparseMeasure):
        masses = np.fromiter(mu.atoms.values(), dtype=float, count=len(mu.atoms))
        return Profile(np.log(masses), np.zeros(len(masses)), None, None)
    return mu.profile(rules)


def shannon_entropy(mu: Distribution, rules: LabRules = DEFAULT) -> float:
    prof = mass_profile(mu, rules)
    return max(0.0, -utils.compensated_sum(prof.class_mass * prof.log_mass))


def log_lq_norm(mu: Distribution, q: float, rules: LabRules = DEFAULT) -> float:
    if q <= 1:
        raise DomainError(f"The lq norm needs q > 1, got {q}.")
    prof = mass_profile(mu, rules)
    return utils.log_sum_exp(q * prof.log_mass + prof.log_mult) / q


def lq_norm(mu: Distribution, q: float, rules: LabRules = DEFAULT) -> float:
    return math.exp(log_lq_norm(mu, q, rules))


def renyi_entropy(mu: Distribution, q: float, rules: LabRules = DEFAULT) -> float:
    """q/(1-q) log ||mu||_q, tends to the Shannon entropy as q -> 1."""
    return q / (1 - q) * log_lq_norm(mu, q, rules)


def length_moment(mu: Distribution, g: Callable[[np.ndarray], np.ndarray], rules: LabRules = DEFAULT) -> float:
    """sum_s mu(s) g(|s|) with g vectorized over lengths."""
    prof = mu.profile(rules)
    return utils.compensated_sum(prof.class_mass * g(prof.lengths.astype(float)))


def log_moment(mu: Distribution, f: Callable[[GroupElement], float], rules: LabRules = DEFAULT) -> float:
    """sum_s mu(s) f(s) for an element-level function f."""
    sparse = mu.to_sparse(rules)
    return utils.compensated_sum(mass * f(GroupElement(sparse.group, key, canonical=True))
                                 for key, mass in sparse.items())


def alpha_moment(mu: Distribution, L: Callable[[GroupElement], float] | None = None, alpha: float = 1.0,
                 rules: LabRules = DEFAULT) -> float:
    if L is None:
        return length_moment(mu, lambda r: r ** alpha, rules)
    return log_moment(mu, lambda s: L(s) ** alpha, rules)


def speed_term(mu: Distribution, rules: LabRules = DEFAULT) -> float:
    """Expected word length sum_s mu(s)|s|."""
    return length_moment(mu, lambda r: r, rules)
