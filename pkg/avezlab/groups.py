from enum import Enum
import json
import logging
import math
import threading

import numpy as np

from avezlab.errors import ConfigError, DomainError, ResourceError
from avezlab.labrules import DEFAULT, LabRules
from avezlab.sequence import AsymptoticSequence, IndexKind
from avezlab.utils import fit_growth_exponent

logger = logging.getLogger("avezlab.groups")


class Family(Enum):
    """Supported group families"""
    Free = "free"
    Abelian = "abelian"
    Cyclic = "cyclic"
    Lamplighter = "lamplighter"

    def __str__(self):
        return self.value

    @property
    def parameter_name(self) -> str:
        return "order" if self is Family.Cyclic else "rank"


class GroupDescriptor:
    """A concrete finitely generated group with its standard symmetric generators.

    Element keys are the canonical forms:
      free         tuple of letters in {±1..±k}, reduced
      abelian      tuple of d integers
      cyclic       residue in [0, n)
      lamplighter  (frozenset of lit positions, cursor), positions are d-tuples
    """

    def __init__(self, family: Family | str, param: int):
        self.family: Family = self._validate_and_convert(family)
        if isinstance(param, bool) or not isinstance(param, (int, np.integer)):
            raise TypeError(f"Invalid {self.family.parameter_name} type. Expected an integer.")
        if param < 1:
            raise ValueError(f"The {self.family.parameter_name} has to be positive, got {param}.")
        if self.family is Family.Free and param > 26:
            raise ValueError("Free groups of rank above 26 have no letter literals.")
        self.param = int(param)

    @staticmethod
    def _validate_and_convert(family):
        if isinstance(family, str):
            try:
                return Family(family.lower())
            except ValueError:
                raise ValueError(f"Invalid family value {family!r}.")
        elif isinstance(family, Family):
            return family
        else:
            raise TypeError("Invalid family type. Expected an instance of Family or a string.")

    @staticmethod
    def from_spec(spec: "str | dict | GroupDescriptor") -> "GroupDescriptor":
        """Accepts 'free:2', a JSON string or a dict like {"family": "cyclic", "order": 6}."""
        if isinstance(spec, GroupDescriptor):
            return spec
        if isinstance(spec, str):
            spec = spec.strip()
            if spec.startswith("{"):
                spec = json.loads(spec)
            else:
                family, _, param = spec.partition(":")
                try:
                    return GroupDescriptor(family, int(param or 1))
                except (TypeError, ValueError) as err:
                    raise ConfigError(f"Invalid group spec {spec!r}: {err}")
        if not isinstance(spec, dict) or "family" not in spec:
            raise ConfigError(f"Invalid group spec {spec!r}.")
        try:
            family = GroupDescriptor._validate_and_convert(spec["family"])
            return GroupDescriptor(family, int(spec.get(family.parameter_name, 1)))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"Invalid group spec {spec!r}: {err}")

    def to_spec(self) -> dict:
        return {"family": str(self.family), self.family.parameter_name: self.param}

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupDescriptor) and self.family == other.family and self.param == other.param

    def __hash__(self):
        return hash((self.family, self.param))

    def __str__(self) -> str:
        return f"{self.family}:{self.param}"

    def __repr__(self) -> str:
        return f"GroupDescriptor({self})"

    @property
    def rank(self) -> int:
        return self.param

    @property
    def order(self) -> int:
        return self.param

    @property
    def rd_capable(self) -> bool:
        """Property RD holds for free, abelian and finite groups, fails for lamplighters."""
        return self.family is not Family.Lamplighter

    @property
    def amenable(self) -> bool:
        return not (self.family is Family.Free and self.param >= 2)

    # --- key level arithmetic -------------------------------------------------

    def identity_key(self):
        match self.family:
            case Family.Free:
                return ()
            case Family.Abelian:
                return (0,) * self.param
            case Family.Cyclic:
                return 0
            case Family.Lamplighter:
                return frozenset(), (0,) * self.param

    def generator_keys(self) -> list:
        """Standard symmetric generators, without the identity."""
        match self.family:
            case Family.Free:
                return [g for i in range(1, self.param + 1) for g in ((i,), (-i,))]
            case Family.Abelian:
                gens = []
                for i in range(self.param):
                    for sign in (1, -1):
                        v = [0] * self.param
                        v[i] = sign
                        gens.append(tuple(v))
                return gens
            case Family.Cyclic:
                return sorted({1 % self.param, -1 % self.param} - {0})
            case Family.Lamplighter:
                zero = (0,) * self.param
                gens = []
                for i in range(self.param):
                    for sign in (1, -1):
                        v = [0] * self.param
                        v[i] = sign
                        gens.append((frozenset(), tuple(v)))
                gens.append((frozenset([zero]), zero))
                return gens

    def canonical(self, key):
        """Validates a raw key and brings it to canonical form."""
        match self.family:
            case Family.Free:
                word = []
                for letter in key:
                    if not isinstance(letter, (int, np.integer)) or letter == 0 or abs(letter) > self.param:
                        raise ValueError(f"Invalid letter {letter!r} for {self}.")
                    if word and word[-1] == -letter:
                        word.pop()
                    else:
                        word.append(int(letter))
                return tuple(word)
            case Family.Abelian:
                key = tuple(int(x) for x in key)
                if len(key) != self.param:
                    raise ValueError(f"Expected a vector of length {self.param}, got {key}.")
                return key
            case Family.Cyclic:
                return int(key) % self.param
            case Family.Lamplighter:
                lamps, cursor = key
                cursor = tuple(int(x) for x in cursor)
                lamps = frozenset(tuple(int(x) for x in pos) for pos in lamps)
                if len(cursor) != self.param or any(len(pos) != self.param for pos in lamps):
                    raise ValueError(f"Lamplighter positions have to be {self.param}-vectors.")
                return lamps, cursor

    def mul_key(self, a, b):
        match self.family:
            case Family.Free:
                i = 0
                limit = min(len(a), len(b))
                while i < limit and a[-1 - i] == -b[i]:
                    i += 1
                return a[:len(a) - i] + b[i:]
            case Family.Abelian:
                return tuple(x + y for x, y in zip(a, b))
            case Family.Cyclic:
                return (a + b) % self.param
            case Family.Lamplighter:
                lamps_a, cursor_a = a
                lamps_b, cursor_b = b
                shifted = frozenset(tuple(x + c for x, c in zip(pos, cursor_a)) for pos in lamps_b)
                return lamps_a ^ shifted, tuple(x + y for x, y in zip(cursor_a, cursor_b))

    def inv_key(self, a):
        match self.family:
            case Family.Free:
                return tuple(-x for x in reversed(a))
            case Family.Abelian:
                return tuple(-x for x in a)
            case Family.Cyclic:
                return -a % self.param
            case Family.Lamplighter:
                lamps, cursor = a
                return (frozenset(tuple(x - c for x, c in zip(pos, cursor)) for pos in lamps),
                        tuple(-x for x in cursor))

    def len_key(self, a, rules: LabRules = DEFAULT) -> int:
        match self.family:
            case Family.Free:
                return len(a)
            case Family.Abelian:
                return sum(abs(x) for x in a)
            case Family.Cyclic:
                return min(a, self.param - a)
            case Family.Lamplighter:
                return _oracle(self).length(a, rules)

    # --- literals ---------------------------------------------------------------

    def key_str(self, key) -> str:
        match self.family:
            case Family.Free:
                if not key:
                    return "e"
                return "".join(chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in key)
            case Family.Abelian:
                return ",".join(str(x) for x in key)
            case Family.Cyclic:
                return str(key)
            case Family.Lamplighter:
                lamps, cursor = key
                lit = ";".join(",".join(str(x) for x in pos) for pos in sorted(lamps))
                return f"{lit}|{','.join(str(x) for x in cursor)}"

    def parse_key(self, literal: str):
        """Inverse of key_str, e.g. 'abA', '1,-2', '3' or '0;2|1'."""
        literal = literal.strip()
        try:
            match self.family:
                case Family.Free:
                    if literal in ("", "e"):
                        return ()
                    word = []
                    for ch in literal:
                        if "a" <= ch <= "z":
                            word.append(ord(ch) - ord("a") + 1)
                        elif "A" <= ch <= "Z":
                            word.append(-(ord(ch) - ord("A") + 1))
                        else:
                            raise ValueError(f"Invalid letter {ch!r}")
                    return self.canonical(word)
                case Family.Abelian:
                    return self.canonical(int(x) for x in literal.strip("()").split(","))
                case Family.Cyclic:
                    return self.canonical(int(literal))
                case Family.Lamplighter:
                    lit, _, cursor = literal.partition("|")
                    lamps = [tuple(int(x) for x in pos.split(",")) for pos in lit.split(";") if pos]
                    cursor = tuple(int(x) for x in cursor.split(",")) if cursor else (0,) * self.param
                    # a lamp toggled twice is off again
                    odd = frozenset(pos for pos in set(lamps) if lamps.count(pos) % 2)
                    return self.canonical((odd, cursor))
        except ValueError as err:
            raise ValueError(f"Invalid element literal {literal!r} for {self}: {err}")

    # --- element level ------------------------------------------------------------

    def element(self, key) -> "GroupElement":
        return GroupElement(self, key)

    def identity(self) -> "GroupElement":
        return GroupElement(self, self.identity_key(), canonical=True)

    def generators(self) -> list["GroupElement"]:
        return [GroupElement(self, g, canonical=True) for g in self.generator_keys()]

    def parse(self, literal: str) -> "GroupElement":
        return GroupElement(self, self.parse_key(literal), canonical=True)

    def random_key(self, rng: np.random.Generator, max_length: int):
        """A random product of at most max_length generators."""
        gens = self.generator_keys()
        key = self.identity_key()
        if not gens:
            return key
        for index in rng.integers(0, len(gens), size=int(rng.integers(0, max_length + 1))):
            key = self.mul_key(key, gens[index])
        return key


class GroupElement:
    """Immutable group element in canonical form."""
    __slots__ = ("group", "key")

    def __init__(self, group: GroupDescriptor, key, canonical=False):
        self.group = group
        self.key = key if canonical else group.canonical(key)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __invert__(self) -> "GroupElement":
        return inverse(self)

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupElement) and self.group == other.group and self.key == other.key

    def __hash__(self):
        return hash((self.group, self.key))

    def __str__(self) -> str:
        return self.group.key_str(self.key)

    def __repr__(self) -> str:
        return f"GroupElement({self.group}, {self})"

    @property
    def length(self) -> int:
        return length(self)


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.group != b.group:
        raise DomainError(f"Cannot multiply elements of {a.group} and {b.group}.")
    return GroupElement(a.group, a.group.mul_key(a.key, b.key), canonical=True)


def inverse(a: GroupElement) -> GroupElement:
    return GroupElement(a.group, a.group.inv_key(a.key), canonical=True)


def identity(desc: GroupDescriptor) -> GroupElement:
    return desc.identity()


def length(a: GroupElement, rules: LabRules = DEFAULT) -> int:
    return a.group.len_key(a.key, rules)


class _LengthOracle:
    """Breadth-first word lengths of a lamplighter group, grown on demand up to the radius cap."""

    def __init__(self, desc: GroupDescriptor):
        self.desc = desc
        self.lock = threading.Lock()
        start = desc.identity_key()
        self.lengths = {start: 0}
        self.layers = [[start]]

    @property
    def radius(self) -> int:
        return len(self.layers) - 1

    def _grow(self, rules: LabRules) -> None:
        if self.radius >= rules.bfs_radius_cap:
            raise ResourceError(f"Length oracle of {self.desc} reached the radius cap {rules.bfs_radius_cap}.",
                                radius=self.radius)
        gens = self.desc.generator_keys()
        layer = []
        r = self.radius + 1
        for key in self.layers[-1]:
            for g in gens:
                nxt = self.desc.mul_key(key, g)
                if nxt not in self.lengths:
                    self.lengths[nxt] = r
                    layer.append(nxt)
        if len(self.lengths) > rules.element_cap:
            raise ResourceError(f"Ball of radius {r} in {self.desc} exceeds the element cap.", size=len(self.lengths))
        self.layers.append(layer)
        logger.debug(f"{self.desc}: length oracle grown to radius {r} ({len(self.lengths)} elements)")

    def length(self, key, rules: LabRules) -> int:
        with self.lock:
            while key not in self.lengths:
                self._grow(rules)
            return self.lengths[key]

    def layer(self, r: int, rules: LabRules) -> list:
        with self.lock:
            while self.radius < r:
                self._grow(rules)
            return list(self.layers[r])


_ORACLES: dict[GroupDescriptor, _LengthOracle] = {}
_ORACLES_LOCK = threading.Lock()


def _oracle(desc: GroupDescriptor) -> _LengthOracle:
    with _ORACLES_LOCK:
        if desc not in _ORACLES:
            _ORACLES[desc] = _LengthOracle(desc)
        return _ORACLES[desc]


def sphere_size(desc: GroupDescriptor, r: int, rules: LabRules = DEFAULT) -> int:
    if r < 0:
        raise ValueError("Radius has to be non-negative.")
    match desc.family:
        case Family.Free:
            k = desc.param
            return 1 if r == 0 else 2 * k * (2 * k - 1) ** (r - 1)
        case Family.Abelian:
            d = desc.param
            if r == 0:
                return 1
            return sum(2 ** i * math.comb(d, i) * math.comb(r - 1, i - 1) for i in range(1, d + 1))
        case Family.Cyclic:
            n = desc.param
            if r == 0:
                return 1
            if 2 * r < n:
                return 2
            return 1 if 2 * r == n else 0
        case Family.Lamplighter:
            return len(_oracle(desc).layer(r, rules))


def ball_size(desc: GroupDescriptor, r: int, rules: LabRules = DEFAULT) -> int:
    match desc.family:
        case Family.Free:
            k = desc.param
            if k == 1:
                return 2 * r + 1
            return 1 + 2 * k * ((2 * k - 1) ** r - 1) // (2 * k - 2)
        case Family.Abelian:
            d = desc.param
            return sum(2 ** i * math.comb(d, i) * math.comb(r, i) for i in range(d + 1))
        case Family.Cyclic:
            return min(desc.param, 2 * r + 1)
        case Family.Lamplighter:
            return sum(sphere_size(desc, j, rules) for j in range(r + 1))


def sphere_keys(desc: GroupDescriptor, r: int, rules: LabRules = DEFAULT) -> list:
    """All canonical keys of length exactly r."""
    if desc.family is not Family.Lamplighter and sphere_size(desc, r) > rules.element_cap:
        raise ResourceError(f"Sphere of radius {r} in {desc} exceeds the element cap {rules.element_cap}.")
    match desc.family:
        case Family.Free:
            letters = [g[0] for g in desc.generator_keys()]
            words = [()]
            for _ in range(r):
                words = [w + (x,) for w in words for x in letters if not w or w[-1] != -x]
            return words
        case Family.Abelian:
            return _lattice_sphere(desc.param, r)
        case Family.Cyclic:
            n = desc.param
            return sorted({r % n, -r % n}) if 2 * r <= n else []
        case Family.Lamplighter:
            return _oracle(desc).layer(r, rules)


def _lattice_sphere(d: int, r: int) -> list[tuple]:
    if d == 1:
        return [(r,), (-r,)] if r else [(0,)]
    points = []
    for head in range(-r, r + 1):
        for tail in _lattice_sphere(d - 1, r - abs(head)):
            points.append((head,) + tail)
    return points


def sphere(desc: GroupDescriptor, r: int, rules: LabRules = DEFAULT) -> set[GroupElement]:
    return {GroupElement(desc, key, canonical=True) for key in sphere_keys(desc, r, rules)}


def volume_growth(desc: GroupDescriptor, r_max: int, rules: LabRules = DEFAULT) -> AsymptoticSequence:
    """Samples (1/r) log |ball(r)| for r = 1..r_max; the fitted limit is stored as 'growth_fit'."""
    seq = AsymptoticSequence(IndexKind.Step, name="volume_growth")
    logs = []
    for r in range(1, r_max + 1):
        log_ball = math.log(ball_size(desc, r, rules))
        logs.append(log_ball)
        seq.append(r, log_ball / r)
    seq.extrapolation["growth_fit"] = _growth_limit(desc, np.arange(1, r_max + 1), np.array(logs))
    return seq


def _growth_limit(desc: GroupDescriptor, radii, log_balls) -> float:
    if desc.family is Family.Cyclic or (desc.family is Family.Free and desc.param == 1) \
            or desc.family is Family.Abelian:
        # polynomial growth, the fit only removes the log r / r drift
        return max(0.0, fit_growth_exponent(radii, log_balls))
    return fit_growth_exponent(radii[len(radii) // 2:], log_balls[len(radii) // 2:])
