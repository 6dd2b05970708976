from concurrent.futures import ThreadPoolExecutor
import logging
import math

import numpy as np
from tqdm import tqdm

from avezlab.groups import Family, GroupElement
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import Distribution, RadialMeasure, SparseMeasure

logger = logging.getLogger("avezlab.walks")


class WalkSample:
    """One sampled path W_0 = e, W_n = W_{n-1} Y_n."""

    def __init__(self, seed: int, steps: list[GroupElement], positions: list[GroupElement]):
        if len(positions) != len(steps) + 1:
            raise ValueError("A walk of n steps has n+1 positions.")
        self.seed = seed
        self.steps = steps
        self.positions = positions

    @staticmethod
    def simulate(mu: SparseMeasure, n: int, seed: int) -> "WalkSample":
        rng = np.random.default_rng(seed)
        keys = list(mu.atoms)
        picks = rng.choice(len(keys), size=n, p=_probabilities(mu))
        group = mu.group
        position = group.identity_key()
        steps, positions = [], [GroupElement(group, position, canonical=True)]
        for index in picks:
            step = keys[index]
            position = group.mul_key(position, step)
            steps.append(GroupElement(group, step, canonical=True))
            positions.append(GroupElement(group, position, canonical=True))
        return WalkSample(seed, steps, positions)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> GroupElement:
        return self.positions[-1]


class PathStatistics:
    """Monte Carlo summary of many paths of the same length."""

    def __init__(self, n: int, count: int, seed: int, lengths: np.ndarray, log_masses: np.ndarray | None):
        self.n, self.count, self.seed = n, count, seed
        self.speed = float(np.mean(lengths)) / n if n else 0.0
        self.speed_stderr = float(np.std(lengths)) / n / math.sqrt(count) if n else 0.0
        self.kv_entropy = self.kv_stderr = None
        if log_masses is not None and n:
            self.kv_entropy = float(np.mean(-log_masses)) / n
            self.kv_stderr = float(np.std(log_masses)) / n / math.sqrt(count)
        self.escape = {"mean_final_length": float(np.mean(lengths)), "max_final_length": int(np.max(lengths)),
                       "fraction_at_identity": float(np.mean(lengths == 0))}

    def __repr__(self) -> str:
        return f"PathStatistics(n={self.n}, count={self.count}, speed={self.speed:.4f}, kv={self.kv_entropy})"

    def to_dict(self) -> dict:
        return {"n": self.n, "count": self.count, "seed": self.seed, "speed": self.speed,
                "speed_stderr": self.speed_stderr, "kv_entropy": self.kv_entropy,
                "kv_stderr": self.kv_stderr, "escape": self.escape}


def _probabilities(mu: SparseMeasure) -> np.ndarray:
    p = np.fromiter(mu.atoms.values(), dtype=float, count=len(mu))
    return p / p.sum()


def _radial_block(mu: SparseMeasure, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Radius chain of a radial walk of radius one: hold at mu(e), else one letter, cancelling w.p. 1/2k."""
    hold = mu.mass_at_identity()
    down = 1.0 / (2 * mu.group.param)
    radius = np.zeros(size, dtype=np.int64)
    if hold >= 1.0:
        return radius
    for _ in range(n):
        u = rng.random(size)
        moving = u >= hold
        cancel = (u - hold) / (1.0 - hold) < down
        radius += np.where(moving, np.where(cancel & (radius > 0), -1, 1), 0)
    return radius


def _lattice_block(mu: SparseMeasure, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    vectors = np.array([k if isinstance(k, tuple) else (k,) for k in mu.atoms], dtype=np.int64)
    picks = rng.choice(len(vectors), size=(size, n), p=_probabilities(mu))
    finals = vectors[picks].sum(axis=1)
    if mu.group.family is Family.Cyclic:
        finals %= mu.group.param
    return finals


def _generic_block(mu: SparseMeasure, n: int, size: int, rng: np.random.Generator) -> list:
    keys = list(mu.atoms)
    picks = rng.choice(len(keys), size=(size, n), p=_probabilities(mu))
    group = mu.group
    finals = []
    for row in picks:
        position = group.identity_key()
        for index in row:
            position = group.mul_key(position, keys[index])
        finals.append(position)
    return finals


def _block_statistics(mu: SparseMeasure, law: Distribution | None, n: int, size: int, seed: int, block: int,
                      rules: LabRules) -> tuple[np.ndarray, np.ndarray | None]:
    rng = np.random.default_rng([seed, block])
    group = mu.group
    if group.family is Family.Free and mu.is_radial() and mu.max_length() <= 1:
        radius = _radial_block(mu, n, size, rng)
        if isinstance(law, RadialMeasure):
            log_sizes = law.log_sphere_sizes(max(law.radius, int(radius.max())))
            padded = np.zeros(len(log_sizes))
            padded[:law.radius + 1] = law.masses
            with np.errstate(divide="ignore"):
                log_masses = np.log(padded[radius]) - log_sizes[radius]
            return radius, log_masses
        # any word of the right length represents its sphere
        keys = [(1,) * int(r) for r in radius] if law is not None else None
    elif group.family in (Family.Abelian, Family.Cyclic):
        finals = _lattice_block(mu, n, size, rng)
        if group.family is Family.Cyclic:
            lengths = np.minimum(finals, group.param - finals).ravel()
            keys = [int(x) for x in finals.ravel()]
        else:
            lengths = np.abs(finals).sum(axis=1)
            keys = [tuple(int(x) for x in row) for row in finals]
        if law is None:
            return lengths, None
        return lengths, np.array([law.log_element_mass(k) for k in keys])
    else:
        keys = _generic_block(mu, n, size, rng)
        radius = np.array([group.len_key(k, rules) for k in keys], dtype=np.int64)
    if law is None:
        return radius, None
    return radius, np.array([law.log_element_mass(k) for k in keys])


def sample_paths(mu: SparseMeasure, n: int, count: int, seed: int, law: Distribution | None = None,
                 rules: LabRules = DEFAULT, workers=1, progress=False) -> PathStatistics:
    """Speed and Kaimanovich-Vershik entropy estimates from `count` paths of n steps.

    Paths are drawn in blocks of rules.mc_block with streams seeded by (seed, block index),
    so the result does not depend on the number of workers.
    """
    if count < 1:
        raise ValueError("At least one path is needed.")
    if law is not None and law.group != mu.group:
        raise ValueError("The law lives on another group.")
    sizes = [min(rules.mc_block, count - start) for start in range(0, count, rules.mc_block)]
    work = lambda block: _block_statistics(mu, law, n, sizes[block], seed, block, rules)
    blocks = tqdm(range(len(sizes)), leave=False, disable=not progress, desc="paths")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(block) for block in blocks]
    lengths = np.concatenate([p[0] for p in parts])
    log_masses = None if law is None else np.concatenate([p[1] for p in parts])
    stats = PathStatistics(n, count, seed, lengths, log_masses)
    logger.info(f"{mu.group}: {count} paths of {n} steps, speed {stats.speed:.5f}"
                + (f", KV entropy {stats.kv_entropy:.5f}" if stats.kv_entropy is not None else ""))
    return stats
