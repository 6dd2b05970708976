import logging
import math

from tqdm import tqdm

from avezlab.errors import ResourceError
from avezlab.groups import Family, volume_growth
from avezlab.labrules import DEFAULT, LabRules
from avezlab.measures import (Distribution, PowerPolicy, SparseMeasure,
                              convolution_power, iter_powers, lattice_power, log_lq_norm, shannon_entropy,
                              speed_term)
from avezlab.sequence import AsymptoticSequence, EstimateReport, IndexKind, clamp
from avezlab.spectra import folner_lower, headline, power_sweep, radius_l1_weighted, root_and_ratio
from avezlab.walks import sample_paths
from avezlab.weights import (ExponentialWeight, PolynomialWeight, Weight, build_inverse_series_weight, gibbs_slack,
                             growth_rate, log_moment, log_weighted_lq_norm, verify_convolution_domination,
                             weighted_shannon_entropy)
import avezlab.utils as utils

__all__ = ["AsymptoticSequence", "EstimateReport", "MonteCarloConfig", "avez_entropy", "lyapunov_direct",
           "lyapunov_via_radius", "weighted_shannon_limit", "weighted_avez_entropy", "convolution_entropy",
           "fundamental_inequality_report", "inverse_series_report"]

logger = logging.getLogger("avezlab.estimators")


class MonteCarloConfig:
    """Path sampling used as a cross-check; the seed is mandatory."""

    def __init__(self, seed: int, paths: int | None = None, steps: int | None = None, workers=1,
                 rules: LabRules = DEFAULT):
        if seed is None:
            raise ValueError("Monte Carlo runs need a seed.")
        self.seed = int(seed)
        self.paths = rules.mc_paths if paths is None else int(paths)
        self.steps = rules.mc_steps if steps is None else int(steps)
        self.workers = workers
        if self.paths < 1 or self.steps < 1:
            raise ValueError("Monte Carlo needs at least one path of at least one step.")

    def to_dict(self) -> dict:
        return {"seed": self.seed, "paths": self.paths, "steps": self.steps}


def _progress(iterable, total: int, progress: bool, desc: str):
    return tqdm(iterable, total=total, leave=False, disable=not progress, desc=desc)


def _law(mu: SparseMeasure, n: int, rules: LabRules) -> Distribution | None:
    """mu^{*n} when some representation reaches it, for Kaimanovich-Vershik estimates."""
    match mu.group.family:
        case Family.Free if mu.is_radial():
            for _, power in iter_powers(mu, n, rules):
                pass
            return power
        case Family.Abelian | Family.Cyclic:
            try:
                return lattice_power(mu, n, rules)
            except ResourceError:
                return None
    if n <= rules.sparse_steps:
        try:
            return convolution_power(mu, n, PowerPolicy.Exact, rules)
        except ResourceError:
            return None
    return None


def _entropy_point(seq: AsymptoticSequence, rules: LabRules) -> tuple[float, str]:
    if len(seq) >= rules.fit_min_terms:
        return seq.fit_log_linear(), "log-linear-fit"
    if len(seq) >= 2:
        return seq.last_difference(), "last-difference"
    return seq.last / seq.terms[-1][0], "quotient"


def avez_entropy(mu: SparseMeasure, n_max: int = 12, mc: MonteCarloConfig | None = None,
                 rules: LabRules = DEFAULT, workers=1, progress=False) -> EstimateReport:
    """Avez entropy h = lim H(mu^{*n})/n.

    The Fekete quotient min H/n is a certified upper bound. The point estimate is the slope
    of a + h n + b log n over the top half of the terms, or the last difference for short runs.
    """
    if n_max < 1:
        raise ValueError("n_max has to be positive.")
    entropies = AsymptoticSequence(IndexKind.Step, subadditive=True, name="entropy")
    for n, power in _progress(iter_powers(mu, n_max, rules, workers=workers), n_max, progress, "entropy"):
        entropies.append(n, shannon_entropy(power, rules))
    upper = max(0.0, entropies.fekete_inf())
    point, method = _entropy_point(entropies, rules)
    estimate = clamp(point, 0.0, upper)
    diagnostics = {"point_method": method}
    if len(entropies) >= 2:
        diagnostics["last_difference"] = entropies.last_difference()
    report = EstimateReport("avez_entropy", estimate, 0.0, upper, ["entropy-powers", method, "fekete-inf"],
                            {"entropy": entropies}, params={"n_max": n_max, "group": mu.group.to_spec()},
                            tolerances={"h_disagreement": rules.h_disagreement},
                            seed=None if mc is None else mc.seed, diagnostics=diagnostics)
    if mc is not None:
        law = _law(mu, mc.steps, rules)
        stats = sample_paths(mu, mc.steps, mc.paths, mc.seed, law, rules, mc.workers, progress)
        report.diagnostics["monte_carlo"] = stats.to_dict() | {"config": mc.to_dict()}
        report.method.append("monte-carlo")
        if stats.kv_entropy is not None:
            scale = max(abs(estimate), abs(stats.kv_entropy))
            if scale > 1e-3 and abs(estimate - stats.kv_entropy) > rules.h_disagreement * scale:
                report.flag(f"entropy estimate {estimate:.5f} and Monte Carlo {stats.kv_entropy:.5f} "
                            f"disagree by more than {rules.h_disagreement:.0%}")
    if estimate != point:
        report.flag(f"point estimate {point:.5f} clamped into [0, {upper:.5f}]")
    logger.info(f"{mu.group}: Avez entropy {estimate:.6f} (Fekete bound {upper:.6f})")
    return report


def _log_moment_sequence(mu: SparseMeasure, omega: Weight, n_max: int, rules: LabRules, workers=1,
                         progress=False) -> AsymptoticSequence:
    sums = AsymptoticSequence(IndexKind.Step, name="log_moment_sum")
    for n, power in _progress(iter_powers(mu, n_max, rules, workers=workers), n_max, progress, "lyapunov"):
        sums.append(n, log_moment(power, omega, rules))
    return sums


def lyapunov_direct(mu: SparseMeasure, omega: Weight, n_max: int = 2000, rules: LabRules = DEFAULT,
                    workers=1, progress=False) -> EstimateReport:
    """Ly = lim (1/n) sum_s mu^{*n}(s) log omega(s) from the sums S_n.

    The estimate is the last difference S_n - S_{n-1}. A declared constant C makes
    S_n + log C subadditive, so min (S_n + log C)/n bounds Ly from above.
    """
    sums = _log_moment_sequence(mu, omega, n_max, rules, workers, progress)
    per_n = AsymptoticSequence(IndexKind.Step, [(n, s / n) for n, s in sums], name="lyapunov_per_n")
    lower = 0.0 if omega.lower_bound >= 1 else None
    upper = None
    if omega.C is not None:
        log_c = math.log(omega.C)
        upper = min((s + log_c) / n for n, s in sums)
        if lower is not None:
            upper = max(upper, lower)
    point = sums.last_difference() if len(sums) >= 2 else per_n.last
    estimate = clamp(point, lower, upper)
    report = EstimateReport("lyapunov", estimate, lower, upper, ["log-moment-sums", "last-difference"],
                            {"per_n": per_n, "sums": sums},
                            params={"n_max": n_max, "weight": omega.spec, "route": "direct"},
                            tolerances={"window": abs(point - per_n.last)},
                            diagnostics={"tail_decreasing": _tail_decreasing(per_n)})
    logger.info(f"{mu.group}: Lyapunov exponent of {omega.spec} {estimate:.6f} (direct)")
    return report


def _tail_decreasing(seq: AsymptoticSequence) -> bool:
    """Whether the values decrease over the last tenth of the terms."""
    tail = seq.values[-max(2, len(seq) // 10):]
    return bool(tail[-1] <= tail[0])


def lyapunov_via_radius(mu: SparseMeasure, omega: Weight, p_grid=None, n_max: int = 400,
                        rules: LabRules = DEFAULT, workers=1, progress=False) -> EstimateReport:
    """Ly as the p -> infinity limit of p log r(mu) in l1(G, omega_p), fitted as c0 + c1/p."""
    p_grid = sorted(rules.p_grid if p_grid is None else p_grid)
    values = AsymptoticSequence(IndexKind.Exponent, name="p_log_radius")
    for p in _progress(p_grid, len(p_grid), progress, "radius"):
        values.append(p, p * math.log(radius_l1_weighted(mu, omega, p, n_max, rules, workers).value))
    c0_all, _, _ = values.fit_inverse_p(use_top_half=False)
    c0, _, residual = values.fit_inverse_p()
    lower = 0.0 if omega.lower_bound >= 1 else None
    upper = float(values.values.min())
    if lower is not None:
        upper = max(upper, lower)
    estimate = clamp(c0, lower, upper)
    tolerance = residual + abs(c0 - c0_all)
    report = EstimateReport("lyapunov", estimate, lower, upper, ["l1-weighted-radius", "inverse-p-fit"],
                            {"p_log_radius": values},
                            params={"n_max": n_max, "weight": omega.spec, "route": "radius", "p_grid": p_grid},
                            tolerances={"fit": tolerance})
    if not values.is_monotone(increasing=False, slack=rules.monotone_slack):
        report.flag("p log r is not non-increasing on the grid")
    logger.info(f"{mu.group}: Lyapunov exponent of {omega.spec} {estimate:.6f} (radius route)")
    return report


def weighted_shannon_limit(mu: SparseMeasure, omega: Weight, p_grid=None, rules: LabRules = DEFAULT) -> EstimateReport:
    """H_omega(mu) as the limit of the non-decreasing -p log ||mu||_{q, omega_p}."""
    p_grid = sorted(rules.p_grid_closed_form if p_grid is None else p_grid)
    values = AsymptoticSequence(IndexKind.Exponent, name="weighted_renyi")
    for p in p_grid:
        values.append(p, -p * log_weighted_lq_norm(mu, utils.conjugate(p), omega.power(p), rules))
    c0, _, residual = values.fit_inverse_p()
    closed_form = weighted_shannon_entropy(mu, omega, rules)
    lower = values.last
    estimate = max(c0, lower)
    report = EstimateReport("weighted_shannon_entropy", estimate, lower, None, ["weighted-renyi", "inverse-p-fit"],
                            {"weighted_renyi": values}, params={"weight": omega.spec, "p_grid": p_grid},
                            tolerances={"fit_residual": residual},
                            diagnostics={"closed_form": closed_form, "error": abs(estimate - closed_form)})
    if not values.is_monotone(increasing=True, slack=rules.monotone_slack):
        report.flag("-p log ||mu||_{q,omega_p} is not non-decreasing on the grid")
    return report


def weighted_avez_entropy(mu: SparseMeasure, omega: Weight, n_max: int = 12, rules: LabRules = DEFAULT,
                          workers=1, progress=False) -> EstimateReport:
    """h_omega from H_omega(mu^{*n}) directly, next to h - Ly_omega from the unweighted pieces."""
    weighted = AsymptoticSequence(IndexKind.Step, name="weighted_entropy")
    entropies = AsymptoticSequence(IndexKind.Step, subadditive=True, name="entropy")
    sums = AsymptoticSequence(IndexKind.Step, name="log_moment_sum")
    defect = 0.0
    for n, power in _progress(iter_powers(mu, n_max, rules, workers=workers), n_max, progress, "weighted"):
        h_n, s_n, hw_n = shannon_entropy(power, rules), log_moment(power, omega, rules), \
            weighted_shannon_entropy(power, omega, rules)
        entropies.append(n, h_n)
        sums.append(n, s_n)
        weighted.append(n, hw_n)
        defect = max(defect, abs(hw_n - (h_n - s_n)) / max(1.0, abs(h_n), abs(s_n)))
    direct, method = _entropy_point(weighted, rules)
    h, _ = _entropy_point(entropies, rules)
    ly = sums.last_difference() if len(sums) >= 2 else sums.last
    report = EstimateReport("weighted_avez_entropy", direct, None, None, ["weighted-entropy-powers", method],
                            {"weighted_entropy": weighted, "entropy": entropies, "sums": sums},
                            params={"n_max": n_max, "weight": omega.spec},
                            tolerances={"identity": 1e-9},
                            diagnostics={"difference_route": h - ly, "h": h, "lyapunov": ly,
                                         "identity_defect": defect})
    if defect > 1e-9:
        report.flag(f"H_omega = H - sum mu log omega fails by {defect:.3g}")
    return report


def _entropy_reach(mu: SparseMeasure, n_max: int, rules: LabRules) -> int:
    if mu.group.family is Family.Free and mu.is_radial():
        return n_max
    return min(n_max, rules.sparse_steps)


def convolution_entropy(mu: SparseMeasure, p_grid=None, n_max: int = 2000, d: float | None = None,
                        h_steps: int = 12, rules: LabRules = DEFAULT, workers=1, progress=False) -> EstimateReport:
    """c(G, mu) = lim_p -p log r_{PF_q}(mu), q conjugate to p.

    Per p the value is -p log max(||mu^{*N}||_q^(1/N), Følner bound) at the largest reached N,
    non-decreasing in p at fixed N. On RD groups -p log of the weighted upper radius gives the
    lower bracket, and the Fekete bound on h caps c from above.
    """
    p_grid = sorted(rules.p_grid if p_grid is None else p_grid)
    d = rules.rd_degree if d is None else d
    rd = mu.group.rd_capable
    qs = [utils.conjugate(p) for p in p_grid]
    polynomial = PolynomialWeight(d)
    lq_logs = {p: [] for p in p_grid}
    rd_logs = {p: [] for p in p_grid}
    sweep_info: dict = {}
    for n, power in _progress(power_sweep(mu, n_max, rules, sweep_info, workers), n_max, progress, "norms"):
        sweep_info["last_n"] = n
        for p, q in zip(p_grid, qs):
            lq_logs[p].append((n, log_lq_norm(power, q, rules)))
            if rd:
                rd_logs[p].append((n, log_weighted_lq_norm(power, q, polynomial.power(p), rules)))
    folner = None
    if mu.group.amenable and mu.is_symmetric():
        folner, info = folner_lower(mu, n_max, rules)
        sweep_info["folner"] = info | {"bound": folner}

    per_p = AsymptoticSequence(IndexKind.Exponent, name="per_p")
    brackets = AsymptoticSequence(IndexKind.Exponent, name="rd_lower_bracket")
    for p in p_grid:
        last_n, last_log = lq_logs[p][-1]
        radius = math.exp(last_log / last_n)
        if folner is not None:
            radius = max(radius, folner)
        per_p.append(p, -p * math.log(radius))
        if rd:
            root, ratio = root_and_ratio(rd_logs[p], "rd")
            r_up, _ = headline(root, ratio, rules)
            brackets.append(p, max(0.0, -p * math.log(min(r_up, 1.0))))

    h_report = avez_entropy(mu, _entropy_reach(mu, h_steps, rules), rules=rules, workers=workers)
    upper = h_report.upper
    lower = min(max(brackets.values.max(), 0.0), upper) if rd else 0.0
    c0, _, residual = per_p.fit_inverse_p()
    estimate = clamp(max(c0, 0.0), lower, upper)
    sequences = {"per_p": per_p}
    if rd:
        sequences["rd_lower_bracket"] = brackets
    report = EstimateReport("convolution_entropy", estimate, lower, upper,
                            ["lq-root", "folner" if folner is not None else "no-folner",
                             "rd-upper" if rd else "no-rd", "inverse-p-fit"],
                            sequences, params={"n_max": n_max, "p_grid": p_grid, "d": d, "h_steps": h_steps},
                            tolerances={"fit_residual": residual, "c_le_h": 0.01},
                            diagnostics={"h_estimate": h_report.estimate, "h_upper": h_report.upper,
                                         "c_le_h": estimate <= h_report.estimate + 0.01,
                                         "sweep": sweep_info})
    if not per_p.is_monotone(increasing=True, slack=rules.monotone_slack):
        report.flag("-p log r is not non-decreasing in p")
    if estimate > h_report.estimate + 0.01:
        report.flag(f"convolution entropy {estimate:.5f} above the Avez entropy {h_report.estimate:.5f}")
    logger.info(f"{mu.group}: convolution entropy {estimate:.6f} in [{lower:.6f}, {upper:.6f}]")
    return report


def _speed(mu: SparseMeasure, n_max: int, rules: LabRules) -> AsymptoticSequence:
    speeds = AsymptoticSequence(IndexKind.Step, subadditive=True, name="speed")
    for n, power in iter_powers(mu, n_max, rules):
        speeds.append(n, speed_term(power, rules))
    return speeds


def fundamental_inequality_report(mu: SparseMeasure, weights: list[Weight] = (), n_max: int = 12,
                                  rules: LabRules = DEFAULT) -> EstimateReport:
    """Slack of h <= v_S * l, and of Ly_omega <= log(omega_S) * l for every given weight."""
    group = mu.group
    reach = _entropy_reach(mu, n_max, rules)
    h_report = avez_entropy(mu, reach, rules=rules)
    speeds = _speed(mu, reach, rules)
    speed = max(0.0, speeds.last_difference() if len(speeds) >= 2 else speeds.last)
    r_max = min(12, rules.bfs_radius_cap) if group.family is Family.Lamplighter else 60
    v_s = volume_growth(group, r_max, rules).extrapolation["growth_fit"]
    slack = v_s * speed - h_report.estimate
    checks = []
    for omega in weights:
        ly = lyapunov_direct(mu, omega, reach, rules).estimate
        bound = math.log(growth_rate(omega, group, r_max, rules)) * speed
        checks.append({"weight": omega.spec, "lyapunov": ly, "bound": bound, "slack": bound - ly})
    report = EstimateReport("fundamental_inequality", slack, None, None, ["avez-entropy", "speed", "volume-growth"],
                            {"entropy": h_report.sequence, "speed": speeds},
                            params={"n_max": reach, "weights": [w.spec for w in weights]},
                            tolerances={"slack": 0.02},
                            diagnostics={"h": h_report.estimate, "v_S": v_s, "speed": speed,
                                         "bound": v_s * speed, "weights": checks})
    if slack < -0.02:
        report.flag(f"h = {h_report.estimate:.5f} exceeds v_S * l = {v_s * speed:.5f}")
    for check in checks:
        if check["slack"] < -0.02:
            report.flag(f"Lyapunov exponent of {check['weight']} exceeds log(omega_S) * l")
    return report


def _sample_weights(mu: SparseMeasure, n_terms: int, rules: LabRules) -> list[tuple[Weight, int, float]]:
    """Weights with summable inverse, each with the step it is evaluated at and log ||1/omega||_1."""
    samples = []
    for n in sorted({n_terms, max(1, n_terms // 2)}):
        omega = build_inverse_series_weight(mu, n, rules=rules)
        samples.append((omega, n, math.log(omega.inverse_l1_norm())))
    group = mu.group
    if group.family is Family.Free:
        rate = math.log(2 * group.param - 1) + 0.1
        k = group.param
        # sum over spheres of |S_r| e^{-rate r}
        q = (2 * k - 1) * math.exp(-rate)
        norm = 1 + 2 * k * math.exp(-rate) / (1 - q)
        samples.append((ExponentialWeight(rate=rate), n_terms, math.log(norm)))
    return samples


def inverse_series_report(mu: SparseMeasure, n_terms: int = 8, rules: LabRules = DEFAULT) -> EstimateReport:
    """The weight with inverse sum mu^{*n}/n^3: domination of its inverse, the 3 log n band
    S_n <= H(mu^{*n}) + 3 log n, and the Gibbs bound Ly_omega >= h for summable inverses."""
    omega_bar = build_inverse_series_weight(mu, n_terms, rules=rules)
    domination = verify_convolution_domination(omega_bar, rules)
    entropies = AsymptoticSequence(IndexKind.Step, subadditive=True, name="entropy")
    sums = AsymptoticSequence(IndexKind.Step, name="log_moment_sum")
    log_z = math.log(omega_bar.inverse_l1_norm())
    band_ok, gibbs_ok = True, True
    for n, power in iter_powers(mu, n_terms, rules):
        h_n, s_n = shannon_entropy(power, rules), log_moment(power, omega_bar, rules)
        entropies.append(n, h_n)
        sums.append(n, s_n)
        band_ok &= s_n <= h_n + omega_bar.exponent * math.log(n) + 1e-9
        gibbs_ok &= gibbs_slack(power, omega_bar, log_z, rules) >= -1e-9
    h = avez_entropy(mu, n_terms, rules=rules).estimate
    samples = []
    for omega, n, log_norm in _sample_weights(mu, n_terms, rules):
        for m, power in iter_powers(mu, n, rules):
            pass
        samples.append({"weight": omega.spec, "step": n, "lyapunov": log_moment(power, omega, rules) / n,
                        "log_inverse_norm": log_norm})
    ly_bar = sums.last / n_terms
    min_ly = min(s["lyapunov"] for s in samples)
    band = omega_bar.exponent * math.log(n_terms) / n_terms
    report = EstimateReport("inverse_series_lyapunov", ly_bar, None, None,
                            ["inverse-series-weight", "domination", "gibbs"],
                            {"sums": sums, "entropy": entropies},
                            params={"n_terms": n_terms, "exponent": omega_bar.exponent},
                            tolerances={"gibbs": 0.05, "band": band},
                            diagnostics={"domination": domination.to_dict(), "h": h, "band_ok": band_ok,
                                         "gibbs_ok": gibbs_ok, "samples": samples,
                                         "min_lyapunov_ok": min_ly >= h - 0.05,
                                         "band_vs_h_ok": ly_bar <= h + band})
    if not band_ok:
        report.flag("S_n exceeds H(mu^{*n}) + 3 log n")
    if not gibbs_ok:
        report.flag("Gibbs inequality H <= S + log ||1/omega||_1 fails")
    if domination.within is False:
        report.flag(f"domination ratio {domination.max_ratio:.4f} above {domination.bound:.4f}")
    return report
