import argparse
import json
import logging
from pathlib import Path
import sys

from avezlab import boundary, dlvp, estimators, report, spectra, verify
from avezlab.errors import ConfigError, LabError
from avezlab.groups import GroupDescriptor
from avezlab.labrules import LabRules
from avezlab.measures import SparseMeasure
from avezlab.sequence import EstimateReport
from avezlab.weights import parse_weight

logging.basicConfig(format='%(levelname)s: %(message)s')
logger = logging.getLogger("avezlab")


class RunConfig:
    """Everything one CLI run depends on, assembled from the flags on top of LabRules."""

    def __init__(self, group: str = "free:2", measure: str = "preset:srw", weights=(), n_max: int | None = None,
                 p_grid=None, depth: int | None = None, seed: int | None = None, support_cap: int | None = None,
                 fmt: str = "json", out: str | None = None, workers: int = 1, rules: dict | None = None,
                 progress=False):
        overrides = dict(rules or {})
        if support_cap is not None:
            overrides["element_cap"] = support_cap
        self.rules = LabRules(overrides)
        self.group = GroupDescriptor.from_spec(group)
        self.measure = SparseMeasure.from_spec(measure, self.group)
        self.weight_specs = list(weights)
        self.n_max = n_max
        self.p_grid = p_grid
        self.depth = depth
        self.seed = seed
        self.fmt = fmt
        self.out = out
        self.workers = workers
        self.progress = progress
        if n_max is not None and n_max < 1:
            raise ConfigError("--nmax has to be positive.")
        if workers < 1:
            raise ConfigError("--workers has to be positive.")

    @staticmethod
    def from_args(args: argparse.Namespace) -> "RunConfig":
        try:
            rules = json.loads(args.rules) if args.rules else None
        except json.JSONDecodeError as err:
            raise ConfigError(f"--rules is not JSON: {err}")
        return RunConfig(args.group, args.measure, getattr(args, "weight", None) or (), args.nmax,
                         _p_grid(args.p_grid), getattr(args, "depth", None), args.seed, args.support_cap,
                         args.format, args.out, args.workers, rules, args.progress)

    def weights(self):
        return [parse_weight(spec, self.measure, self.rules) for spec in self.weight_specs]

    def n(self, default: int) -> int:
        return default if self.n_max is None else self.n_max


def _p_grid(text: str | None):
    if not text:
        return None
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"Invalid p grid {text!r}, expected comma separated numbers.")


def _scalar(quantity: str, value: float, **diagnostics) -> EstimateReport:
    return EstimateReport(quantity, value, method=["exact"], diagnostics=diagnostics)


# --- subcommands ------------------------------------------------------------------------


def cmd_entropy(cfg: RunConfig, args):
    mc = None
    if cfg.seed is not None and args.mc_paths > 0:
        mc = estimators.MonteCarloConfig(cfg.seed, args.mc_paths, args.mc_steps, cfg.workers, cfg.rules)
    return estimators.avez_entropy(cfg.measure, cfg.n(12), mc, cfg.rules, cfg.workers, cfg.progress), None


def _single_weight(cfg: RunConfig):
    weights = cfg.weights()
    if len(weights) != 1:
        raise ConfigError("This subcommand needs exactly one --weight.")
    return weights[0]


def cmd_lyapunov(cfg: RunConfig, args):
    omega = _single_weight(cfg)
    reports = {}
    if args.route in ("direct", "both"):
        reports["direct"] = estimators.lyapunov_direct(cfg.measure, omega, cfg.n(2000), cfg.rules, cfg.workers,
                                                       cfg.progress)
    if args.route in ("radius", "both"):
        reports["via_radius"] = estimators.lyapunov_via_radius(cfg.measure, omega, cfg.p_grid, cfg.n(400), cfg.rules)
    extra = None
    if len(reports) == 2:
        gap = abs(reports["direct"].estimate - reports["via_radius"].estimate)
        extra = {"route_gap": gap}
        logger.info(f"routes differ by {gap:.3g}")
    return reports, extra


def cmd_weighted_entropy(cfg: RunConfig, args):
    omega = _single_weight(cfg)
    reports = {"weighted_avez": estimators.weighted_avez_entropy(cfg.measure, omega, cfg.n(12), cfg.rules),
               "weighted_shannon_limit": estimators.weighted_shannon_limit(cfg.measure, omega, cfg.p_grid,
                                                                          cfg.rules)}
    return reports, None


def cmd_conv_entropy(cfg: RunConfig, args):
    return estimators.convolution_entropy(cfg.measure, cfg.p_grid, cfg.n(2000), args.degree, args.h_steps,
                                          cfg.rules, cfg.workers, cfg.progress), None


def cmd_spectral_radius(cfg: RunConfig, args):
    mu = cfg.measure
    match args.space:
        case "l1w":
            estimate = spectra.radius_l1_weighted(mu, _single_weight(cfg), args.p, cfg.n(200), cfg.rules)
        case "pf2":
            estimate = spectra.radius_pf2_symmetric(mu, cfg.n(2000), cfg.rules)
        case "pfq-lower":
            estimate = spectra.radius_pfq_lower(mu, args.q, cfg.n(2000), cfg.rules)
        case "pfq-upper":
            estimate = spectra.radius_pfq_upper_rd(mu, args.q, args.degree, cfg.n(2000), cfg.rules)
    params = {"space": args.space, "group": mu.group.to_spec(), "n_max": cfg.n_max, "p": args.p, "q": args.q}
    return estimate.to_report(f"radius_{args.space}", params), None


def cmd_inequalities(cfg: RunConfig, args):
    reports = {"fundamental": estimators.fundamental_inequality_report(cfg.measure, cfg.weights(), cfg.n(12),
                                                                       cfg.rules)}
    if args.series_terms:
        reports["inverse_series"] = estimators.inverse_series_report(cfg.measure, args.series_terms, cfg.rules)
    return reports, None


def cmd_boundary(cfg: RunConfig, args):
    depth = cfg.depth or 1
    nu = boundary.harmonic_measure(args.k, depth, cfg.rules)
    mu = SparseMeasure.srw(nu.group) if cfg.group != nu.group else cfg.measure
    match args.quantity:
        case "xi":
            s = nu.group.parse_key(args.element)
            value = boundary.harish_chandra_xi(s, nu, max(depth, len(s), 1), cfg.rules)
            result = _scalar("harish_chandra_xi", value, element=args.element)
        case "furstenberg":
            coefficient = boundary.furstenberg_log_q(mu, nu, depth, cfg.rules)
            result = _scalar("furstenberg_entropy", boundary.furstenberg_entropy(mu, nu, depth, cfg.rules),
                             log_q_coefficient=str(coefficient), q=nu.q)
        case "xi-limit":
            result = boundary.xi_entropy_limit(mu, nu, cfg.n(2000), cfg.rules, cfg.progress)
        case "koopman":
            result = boundary.koopman_limit(mu, nu, cfg.p_grid, cfg.rules)
            if args.p is not None:
                result.diagnostics["pairing"] = boundary.koopman_pairing(mu, nu, args.p, rules=cfg.rules)
        case "koopman-norm":
            value = boundary.koopman_norm_lower(mu, nu, args.q, depth, args.iters, rules=cfg.rules)
            result = EstimateReport("koopman_norm_lower", value, method=["power-iteration"],
                                    params={"q": args.q, "depth": depth, "iters": args.iters})
    result.params |= {"k": args.k, "depth": depth}
    return result, None


def cmd_dlvp(cfg: RunConfig, args):
    mu = cfg.measure
    bundle = dlvp.build_bundle(mu, args.f, rules=cfg.rules)
    psi = dlvp.psi_checks(bundle)
    sums, bound = dlvp.integrability_sums(bundle, mu, args.f, cfg.rules)
    checks = {"psi": psi, "weak_subadditivity": dlvp.weak_subadditivity(bundle, args.grid), "M": bundle.M,
              "lambda_decreasing": dlvp.lambda_decreasing(bundle), "partial_sum_bound": bound,
              "theta_pairs": dlvp.theta_pair_check(bundle, mu.group, seed=cfg.seed or 0, rules=cfg.rules)}
    n_grid = [n for n in (1, 10, 100, 1000, 2000) if n <= cfg.n(100)]
    reports = {f"vanishing_eps_{eps:g}": dlvp.vanishing_chain(bundle, mu, n_grid, eps, cfg.rules)
               for eps in args.eps}
    reports["psi_partial_sums"] = EstimateReport("psi_partial_sums", sums.last, 0.0, bound, ["partial-sums"],
                                                 {"partial_sums": sums})
    return reports, {"bundle": bundle.to_dict(), "checks": checks}


def cmd_verify(cfg: RunConfig, args):
    results = verify.run_suite(args.suite, cfg.seed or 0, cfg.rules, not args.quick, cfg.progress)
    print(verify.summary(results, fancy=sys.stderr.isatty()), file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    extra = {"checks": [r.to_dict() for r in results], "passed": not failed, "failed": failed}
    return {}, extra


def cmd_report(cfg: RunConfig, args):
    return report.load_report(args.input), None


COMMANDS = {
    "entropy": cmd_entropy,
    "lyapunov": cmd_lyapunov,
    "weighted-entropy": cmd_weighted_entropy,
    "conv-entropy": cmd_conv_entropy,
    "spectral-radius": cmd_spectral_radius,
    "inequalities": cmd_inequalities,
    "boundary": cmd_boundary,
    "dlvp": cmd_dlvp,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--group", default="free:2", help="group spec, e.g. free:2, abelian:2, cyclic:6")
    common.add_argument("--measure", default="preset:srw", help="preset:srw, preset:lazy-srw:0.5, JSON or a file")
    common.add_argument("--nmax", type=int, default=None, help="number of steps")
    common.add_argument("--p-grid", default=None, help="comma separated exponents p")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--support-cap", type=int, default=None, help="element cap for supports and tori")
    common.add_argument("--rules", default=None, help="JSON object of rule overrides")
    common.add_argument("--format", choices=["json", "csv", "both"], default="json")
    common.add_argument("--out", default=None, help="output path stem; JSON goes to stdout without it")
    common.add_argument("--log", choices=["WARNING", "INFO", "DEBUG"], default="WARNING")
    common.add_argument("--progress", action="store_true")

    parser = argparse.ArgumentParser(prog="avezlab", description="Entropy, speed and spectral radii of random "
                                                                 "walks on groups. All values are in nats.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", parents=[common], help="Avez entropy")
    p.add_argument("--mc-paths", type=int, default=LabRules.DEFAULT_RULES["mc_paths"])
    p.add_argument("--mc-steps", type=int, default=LabRules.DEFAULT_RULES["mc_steps"])

    p = sub.add_parser("lyapunov", parents=[common], help="Lyapunov exponent of a weight")
    p.add_argument("--weight", action="append", required=True)
    p.add_argument("--route", choices=["direct", "radius", "both"], default="both")

    p = sub.add_parser("weighted-entropy", parents=[common], help="weighted Avez entropy and its Renyi limit")
    p.add_argument("--weight", action="append", required=True)

    p = sub.add_parser("conv-entropy", parents=[common], help="convolution entropy")
    p.add_argument("--degree", type=float, default=None, help="RD degree d")
    p.add_argument("--h-steps", type=int, default=12)

    p = sub.add_parser("spectral-radius", parents=[common], help="spectral radius in a convolution algebra")
    p.add_argument("--space", choices=["l1w", "pf2", "pfq-lower", "pfq-upper"], default="pf2")
    p.add_argument("--weight", action="append")
    p.add_argument("--p", type=float, default=1.0, help="weight exponent for l1w")
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--degree", type=float, default=None)

    p = sub.add_parser("inequalities", parents=[common], help="fundamental inequality and the inverse series weight")
    p.add_argument("--weight", action="append")
    p.add_argument("--series-terms", type=int, default=8)

    p = sub.add_parser("boundary", parents=[common], help="exact quantities on the boundary of F_k")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--quantity", choices=["xi", "furstenberg", "xi-limit", "koopman", "koopman-norm"],
                   default="furstenberg")
    p.add_argument("--element", default="a", help="element for xi")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--iters", type=int, default=200)

    p = sub.add_parser("dlvp", parents=[common], help="thresholds, F, M and the vanishing chain")
    p.add_argument("--f", default="log1pL", choices=sorted(dlvp.LENGTH_FUNCTIONS))
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.01])

    p = sub.add_parser("verify", parents=[common], help="run the property suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--quick", action="store_true", help="skip slow checks")

    p = sub.add_parser("report", parents=[common], help="re-emit a stored JSON report")
    p.add_argument("--input", required=True)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.getLogger("avezlab").setLevel(args.log)
    try:
        cfg = RunConfig.from_args(args)
        reports, extra = COMMANDS[args.command](cfg, args)
        if cfg.out is None:
            print(report.dumps(reports, extra, timestamp=False))
        else:
            out = Path(cfg.out)
            if not out.is_absolute():
                out = report.default_output_dir() / out
            report.emit_report(reports, cfg.fmt, out, extra)
    except LabError as err:
        print(json.dumps(err.to_dict(), sort_keys=True))
        return err.exit_code
    except (ValueError, TypeError) as err:
        err = ConfigError(str(err))
        print(json.dumps(err.to_dict(), sort_keys=True))
        return err.exit_code
    if args.command == "verify" and not extra["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())
