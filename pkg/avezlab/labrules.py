from avezlab.errors import ConfigError


class LabRules:
    """Central defaults of the lab. Every cap, grid and tolerance lives here.

    Overrides are merged on top of the defaults, unknown keys are rejected:

        rules = LabRules({"element_cap": 10_000})
        rules.element_cap  # 10000
    """

    DEFAULT_RULES = {
        # enumeration and convolution caps
        "element_cap": 5_000_000,
        "work_cap": 200_000_000,
        "exact_shadow_limit": 10_000,
        "retention_floor": 1e-17,
        "convolution_shards": 8,
        "bfs_radius_cap": 12,
        # generic sparse powers in long sweeps stop here when another certificate exists
        "sparse_steps": 10,
        # boundary cylinders, 4*3**11 for k=2 means depth 12
        "cylinder_cap": 708_588,
        "koopman_entry_cap": 20_000_000,
        # estimators
        "p_grid": (2, 4, 8, 16, 32, 64),
        "p_grid_closed_form": (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024),
        "cauchy_window": 5,
        "cauchy_tol": 1e-4,
        "h_disagreement": 0.10,
        "fit_min_terms": 8,
        "monotone_slack": 1e-9,
        "rd_degree": 2,
        "cube_exponent": 3,
        # amenable certificate
        "folner_box": 4096,
        "folner_steps": 2000,
        # monte carlo
        "mc_block": 1024,
        "mc_paths": 10_000,
        "mc_steps": 1000,
        # dlvp
        "dlvp_levels": 24,
        "dlvp_grid_step": 1e-3,
    }

    def __init__(self, override_rules: dict | None = None):
        if not override_rules:
            override_rules = {}
        unknown = set(override_rules) - set(LabRules.DEFAULT_RULES)
        if unknown:
            raise ConfigError(f"Unknown rule(s): {', '.join(sorted(unknown))}.")
        self.rules = LabRules.DEFAULT_RULES | override_rules
        for key, value in self.rules.items():
            setattr(self, key, value)
        if self.element_cap <= 0 or self.work_cap <= 0:
            raise ConfigError("Caps have to be positive.")

    def __repr__(self) -> str:
        changed = {k: v for k, v in self.rules.items() if LabRules.DEFAULT_RULES[k] != v}
        return f"LabRules({changed})"

    def depth_cap(self, k: int) -> int:
        """Largest cylinder depth whose cylinder count stays under the cap."""
        depth, count = 1, 2 * k
        while count * (2 * k - 1) <= self.cylinder_cap:
            depth += 1
            count *= 2 * k - 1
        return depth

    def override(self, **changes) -> "LabRules":
        return LabRules({k: v for k, v in self.rules.items() if LabRules.DEFAULT_RULES[k] != v} | changes)


DEFAULT = LabRules()
