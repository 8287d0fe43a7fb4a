from minimax.services import beta_sweep, sweep_grid, sweep_jumps
from runner.management.commands._base import SYSTEM_FLAGS, SolverCommand, csv_floats


class Command(SolverCommand):
    help = "Newton continuation in β (optionally over an (a1, a2) grid) in the supercritical regime."
    name = "sweep"
    problem_flags = SYSTEM_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--betas", type=csv_floats, default=None, help="e.g. 0,0.05,0.1")
        parser.add_argument("--a1-values", dest="a1_values", type=csv_floats, default=None)
        parser.add_argument("--a2-values", dest="a2_values", type=csv_floats, default=None)

    def command_overrides(self, options):
        return {key: options[key] for key in ("betas", "a1_values", "a2_values") if options.get(key)}

    def perform(self, cfg, tree):
        params = cfg.system
        opts = cfg.minimax.model_copy(update={
            "jobs": cfg.jobs,
            "newton": cfg.minimax.newton.model_copy(update={"tol": cfg.tol}),
        })
        betas = list(cfg.betas)
        if cfg.a1_values or cfg.a2_values:
            grid = None if cfg.grid.auto else cfg.grid.for_system(params)
            rows = sweep_grid(
                params,
                list(cfg.a1_values or (params.a1,)),
                list(cfg.a2_values or (params.a2,)),
                betas,
                opts,
                grid=grid,
            )
        else:
            rows = beta_sweep(params, betas, cfg.grid.for_system(params), opts)

        tree.table("sweep", rows)
        chains: dict[tuple[float, float], list] = {}
        for row in rows:
            chains.setdefault((row.a1, row.a2), []).append(row)
        jumps = [
            {"a1": a1, "a2": a2, "beta_from": lo, "beta_to": hi}
            for (a1, a2), chain in chains.items()
            for lo, hi in sweep_jumps(chain)
        ]
        converged = sum(row.converged for row in rows)
        payload = {
            "rows": len(rows),
            "converged": converged,
            "jumps": jumps,
            "message": "" if converged else "no β value converged",
        }
        tree.json("solution", payload)
        return payload, converged > 0
