from minimax.services import gamma_estimate, level_threshold_a1
from runner.management.commands._base import SYSTEM_FLAGS, SolverCommand


class Command(SolverCommand):
    help = "Mountain-pass solution in the mixed regime: path maximum, B-set sample and Newton refinement."
    name = "mountain-pass"
    problem_flags = SYSTEM_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--path-nodes", dest="path_nodes", type=int, default=None)
        parser.add_argument("--s-max", dest="s_max", type=float, default=None)

    def command_overrides(self, options):
        minimax = {key: options[key] for key in ("path_nodes", "s_max") if options.get(key) is not None}
        return {"minimax": minimax} if minimax else {}

    def perform(self, cfg, tree):
        params = cfg.system
        grid = cfg.grid.for_system(params)
        opts = cfg.minimax.model_copy(update={
            "jobs": cfg.jobs,
            "newton": cfg.minimax.newton.model_copy(update={"tol": cfg.tol}),
        })
        estimate = gamma_estimate(params, grid, opts)
        path = estimate.path

        tree.table("path", [
            {"t": t, "sigma": path.sigma(t), "J": j}
            for t, j in zip(path.t_values, path.energies)
        ])
        extra = {
            "gamma_upper": estimate.gamma_upper,
            "inf_b_lower": estimate.inf_b_lower,
            "decoupled_level": estimate.decoupled_level,
            "a1_threshold": level_threshold_a1(params),
            "path_s": path.s,
            "c_low": path.c_low,
            "bracket_ok": estimate.bracket_ok,
            "route": estimate.route,
            "slack": estimate.slack,
        }
        tree.solution(estimate.solution, extra=extra)
        payload = {**estimate.solution.summary(), **extra}
        return payload, estimate.succeeded
