from flow.services import global_min_estimate
from runner.management.commands._base import SYSTEM_FLAGS, SolverCommand


class Command(SolverCommand):
    help = "Global minimizer of J on S(a1) x S(a2) by multi-start normalized gradient flow."
    name = "minimize"
    problem_flags = SYSTEM_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--restarts", type=int, default=None)
        parser.add_argument("--max-iters", dest="max_iters", type=int, default=None)

    def command_overrides(self, options):
        flow = {key: options[key] for key in ("restarts", "max_iters") if options.get(key) is not None}
        return {"flow": flow} if flow else {}

    def perform(self, cfg, tree):
        params = cfg.system
        grid = cfg.grid.for_system(params)
        opts = cfg.flow.model_copy(update={"seed": cfg.seed, "jobs": cfg.jobs, "tol": cfg.tol})
        result = global_min_estimate(params, grid, opts)

        tree.table("runs", [run.summary() for run in result.runs])
        extra = {"energy_spread": result.energy_spread, "runs": len(result.runs)}
        tree.solution(result.best, extra=extra)
        payload = {**result.best.summary(), **extra}
        return payload, result.converged
