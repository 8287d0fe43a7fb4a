from ground.services import level_curve, mass_frequency
from runner.management.commands._base import SCALAR_FLAGS, SolverCommand, csv_floats


class Command(SolverCommand):
    help = "Ground state level m(a) and frequency λ_a over a list of masses."
    name = "level-curve"
    problem_flags = SCALAR_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--masses", type=csv_floats, default=None, help="ascending, e.g. 0.5,1,2,4")

    def command_overrides(self, options):
        return {"masses": options["masses"]} if options.get("masses") else {}

    def perform(self, cfg, tree):
        problem = cfg.scalar
        lambdas = [mass_frequency(problem, a) for a in cfg.masses]
        grid = cfg.grid.for_scalar(problem, lambdas)
        table = level_curve(problem, grid, list(cfg.masses), tol=cfg.tol, jobs=cfg.jobs)
        tree.table("level_curve", table)
        payload = {
            "problem": problem.model_dump(),
            "kappa": problem.kappa,
            "rows": table,
        }
        tree.json("solution", payload)
        return payload, True
