from ground.services import ground_level, mass_frequency, rescale_to_mass, solve_unit_ground
from runner.management.commands._base import SCALAR_FLAGS, SolverCommand, csv_floats


class Command(SolverCommand):
    help = "Unit ground state of -Δw + w = μ|w|^(p-2)w by shooting; optional rescaling to masses."
    name = "ground"
    problem_flags = SCALAR_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--masses", type=csv_floats, default=None, help="e.g. 0.5,1,2")

    def command_overrides(self, options):
        return {"masses": options["masses"]} if options.get("masses") else {}

    def perform(self, cfg, tree):
        problem = cfg.scalar
        lambdas = [mass_frequency(problem, a) for a in cfg.masses]
        grid = cfg.grid.for_scalar(problem, lambdas + [1.0])
        gs = solve_unit_ground(problem, grid, cfg.tol)
        tree.field("w", gs.w)

        rescaled = []
        for a in cfg.masses:
            lam, u = rescale_to_mass(gs, a, grid)
            tree.field(f"u_a{a:g}", u)
            rescaled.append({"a": a, "lambda": lam, "m": ground_level(gs, a)})

        payload = {
            "problem": problem.model_dump(),
            "grid": {"dim": grid.dim, "nodes": grid.size, "r_max": grid.r_max},
            "shoot_value": gs.shoot_value,
            "mass_w": gs.mass_w,
            "grad_w": gs.grad_w,
            "plevel_w": gs.plevel_w,
            "level_w": gs.level_w,
            "pairing_defect": gs.pairing_defect,
            "pohozaev_defect": gs.pohozaev_defect,
            "masses": rescaled,
        }
        tree.json("solution", payload)
        return payload, True
