import numpy as np

from energy.services import dilate_norms, fiber_energy, fiber_profile, pohozaev_rescale, state_norms
from flow.services import ground_pair
from radial.exceptions import GeometryError
from runner.management.commands._base import SYSTEM_FLAGS, SolverCommand


class Command(SolverCommand):
    help = "J and Q along the mass-preserving dilation fiber of the decoupled ground pair."
    name = "fiber"
    problem_flags = SYSTEM_FLAGS

    def add_command_arguments(self, parser):
        parser.add_argument("--s-min", dest="s_min", type=float, default=None)
        parser.add_argument("--s-max", dest="s_max", type=float, default=None)
        parser.add_argument("--count", type=int, default=None)

    def command_overrides(self, options):
        fiber = {key: options[key] for key in ("s_min", "s_max", "count") if options.get(key) is not None}
        return {"fiber": fiber} if fiber else {}

    def perform(self, cfg, tree):
        params = cfg.system
        grid = cfg.grid.for_system(params)
        state = ground_pair(params, grid)
        spec = cfg.fiber
        rows = fiber_profile(params, state, np.linspace(spec.s_min, spec.s_max, spec.count))
        tree.table("fiber", rows)

        n = state_norms(params, state)
        payload = {"rows": len(rows), "s_pohozaev": None, "J_pohozaev": None}
        try:
            s = pohozaev_rescale(params, n)
        except GeometryError as e:
            payload["message"] = str(e)
        else:
            payload["s_pohozaev"] = s
            payload["J_pohozaev"] = fiber_energy(params, n, s)
            payload["kinetic_pohozaev"] = dilate_norms(params, n, s).kinetic
        tree.json("solution", payload)
        return payload, True
