from __future__ import annotations

import logging
from argparse import ArgumentTypeError

from django.core.management.base import BaseCommand, CommandError

from radial.exceptions import ConfigurationError, SolverError
from runner.config import RunConfig, build_config, dump_config, read_toml
from runner.writers import OutputTree, dumps_json

logger = logging.getLogger(__name__)

# флаг -> путь в RunConfig
SCALAR_FLAGS = {"N": ("scalar", "dim"), "p": ("scalar", "p"), "mu": ("scalar", "mu")}
SYSTEM_FLAGS = {
    name: ("system", "dim" if name == "N" else name)
    for name in ("N", "p1", "p2", "r1", "r2", "mu1", "mu2", "beta", "a1", "a2")
}


def csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def grid_flag(text: str) -> dict:
    """'auto' или 'M,r_max', например 8192,30."""
    if text.strip() == "auto":
        return {"auto": True}
    nodes, _, r_max = text.partition(",")
    try:
        return {"nodes": int(nodes), "r_max": float(r_max)}
    except ValueError:
        raise ArgumentTypeError(f"expected 'auto' or 'M,r_max', got {text!r}") from None


class SolverCommand(BaseCommand):
    """
    Общая часть команд: --config + флаги -> RunConfig, эффективный конфиг в outdir,
    JSON-сводка в stdout.

    Коды выхода: 0: успех, 1: решатель не справился, 2: ошибка конфигурации.
    """
    name = ""
    problem_flags: dict = {}
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--config", "--params", dest="config", type=str, default=None, help="TOML file")
        parser.add_argument("--outdir", type=str, default=None)
        parser.add_argument("--jobs", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--tol", type=float, default=None)
        parser.add_argument("--nodes", type=str, default=None, help='node count or "uniform(M)"')
        parser.add_argument("--r-max", dest="r_max", type=float, default=None)
        parser.add_argument("--grid", type=grid_flag, default=None, help='"auto" or "M,r_max"')
        for flag in self.problem_flags:
            parser.add_argument(f"--{flag}", type=int if flag == "N" else float, default=None)
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def command_overrides(self, options) -> dict:
        return {}

    def overrides(self, options) -> dict:
        data: dict = {}
        for flag, (table, key) in self.problem_flags.items():
            if options.get(flag) is not None:
                data.setdefault(table, {})[key] = options[flag]
        for key in ("outdir", "jobs", "seed", "tol"):
            if options.get(key) is not None:
                data[key] = options[key]
        grid = {}
        if options.get("nodes") is not None:
            grid["nodes"] = options["nodes"]
        if options.get("r_max") is not None:
            grid["r_max"] = options["r_max"]
        if options.get("grid"):
            grid.update(options["grid"])
        if grid:
            data["grid"] = grid
        data.update(self.command_overrides(options))
        return data

    def load_config(self, options) -> RunConfig:
        file_data = read_toml(options["config"]) if options.get("config") else {}
        file_data.pop("command", None)
        return build_config(self.name, file_data, self.overrides(options))

    def perform(self, cfg: RunConfig, tree: OutputTree) -> tuple[dict, bool]:
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            cfg = self.load_config(options)
            tree = OutputTree(cfg.outdir)
            tree.config(dump_config(cfg))
            payload, ok = self.perform(cfg, tree)
        except (ConfigurationError, OSError) as e:
            raise CommandError(str(e), returncode=2) from e
        except SolverError as e:
            logger.error("%s failed: %s", self.name, e)
            raise CommandError(f"{type(e).__name__}: {e}", returncode=1) from e

        self.stdout.write(dumps_json(payload), ending="")
        if not ok:
            raise CommandError(f"{self.name}: {payload.get('message') or 'solver did not succeed'}", returncode=1)
        self.stderr.write(self.style.SUCCESS(f"Done. Output in {tree.root}"))
