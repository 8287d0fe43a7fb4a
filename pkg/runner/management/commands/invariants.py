from runner.checks import FULL, QUICK, run_checks
from runner.management.commands._base import SolverCommand


def perturbation(text: str) -> tuple[str, float]:
    name, _, factor = text.partition("=")
    return name.strip(), float(factor)


class Command(SolverCommand):
    help = "Invariant check suite; writes report.json."
    name = "check"

    def add_command_arguments(self, parser):
        level = parser.add_mutually_exclusive_group()
        level.add_argument("--quick", dest="level", action="store_const", const=QUICK)
        level.add_argument("--full", dest="level", action="store_const", const=FULL)
        # name=factor: умножает измеренную норму проверки name на factor
        parser.add_argument("--perturb", type=perturbation, action="append", default=None)

    def command_overrides(self, options):
        return {"level": options["level"]} if options.get("level") else {}

    def perform(self, cfg, tree):
        report = run_checks(cfg.level, seed=cfg.seed, perturb=dict(self.perturb or ()))
        tree.report(report)
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        if failed:
            report["message"] = f"failed checks: {', '.join(failed)}"
        return report, report["passed"]

    def handle(self, *args, **options):
        self.perturb = options.get("perturb")
        return super().handle(*args, **options)
