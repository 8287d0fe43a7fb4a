import json
import tempfile
from io import StringIO
from math import sqrt
from pathlib import Path
from unittest import mock

import numpy as np
from django.conf import settings
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase

from energy.domain import Regime, RegimeTag, State
from flow.domain import Solution
from flow.services import decoupled_level
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError
from runner.checks import run_checks
from runner.cli import run
from runner.config import build_config, dump_config, parse_config, read_toml
from runner.writers import OutputTree, atomic_write_text, dumps_json, jsonable, table_to_csv

CONFIGS = Path(settings.BASE_DIR) / "configs"

SUBCRITICAL = {"dim": 3, "p1": 2.5, "p2": 2.5, "r1": 1.2, "r2": 1.2, "beta": 1.0}


class ConfigTests(SimpleTestCase):
    def test_round_trip(self):
        cfg = build_config("minimize", {
            "system": SUBCRITICAL,
            "grid": {"nodes": "uniform(2048)", "r_max": 40.0},
            "flow": {"restarts": 2, "initializers": ["ground_pair"]},
            "seed": 7,
        })
        self.assertEqual(cfg.grid.nodes, 2048)
        text = dump_config(cfg)
        again = parse_config(text)
        self.assertEqual(again, cfg)
        self.assertEqual(dump_config(again), text)

    def test_flags_win(self):
        cfg = build_config(
            "minimize",
            {"system": SUBCRITICAL, "grid": {"nodes": 1024, "r_max": 30.0}},
            {"system": {"beta": 2.0}, "grid": {"nodes": "uniform(512)"}},
        )
        self.assertEqual(cfg.system.beta, 2.0)
        self.assertEqual(cfg.system.p1, 2.5)
        self.assertEqual(cfg.grid.nodes, 512)
        self.assertEqual(cfg.grid.r_max, 30.0)

    def test_rejections(self):
        bad = [
            ("minimize", {"system": {**SUBCRITICAL, "p1": 7.0}}),
            ("minimize", {}),
            ("ground", {"system": SUBCRITICAL}),
            ("mountain-pass", {"system": SUBCRITICAL}),
            ("sweep", {"system": {**SUBCRITICAL, "p1": 4.0, "p2": 4.0, "r1": 2.0, "r2": 2.0}}),
            ("minimize", {"system": SUBCRITICAL, "grid": {"nodes": "uniform(many)"}}),
            ("minimize", {"system": SUBCRITICAL, "unknown": 1}),
            ("plot", {"system": SUBCRITICAL}),
        ]
        for command, data in bad:
            with self.subTest(command=command, data=data):
                with self.assertRaises(ConfigurationError):
                    build_config(command, data)

    def test_malformed_toml(self):
        with self.assertRaises(ConfigurationError):
            parse_config("command = \n")
        with self.assertRaises(ConfigurationError):
            read_toml("/nonexistent/config.toml")

    def test_shipped_configs(self):
        for name, command in (("subcritical", "minimize"), ("mixed", "mountain-pass"), ("supercritical", "sweep")):
            with self.subTest(config=name):
                data = read_toml(CONFIGS / f"{name}.toml")
                self.assertEqual(data.pop("command"), command)
                cfg = build_config(command, data)
                self.assertEqual(cfg.system.dim, 3)

    def test_mixed_config_has_negative_level(self):
        data = read_toml(CONFIGS / "mixed.toml")
        cfg = build_config(data.pop("command"), data)
        self.assertLess(decoupled_level(cfg.system), 0.0)


class WriterTests(SimpleTestCase):
    def test_atomic_write(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = atomic_write_text(Path(tmp) / "a" / "b.txt", "x")
            self.assertEqual(path.read_text(), "x")
            atomic_write_text(path, "y")
            self.assertEqual(path.read_text(), "y")
            self.assertEqual(sorted(p.name for p in path.parent.iterdir()), ["b.txt"])

    def test_json_precision(self):
        value = 0.1 + 0.2
        data = json.loads(dumps_json({"x": value, "y": np.float64(1 / 3), "n": np.int64(3)}))
        self.assertEqual(data["x"], value)
        self.assertEqual(data["y"], 1 / 3)
        self.assertEqual(data["n"], 3)
        self.assertEqual(jsonable([float("nan"), float("inf"), True]), [None, None, True])

    def test_csv_digits(self):
        text = table_to_csv([{"a": 1 / 3, "ok": True, "note": None}])
        self.assertEqual(text, "a,ok,note\n0.333333333333,true,\n")

    def test_solution_tree(self):
        grid = RadialGrid.uniform(3, 64, 5.0)
        u = RadialField.from_function(grid, lambda r: np.exp(-r * r))
        solution = Solution(
            state=State(u, u),
            lambda1=-1.0,
            lambda2=-2.0,
            J_value=-0.5,
            Q_value=0.0,
            residual_norm=1e-9,
            iterations=4,
            regime=Regime(RegimeTag.SUBCRITICAL_MIN),
            converged=True,
            residuals=(1.0, 1e-3, 1e-9),
        )
        with tempfile.TemporaryDirectory() as tmp:
            tree = OutputTree(tmp)
            tree.solution(solution, extra={"route": "test"})
            data = json.loads((Path(tmp) / "solution.json").read_text())
            self.assertEqual(data["lambda2"], -2.0)
            self.assertEqual(data["route"], "test")
            self.assertEqual(data["residual_history"], [1.0, 1e-3, 1e-9])
            self.assertTrue((Path(tmp) / "fields" / "u1.csv").exists())
            self.assertTrue((Path(tmp) / "fields" / "u2.csv").exists())


class CheckSuiteTests(SimpleTestCase):
    def test_quick_passes(self):
        report = run_checks("quick", seed=3)
        self.assertTrue(report["passed"], [c for c in report["checks"] if not c["passed"]])
        names = {c["name"] for c in report["checks"]}
        self.assertTrue({"dilation_mass", "dilation_grad", "green_identity", "fiber_identity"} <= names)

    def test_deterministic(self):
        first = run_checks("quick", seed=5)
        second = run_checks("quick", seed=5)
        self.assertEqual(first, second)

    def test_perturbation_is_caught(self):
        report = run_checks("quick", seed=3, perturb={"dilation_grad": 1.0 + 1e-3})
        self.assertFalse(report["passed"])
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        self.assertEqual(failed, ["dilation_grad"])

    def test_full_passes(self):
        report = run_checks("full", seed=0)
        self.assertTrue(report["passed"], [c for c in report["checks"] if not c["passed"]])
        names = {c["name"] for c in report["checks"]}
        self.assertTrue({"sech_quartic_peak", "resampled_fiber", "gn_sharpness", "minimum_residual"} <= names)


class CommandTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def call(self, *args) -> dict:
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        return json.loads(out.getvalue())

    def test_ground(self):
        data = self.call("ground", "--N", "1", "--p", "4", "--mu", "1", "--outdir", str(self.tmp))
        self.assertAlmostEqual(data["shoot_value"], sqrt(2.0), delta=1e-5)
        for name in ("config.effective.toml", "solution.json", "fields/w.csv"):
            self.assertTrue((self.tmp / name).exists(), name)
        cfg = parse_config((self.tmp / "config.effective.toml").read_text())
        self.assertEqual(cfg.command, "ground")
        self.assertEqual(cfg.scalar.p, 4.0)

    def test_ground_is_deterministic(self):
        first, second = self.tmp / "one", self.tmp / "two"
        for outdir in (first, second):
            self.call("ground", "--N", "1", "--p", "3", "--masses", "1,2", "--outdir", str(outdir))
        self.assertEqual((first / "solution.json").read_bytes(), (second / "solution.json").read_bytes())
        self.assertTrue((first / "fields" / "u_a2.csv").exists())

    def test_level_curve(self):
        data = self.call("level_curve", "--N", "3", "--p", "3", "--masses", "0.5,1,2", "--outdir", str(self.tmp))
        self.assertEqual(len(data["rows"]), 3)
        self.assertTrue((self.tmp / "level_curve.csv").exists())

    def test_config_error_exit_code(self):
        with self.assertRaises(CommandError) as cm:
            self.call("minimize", "--N", "3", "--outdir", str(self.tmp))
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            self.call("mountain_pass", "--config", str(CONFIGS / "subcritical.toml"), "--outdir", str(self.tmp))
        self.assertEqual(cm.exception.returncode, 2)

    def test_solver_failure_exit_code(self):
        # a1 = 1: m1(a1) + m2(a2) > 0, геометрия горного перевала не строится
        with self.assertRaises(CommandError) as cm:
            self.call("mountain_pass", "--config", str(CONFIGS / "mixed.toml"), "--a1", "1", "--outdir", str(self.tmp))
        self.assertEqual(cm.exception.returncode, 1)

    def test_check_quick(self):
        data = self.call("invariants", "--quick", "--outdir", str(self.tmp))
        self.assertTrue(data["passed"])
        report = json.loads((self.tmp / "report.json").read_text())
        self.assertIn("created_at", report)
        with self.assertRaises(CommandError) as cm:
            self.call("invariants", "--quick", "--perturb", "projection_mass=1.001", "--outdir", str(self.tmp))
        self.assertEqual(cm.exception.returncode, 1)

    def test_system_check_not_shadowed(self):
        out = StringIO()
        call_command("check", stdout=out)
        self.assertIn("no issues", out.getvalue())

    def test_minimize_example(self):
        data = self.call("minimize", "--config", str(CONFIGS / "subcritical.toml"), "--outdir", str(self.tmp))
        self.assertTrue(data["converged"], data["message"])
        self.assertLess(data["lambda1"], 0.0)
        self.assertLess(data["lambda2"], 0.0)
        self.assertTrue((self.tmp / "runs.csv").exists())


class RunTests(SimpleTestCase):
    def test_unknown_subcommand(self):
        self.assertEqual(run(["plot"]), 2)
        self.assertEqual(run([]), 2)

    def test_unknown_flag(self):
        self.assertEqual(run(["ground", "--bogus"]), 2)

    def test_check_exit_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(run(["check", "--quick", "--outdir", tmp]), 0)

    def test_unexpected_errors_become_exit_codes(self):
        target = "runner.management.commands.ground.Command.perform"
        argv = ["ground", "--N", "1", "--p", "4"]
        with tempfile.TemporaryDirectory() as tmp:
            with mock.patch(target, side_effect=RuntimeError("boom")), self.assertLogs("runner.cli", "ERROR"):
                self.assertEqual(run([*argv, "--outdir", tmp]), 1)
            with mock.patch(target, side_effect=PermissionError("read-only outdir")):
                self.assertEqual(run([*argv, "--outdir", tmp]), 2)

    def test_bad_flag_values(self):
        self.assertEqual(run(["ground", "--N", "1", "--p", "4", "--grid", "many"]), 2)
        self.assertEqual(run(["level-curve", "--N", "1", "--p", "3", "--masses", "1,x"]), 2)

    def test_params_and_grid_flags(self):
        with tempfile.TemporaryDirectory() as tmp:
            code = run([
                "level-curve", "--params", str(CONFIGS / "subcritical.toml"),
                "--N", "1", "--p", "3", "--masses", "1,2", "--grid", "2048,30", "--outdir", tmp,
            ])
            self.assertEqual(code, 0)
            cfg = parse_config((Path(tmp) / "config.effective.toml").read_text())
            self.assertEqual((cfg.grid.nodes, cfg.grid.r_max), (2048, 30.0))
