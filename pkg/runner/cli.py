"""
nlsnorm <subcommand> [flags]: точка входа без manage.py.

Подкоманды совпадают с management-командами приложения runner
(level-curve -> level_curve, mountain-pass -> mountain_pass,
check -> invariants: имя check занято системной проверкой Django).
"""
from __future__ import annotations

import logging
import os
import sys

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    "ground": "ground",
    "level-curve": "level_curve",
    "minimize": "minimize",
    "mountain-pass": "mountain_pass",
    "sweep": "sweep",
    "fiber": "fiber",
    "check": "invariants",
}

USAGE = f"usage: nlsnorm {{{','.join(SUBCOMMANDS)}}} [flags]"


def setup() -> None:
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    import django

    django.setup()


def run(argv: list[str] | None = None) -> int:
    """
    Код выхода: 0: успех, 1: решатель не справился или упал, 2: ошибка конфигурации или ввода-вывода.
    Исключения наружу не выходят.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE, file=sys.stderr if not argv else sys.stdout)
        return 2 if not argv else 0

    name = SUBCOMMANDS.get(argv[0])
    if name is None:
        print(f"unknown subcommand {argv[0]!r}\n{USAGE}", file=sys.stderr)
        return 2

    setup()
    from django.core.management import load_command_class

    from radial.exceptions import ConfigurationError

    try:
        command = load_command_class("runner", name)
        # argparse завершает с кодом 2, CommandError завершает с её returncode
        command.run_from_argv(["nlsnorm", argv[0], *argv[1:]])
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 2)
    except (ConfigurationError, OSError) as e:
        logger.error("%s: %s", argv[0], e)
        return 2
    except Exception:
        logger.exception("%s crashed", argv[0])
        return 1
    return 0
