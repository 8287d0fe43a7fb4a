class SolverError(Exception):
    """Базовая ошибка всех модулей решателя."""


class StructuralError(SolverError, ValueError):
    """Несовпадение длин массивов, разных сеток, слишком мало узлов."""


class NumericError(SolverError, ArithmeticError):
    """Нечисловые значения (nan / inf) во входных данных."""


class ResolutionError(SolverError):
    """Поле не разрешается сеткой (слишком узкое или слишком широкое)."""


class NoBracketError(SolverError):
    """Shooting: не удалось найти вилку для бисекции по w(0)."""


class ConfigurationError(SolverError, ValueError):
    """Недопустимые параметры или режим, не подходящий для решателя."""


class RegimeError(SolverError):
    """Пустой допустимый интервал для показателя q в пороговой функции c(u1)."""


class GeometryError(SolverError):
    """Не удалось построить путь с нужными концевыми условиями."""
