from django.apps import AppConfig


class MinimaxConfig(AppConfig):
    name = "minimax"
    verbose_name = "Решения типа горного перевала"
