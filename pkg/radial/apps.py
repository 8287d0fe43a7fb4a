from django.apps import AppConfig


class RadialConfig(AppConfig):
    name = "radial"
    verbose_name = "Радиальная сетка и поля"
