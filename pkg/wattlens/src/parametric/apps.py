from django.apps import AppConfig


class ParametricConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "parametric"
    verbose_name = "Parametric cost functions"
