from django.apps import AppConfig


class ProbabilisticConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "probabilistic"
    verbose_name = "Energy distributions"
