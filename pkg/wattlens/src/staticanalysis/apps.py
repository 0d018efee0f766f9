from django.apps import AppConfig


class StaticAnalysisConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "staticanalysis"
    verbose_name = "Static energy analysis"
