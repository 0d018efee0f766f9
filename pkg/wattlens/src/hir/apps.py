from django.apps import AppConfig


class HirConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "hir"
    verbose_name = "Structured source language"
