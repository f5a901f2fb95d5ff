from django.apps import AppConfig


class HostilityConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'hostility'
    verbose_name = 'Hostile intent detection'
