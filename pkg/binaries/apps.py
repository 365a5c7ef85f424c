from django.apps import AppConfig


class BinariesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'binaries'
