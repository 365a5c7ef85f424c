from django.apps import AppConfig


class FeaturesetsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'featuresets'
