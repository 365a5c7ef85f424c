from django.apps import AppConfig


class NgramsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'ngrams'
