from django.apps import AppConfig


class ConeLabConfig(AppConfig):
    name = 'conelab'
    verbose_name = 'Cone operator lab'
