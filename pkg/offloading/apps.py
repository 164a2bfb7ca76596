from django.apps import AppConfig


class OffloadingConfig(AppConfig):
    name = 'offloading'
    verbose_name = 'Edge computer task offloading'
