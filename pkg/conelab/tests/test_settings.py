from django.apps import apps
from django.conf import settings
from django.test import SimpleTestCase


class SettingsTests(SimpleTestCase):
    def test_no_database(self):
        # an empty DATABASES is filled with the dummy backend by django.db
        engines = {alias: config.get('ENGINE') for alias, config in settings.DATABASES.items()}
        self.assertTrue(set(engines.values()) <= {'django.db.backends.dummy'}, engines)

    def test_installed_apps(self):
        self.assertEqual(settings.INSTALLED_APPS, ['rest_framework', 'conelab'])
        self.assertFalse(apps.is_installed('django.contrib.auth'))
        self.assertFalse(apps.is_installed('django.contrib.contenttypes'))

    def test_rest_framework_needs_no_auth(self):
        self.assertIsNone(settings.REST_FRAMEWORK['UNAUTHENTICATED_USER'])
        self.assertEqual(settings.REST_FRAMEWORK['DEFAULT_AUTHENTICATION_CLASSES'], [])
