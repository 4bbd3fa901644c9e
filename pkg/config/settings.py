import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-dev-key-change-in-production')
DEBUG = os.getenv('DEBUG', 'False').lower() in ('true', '1', 'yes')

INSTALLED_APPS = [
    'rest_framework',
    'conelab',
]

REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    # serializers only; no django.contrib.auth behind it
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

# Logging goes to stderr; stdout carries the JSON/CSV documents
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {'format': '%(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'conelab': {
            'handlers': ['console'],
            'level': os.getenv('CONE_LAB_LOG_LEVEL', 'WARNING').upper(),
            'propagate': False,
        },
    },
}

# Cone lab numerics
CONE_LAB_JOBS = int(os.getenv('CONE_LAB_JOBS', '1') or 1)
CONE_LAB_GRID_NODES = int(os.getenv('CONE_LAB_GRID_NODES', '400'))
CONE_LAB_T_MIN = float(os.getenv('CONE_LAB_T_MIN', '1e-6'))
CONE_LAB_MODES = int(os.getenv('CONE_LAB_MODES', '6'))
SCHEMA_DIR = BASE_DIR / 'schemas'
