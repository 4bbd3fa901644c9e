#!/usr/bin/env python
"""Launcher for the cone lab: ``python manage.py conelab <subcommand> [flags]``."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the packages in requirements.txt "
            "into the active environment first."
        ) from exc
    argv = sys.argv
    # `manage.py` with no command lists the toolkit subcommands
    if len(argv) == 1:
        argv = [argv[0], 'conelab', '--help']
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
