#!/usr/bin/env python
"""Django's command-line utility for the simulator.

    python manage.py run --config configs/small_data.json --output-dir out/
    python manage.py certify --config configs/small_data.json
    python manage.py convergence --study temporal
    python manage.py spec_dump --config configs/modal.json
"""
import os
import sys
from pathlib import Path


def _fix_settings_env():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "viscowave.settings")

    # Ensure backend directory (this file's parent) is on sys.path so that the
    # numerical packages are importable even when executed from repo root.
    backend_dir = Path(__file__).resolve().parent
    if str(backend_dir) not in sys.path:
        sys.path.insert(0, str(backend_dir))


def main():
    """Run management commands with environment fixes."""
    _fix_settings_env()
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and available on "
            "your PYTHONPATH? Did you forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":  # pragma: no cover
    main()
