"""Bundled example schemes referenced by the docs and the acceptance tests."""

from importlib import resources

NAMES = ("two_level.json", "raman_lambda.json", "fig1c_loop.json", "double_laser_invalid.json")


def path(name: str):
    """Filesystem path of a bundled scheme file."""
    return resources.files(__name__).joinpath(name)


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
