"""Groupwise anti-co-occurrence testing for binary alteration matrices."""

from mutexsets.utils.constants import APP_VERSION

__version__ = APP_VERSION
