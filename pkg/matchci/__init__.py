"""Matching-task error rates with dependence-aware confidence intervals."""

from matchci.config.settings import SYSTEM_CONFIG

__version__ = SYSTEM_CONFIG["version"]
