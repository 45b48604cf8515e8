"""Dilute-limit BCS pair dynamics against the Gross-Pitaevskii equation."""

__version__ = "0.1.0"
