"""Pulse/no-pulse classification of CPR pauses from ECG and chest accelerometry."""

__version__ = "0.1.0"
