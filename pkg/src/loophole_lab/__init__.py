"""Local hidden-variable ("chaotic ball") simulator for detection-loophole studies."""

__version__ = "0.1.0"
