"""propforge: synthetic event-camera propeller data, detection metrics and
closed-loop drone-following / landing simulation."""

__version__ = "0.1.0"
