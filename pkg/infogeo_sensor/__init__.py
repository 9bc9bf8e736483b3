"""infogeo_sensor — Information-geometric sensor management for bearings-only localization."""

__version__ = "0.1.0"
