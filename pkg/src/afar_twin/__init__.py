"""Digital-twin toolkit for UAV-based RF source localisation."""
__version__ = "0.1.0"
