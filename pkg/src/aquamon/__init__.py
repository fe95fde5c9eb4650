"""aquamon: water-quality monitoring, forecasting and supervisory control."""

__version__ = "0.1.0"
