"""Multiple-measurement-vector SAR imaging and its resolution analysis."""

__version__ = "0.1.0"
