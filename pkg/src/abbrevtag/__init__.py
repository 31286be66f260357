"""Token-classification toolkit for medical abbreviation disambiguation."""

__version__ = "0.1.0"
