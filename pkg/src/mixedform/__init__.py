"""Mixed finite elements with forms compiled to reference-tensor contractions."""
__version__ = "0.1.0"
