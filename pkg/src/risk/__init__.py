"""Encrypted rich spatial-keyword queries over a keyed kNN quadtree."""
__version__ = "0.1.0"
