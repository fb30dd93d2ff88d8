"""Bisectors, bounded representations and shadow boundaries in Minkowski spaces."""
