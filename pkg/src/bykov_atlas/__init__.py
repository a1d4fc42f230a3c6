"""Numerics near a volume-preserving heteroclinic cycle between two saddle-foci.

Covers the section maps and their return map, reversal and tangency scans, fixed
points with their spectra, and time-delay profiles of 3-D flows."""

__version__ = "0.1.0"
