"""Threshold levels for partition ensembles with a bounded number of parts."""
