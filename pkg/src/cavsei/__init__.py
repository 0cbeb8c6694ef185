"""Photon statistics of two cavity-coupled atoms with cavity-mediated spin exchange."""

__version__ = "0.1.0"
