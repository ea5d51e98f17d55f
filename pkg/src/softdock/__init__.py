"""Closed-loop rendezvous and soft-docking simulation with robust pole assignment."""

__version__ = "0.1.0"
