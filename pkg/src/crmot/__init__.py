"""Simulation toolkit for Zeeman-slowed, magneto-optically trapped chromium isotopes."""

from .atomic import AtomicSpecies, Level, TransitionLine, load_species_data, species_by_name

__version__ = "0.1.0"

__all__ = ["AtomicSpecies", "Level", "TransitionLine", "load_species_data", "species_by_name"]
