"""Simulation and verification toolkit for a random walk on random scenery.

Core layers:

- ``process``: sceneries, paths, walk positions, output generation.
- ``markers``: the 11-symbol marker word, occurrence detection, per-marker
  records, the two equivalence relations, and marker-rewrite surgery.
- ``reconstruct``: scenery recovery from outputs and record chains, and
  translate/reflection alignment of recovered sceneries.
- ``coupling``: the path flip map, conditioned-window sampling, the
  shift-and-lock coupling, and the split coupling with its statistics.
- ``scan``: streaming marker scans sized for billions of steps.
- ``experiments``: seeded trial harnesses used by the service and CLI.
- ``service`` / ``cli``: HTTP front end and its thin command-line client.
"""

__version__ = "0.1.0"
