"""Simulated entanglement classification of Werner-like photon pairs.

Two-qubit state algebra with PPT labels, shot-noise measurement and
tomography simulation, a noisy time-mixing source, and linear / one-hidden-
layer classifiers trained on four correlators.
"""

__version__ = "0.1.0"
