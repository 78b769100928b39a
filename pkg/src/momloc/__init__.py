"""Calibration-free human localization from mean pixel estimators.

Submodules: classical multi-view geometry (PnP, triangulation), a
deterministic walking simulator, mean-estimator sampling, an
encoder-decoder network with a hand-written gradient engine, trajectory
metrics, and an experiment harness with a CLI.
"""

__version__ = "0.1.0"
