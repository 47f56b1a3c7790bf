"""faver: lockstep co-simulation middleware for verifying candidate RTL
against high-level reference models, with rule-refined stimuli, mismatch
classification and a bounded regeneration loop."""

__version__ = "0.1.0"
