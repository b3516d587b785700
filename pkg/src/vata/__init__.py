"""Streetscape thermal-affordance pipeline.

Converts street-image feature vectors and pairwise-comparison survey
responses into 0-5 thermal-affordance scores, trains the two-stage
prediction (multi-task network) and inference (elastic net) models,
validates against field comfort data, and exports hexagonal maps.
"""

__version__ = "0.1.0"
