# utils/__init__.py

"""
Utility modules for the optical neural network simulator.

Modules:
- logging_config: Configures logging for the experiment scripts.
- dataset_utils: MNIST IDX parsing, downsampling and seeded splits
- optics_utils: Simulated optical matrix-vector multiplier
- network_utils: Optical network architectures, forward and backward passes
- trainer_utils: Hybrid and in silico training, evaluation and noise sweeps
- file_utils: Configuration, manifest, CSV and checkpoint files
"""

__version__ = "1.0.0"
