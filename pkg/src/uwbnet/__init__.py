"""Small-network RBF classifiers, adversarial attacks and robustness experiments
for key-fob zone localisation from 48 UWB channel features."""

__version__ = "0.1.0"
