"""From-scratch CNN framework and training pipeline for grayscale brain-scan
classification (PD / MSA / Normal) on synthetic phantoms."""

__version__ = "0.1.0"
