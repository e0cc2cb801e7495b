"""Sketch-to-normal-map generation with curvature-guided point hints.

Pipeline: render analytic shapes to ground-truth normal maps, derive
curvature-band hint masks, train a conditional WGAN (U-Net generator and
U-Net critic) on sketch+mask inputs, and score generations with angular /
L1 / L2 metrics over the normal regions.
"""

__version__ = "0.1.0"
