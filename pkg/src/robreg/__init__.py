"""Robust regression through the lens of regularization.

Worst-case losses over matrix uncertainty sets, their regularizer
equivalents, discrepancy bounds where equivalence fails, least quantile
regression by mixed-integer programming and matrix regression models.
"""

__version__ = "0.1.0"
