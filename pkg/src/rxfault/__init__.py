"""Image-based fault location on a two-source transmission line.

Simulate single-line-to-ground faults under three transformer grounding
schemes, turn the distance relay's R-X locus into a grayscale image, reduce it
to mean/std statistics and regress the fault distance with a cascade-forward
network (or an epsilon-SVR baseline).
"""

__version__ = "0.1.0"
