"""covergap: spectral-gap estimation for random finite covers of hyperbolic surfaces.

The package builds the ball-indicator integral operator of a closed
hyperbolic surface (genus-2 regular octagon by default), discretizes it on a
fundamental-domain quadrature grid, twists it by uniformly random
permutation representations of the surface group, and converts the top
operator norm on the mean-zero fiber into an estimate of the first new
Laplacian eigenvalue of the corresponding random cover.
"""

__version__ = "0.1.0"
