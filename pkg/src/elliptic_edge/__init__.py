"""Edge statistics of elliptic Ginibre ensembles: eigenvalue densities and
eigenvector self-overlaps at finite N and in the strong and weak
non-Hermiticity edge limits, with Monte Carlo drivers to compare them."""

__version__ = "0.1.0"
