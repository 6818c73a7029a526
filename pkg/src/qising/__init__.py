"""Semi-discrete (1+1)D critical Ising model: sampler, correlation ladders,
discrete complex analysis and continuum predictions."""
__version__ = "0.1.0"
