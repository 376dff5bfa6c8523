"""Monte Carlo engine for ordered Brownian lines above a wall with geometric
area tilts: Gibbs samplers, monotone couplings, the Ferrari-Spohn reference
diffusion, and the estimator harness tying them to the model's tail and
confinement laws."""

__version__ = "0.1.0"
