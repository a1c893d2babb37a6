"""
independence_patterns package

Bayesian posterior inference over patterns of mutual independence: set
partitions of the variables, scored by conjugate marginal likelihoods and
explored by exact enumeration or by Gibbs / two-way stochastic hill
climbing / parallel tempering chains.
"""
__version__ = "1.0.0"
