"""Prescriptive maintenance engine.

Predicts remaining useful life from multivariate sensor streams with an
attention-based forecaster (optionally federated across machines), discretizes
predicted health into a Markov decision process, and learns maintenance-action
policies with deep reinforcement learning, optionally shaped by human feedback.
"""

__version__ = "0.1.0"
