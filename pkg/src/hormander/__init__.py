"""Hoermander-condition toolkit: bracket machinery, SDE flows with Jacobians,
discrete Malliavin calculus, Malliavin-matrix statistics and Norris-lemma
experiments."""

__version__ = "0.1.0"
