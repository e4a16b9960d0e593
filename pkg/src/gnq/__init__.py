"""Guarded-negation query toolkit: GNFO/GNFP logic, relational algebra,
SQL and Datalog front ends, open-world query answering and hardness
reductions."""

__version__ = "0.1.0"
