"""Local first-order logic over data structures: model checking, locality,
satisfiability reductions and bounded model search."""

__version__ = "0.1.0"
