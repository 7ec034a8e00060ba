"""synlin: transition-based syntactic linearization.

Given an unordered bag of words, the toolkit recovers a surface order by
incrementally building a dependency tree with shift/reduce actions scored
by a feed-forward network, optionally combined with a multi-layer LSTM
language model, and decoded by greedy or beam search.
"""

__version__ = "0.1.0"
