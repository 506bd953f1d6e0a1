"""Complexity-aware adaptive token-count prediction.

Feature extraction from patch embeddings and attention maps, a small MLP
policy over a discrete menu of token counts with Gumbel-Softmax sampling,
rate/complexity training losses with hand-derived gradients, structural
token expansion, a synthetic scene generator, and retention-rate evaluation.
"""

__version__ = "0.1.0"
