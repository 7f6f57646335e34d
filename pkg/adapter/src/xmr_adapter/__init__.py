"""Embedder process for pretrained dual-encoder checkpoints.

Serves image and text embeddings over the length-prefixed JSON protocol on
standard streams, so a benchmark harness can score real models without
linking their ecosystems. Inference is deterministic: models run in eval
mode with no sampling.
"""

__version__ = "0.1.0"
