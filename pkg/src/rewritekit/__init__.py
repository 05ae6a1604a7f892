"""rewritekit: data augmentation, two-phase training, and evaluation for sentence rewriting.

The package is organized around a small set of building blocks:

- ``corpus``: sentence/pair data model, tokenization, BPE, corpus file I/O
- ``ngram_lm``: interpolated Kneser-Ney language model and fluency scoring
- ``discriminator``: fluency and formality filters for augmented data
- ``augmentor``: back translation, round-trip paraphrasing, synthetic noise,
  multi-task ingestion, and size-balancing samplers
- ``edits`` / ``rewriter``: edit extraction and the count-based phrase-edit
  rewriting model used to compare training paradigms
- ``trainer``: training recipes (simultaneous vs. two-phase) and LR schedules
- ``metrics``: edit-based scoring, n-gram metrics, and n-best reranking
- ``cli``: one executable exposing the whole pipeline
"""

__version__ = "0.1.0"
