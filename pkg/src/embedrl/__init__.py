"""Toolkit for learning Markovian embeddings of an open qubit from projective
measurement records, and for training feedback controllers on the learned model.

Layout:
    linalg      shared dense linear algebra and the tolerance table
    spinboson   ground-truth qubit + truncated bosonic bath simulator
    embedding   learnable system + effective-reservoir channel model
    learning    likelihood recursions, analytic gradient, optimizer loop
    controller  actor-critic steering on the learned model
    config      run configuration parsing and defaults
    fileio      on-disk formats (CSV tables, JSON sidecars)
    figures     matplotlib renderings of the tabular outputs
    cli         command line entry points
"""

__version__ = "0.1.0"
