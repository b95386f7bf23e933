"""Connection tableau proofs, proof-path training data, and recurrent
clause-selection guidance."""

__version__ = "0.1.0"
