"""Multi-stage dual-path BiLSTM speech separation, desk scale."""

__version__ = "0.1.0"
