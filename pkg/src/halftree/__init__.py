"""Constrained coding of payloads into halftone bit matrices."""
