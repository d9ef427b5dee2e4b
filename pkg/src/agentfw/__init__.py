"""Centralized security firewall for generative-AI agent traffic.

One service sits between workflow clients and model upstreams: it scans and
scores every prompt and response against a versioned rule base, blocks or
quarantines threats, validates outputs for leaks, keeps a hash-chained event
log, runs scheduled audits, and adapts rule weights from operator feedback.
"""

__version__ = "0.1.0"
