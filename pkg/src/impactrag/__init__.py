"""Flood impact evidence synthesis: retrieval, analyst prompting, and asynchronous fusion."""

__version__ = "0.1.0"
