"""Engine wiring, CLI and HTTP service."""
