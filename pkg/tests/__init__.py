# Tests for NCS Rate Bounds
