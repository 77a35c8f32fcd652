# NCS Rate Bounds
