# Data models for the NCS rate-bounds toolkit
