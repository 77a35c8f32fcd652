# Services for the NCS rate-bounds toolkit
