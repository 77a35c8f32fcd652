# Plotting for the NCS rate-bounds toolkit
