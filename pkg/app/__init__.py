# Bi-objective (time, dynamic energy) tuning toolkit
