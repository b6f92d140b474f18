"""Unit constants used at file and configuration boundaries (SI inside)."""

FT = 0.3048               # ft -> m
KT = 1852.0 / 3600.0      # kt -> m/s
FPM = FT / 60.0           # ft/min -> m/s
FL = 100.0 * FT           # flight level -> m
