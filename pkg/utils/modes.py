"""
Discrete mode space of the climb hybrid system.

Q = {CAS, MACH} x {LOW, HIGH} x {DEC, CST, ACC}
"""

from enum import Enum
from typing import NamedTuple


class SpeedMode(Enum):
    CAS = "CAS"
    MACH = "MACH"


class AltitudeBand(Enum):
    LOW = "LOW"
    HIGH = "HIGH"


class AccelMode(Enum):
    DEC = "DEC"
    CST = "CST"
    ACC = "ACC"


class Mode(NamedTuple):
    """One element of the mode space: (q1, q2, q3)."""

    q1: SpeedMode
    q2: AltitudeBand
    q3: AccelMode

    def __str__(self) -> str:
        return f"{self.q1.value}/{self.q2.value}/{self.q3.value}"


def all_modes():
    """Enumerate the twelve modes."""
    return [Mode(a, b, c) for a in SpeedMode for b in AltitudeBand for c in AccelMode]
