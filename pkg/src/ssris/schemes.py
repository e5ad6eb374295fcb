"""Splitting schemes, frame stages and the tile roles each scheme assigns."""

from __future__ import annotations

import enum


class Scheme(str, enum.Enum):
    """How the incident signal is divided between harvesting and reflection."""

    PS = "ps"  # power splitting: every cell splits its power by rho
    ES = "es"  # element splitting: a square block of tiles reflects, the rest harvests
    TS = "ts"  # time splitting: dedicated harvesting stage at the start of each frame

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        try:
            return cls(value.lower())
        except ValueError as exc:
            raise ValueError(f"unknown scheme {value!r}; expected one of ps, es, ts") from exc


class Stage(str, enum.Enum):
    EH = "eh"
    BT = "bt"
    DT = "dt"


ALL_SCHEMES = (Scheme.PS, Scheme.ES, Scheme.TS)


def stage_roles(scheme: Scheme, stage: Stage) -> tuple[str, str]:
    """Return which tiles reflect and which harvest in a stage.

    Each entry is ``"all"``, ``"none"``, ``"block"`` (the ES reflecting block) or
    ``"complement"`` (the tiles outside that block).
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.TS:
        if stage is Stage.EH:
            return "none", "all"
        return "all", "none"
    if stage is Stage.EH:
        return "none", "none"
    if scheme is Scheme.ES:
        return "block", "complement"
    return "all", "all"
