"""Declarative run configuration: one flat key = value file per experiment.

Grammar: one `key = value` pair per line, '#' starts a comment, blank lines
ignored.  Lists are comma-separated; stream segments and duplicate injections
use colon pairs ("500:0.5, 100:0.0" reads as (length:novelty, ...) and
"500:100" as (position:count, ...)).  Unknown keys are rejected.  Flags given
on the command line override file values; the fully resolved mapping is
embedded in every emitted artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Tuple

from .depth import ALIGNMENTS
from .model import ModelConfig
from .probes import StreamSpec


@dataclass(frozen=True)
class RunConfig:
    # model shape
    n_state_tokens: int = 32
    token_dim: int = 64
    n_layers: int = 4
    n_heads: int = 4
    n_frame_tokens: int = 64
    # randomness
    seed: int = 0
    # stream layout (defaults mirror the duplicate-injection experiment:
    # 500-frame novelty-0.5 prefix, 100 appended exact copies)
    segments: Tuple[Tuple[int, float], ...] = ((500, 0.5),)
    duplicates: Tuple[Tuple[int, int], ...] = ((500, 100),)
    n_streams: int = 4
    # gating
    tau: float = 1.0
    policies: Tuple[str, ...] = ("ttt3r", "afg-img", "afg-pose")
    taus: Tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5)
    alphas: Tuple[float, ...] = (0.3, 0.5, 0.7)
    # analytic horizon inputs
    beta_bar: float = 0.31
    alpha_min: float = 1.0
    # evaluation
    delta: int = 1
    alignment: str = "metric"
    # output directory
    out: str = "gatelab-out"

    def __post_init__(self):
        if self.n_streams < 1:
            raise ValueError(f"n_streams must be >= 1, got {self.n_streams}")
        if self.alignment not in ALIGNMENTS:
            raise ValueError(f"alignment must be one of {ALIGNMENTS}, got {self.alignment!r}")
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            n_state_tokens=self.n_state_tokens,
            token_dim=self.token_dim,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            n_frame_tokens=self.n_frame_tokens,
            rng_seed=self.seed,
        )

    def stream_spec(self, seed=None) -> StreamSpec:
        return StreamSpec(
            segments=tuple((int(l), float(n)) for l, n in self.segments),
            duplicates=tuple((int(p), int(c)) for p, c in self.duplicates),
            rng_seed=self.seed if seed is None else seed,
        )

    def resolved(self) -> dict:
        """Fully explicit mapping for provenance records.

        Excludes `out`: the artifact destination is not an experiment input,
        and leaving it out keeps outputs byte-identical across destinations.
        """
        resolved = {}
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            resolved[f.name] = v
        return resolved


_INT_KEYS = {
    "n_state_tokens", "token_dim", "n_layers", "n_heads", "n_frame_tokens",
    "seed", "n_streams", "delta",
}
_FLOAT_KEYS = {"tau", "beta_bar", "alpha_min"}
_STR_KEYS = {"alignment", "out"}
_FLOAT_LIST_KEYS = {"taus", "alphas"}
_STR_LIST_KEYS = {"policies"}
_PAIR_KEYS = {"segments", "duplicates"}


def _parse_pairs(text: str, key: str):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        left, sep, right = item.partition(":")
        if not sep:
            raise ValueError(f"{key} entries need a colon pair, got {item!r}")
        if key == "segments":
            pairs.append((int(left), float(right)))
        else:
            pairs.append((int(left), int(right)))
    if not pairs:
        raise ValueError(f"{key} must contain at least one entry")
    return tuple(pairs)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse the flat grammar into a {field: value} dict (no defaults applied)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _STR_KEYS:
                values[key] = val
            elif key in _FLOAT_LIST_KEYS:
                values[key] = tuple(float(v) for v in val.split(",") if v.strip())
            elif key in _STR_LIST_KEYS:
                values[key] = tuple(v.strip() for v in val.split(",") if v.strip())
            elif key in _PAIR_KEYS:
                values[key] = _parse_pairs(val, key)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file values (if any), then non-None overrides, over defaults."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), source=str(path)))
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return replace(RunConfig(), **values)
