"""Experiment configuration: defaults, flat config files, validation.

Config files are flat ``key = value`` text (TOML-style scalars): ints,
floats, ``true``/``false`` and strings (quoted or bare), with ``#``
comments.  Attack settings use dotted keys (``attack.enabled``).  CLI
flags override file values, which override the built-in defaults; the
effective configuration is echoed into every report so a run can be
reproduced from its own output.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import InputError

_BOOL_WORDS = {"true": True, "false": False}


@dataclass
class ExperimentConfig:
    """Everything one training command needs; defaults match the primary setup."""

    dataset: Optional[str] = None  # assembled dataset CSV
    output_dir: str = "runs"
    rows_per_group: int = 2000
    test_fraction: float = 0.10
    seed: int = 123
    n_clients: int = 4
    batch_size: int = 64
    epochs: int = 200
    iterations: int = 50
    learning_rate: float = 0.001
    repetitions: int = 10
    attack_enabled: bool = False
    attack_client: int = 0
    attack_port: int = 23
    attack_mode: str = "raw_port_match"
    checkpoint: bool = False
    pretrain_fraction: Optional[float] = None
    overlap_pretrain: bool = False

    def validate(self) -> list[str]:
        """All violations at once, for a single actionable error message."""
        problems = []
        if self.rows_per_group < 1:
            problems.append("rows_per_group must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            problems.append("test_fraction must lie in (0, 1)")
        if self.seed < 0:
            problems.append("seed must be non-negative")
        if self.n_clients < 1:
            problems.append("n_clients must be >= 1")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.iterations < 1:
            problems.append("iterations must be >= 1")
        if self.learning_rate <= 0:
            problems.append("learning_rate must be positive")
        if self.repetitions < 1:
            problems.append("repetitions must be >= 1")
        if self.attack_client < 0 or self.attack_client >= self.n_clients:
            problems.append("attack.client must name an existing client")
        if not 0 <= self.attack_port <= 65535:
            problems.append("attack.port must lie in [0, 65535]")
        if self.attack_mode not in ("raw_port_match", "scaled_value_match"):
            problems.append("attack.mode must be raw_port_match or scaled_value_match")
        if self.pretrain_fraction is not None and not 0.0 <= self.pretrain_fraction < 1.0:
            problems.append("pretrain_fraction must lie in [0, 1)")
        return problems

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            key = f.name.replace("attack_", "attack.") if f.name.startswith("attack_") else f.name
            out[key] = getattr(self, f.name)
        return out

    def to_config_text(self) -> str:
        """Render as a flat config file that reproduces this configuration."""
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, str):
                text = f'"{value}"'
            else:
                text = repr(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


_FIELD_BY_KEY = {
    (f.name.replace("attack_", "attack.") if f.name.startswith("attack_") else f.name): f
    for f in dataclasses.fields(ExperimentConfig)
}


def _coerce(field: dataclasses.Field, raw: str, problems: list[str]):
    text = raw.strip()
    if text.lower() in _BOOL_WORDS:
        value: object = _BOOL_WORDS[text.lower()]
    elif len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        value = text[1:-1]
    else:
        try:
            value = int(text)
        except ValueError:
            try:
                value = float(text)
            except ValueError:
                value = text
    # Cross-coerce the numeric types so "0.1" fits float fields and "64" int fields.
    if field.type in ("float", "Optional[float]") and isinstance(value, int):
        value = float(value)
    expected = {
        "int": int,
        "float": float,
        "bool": bool,
        "str": str,
        "Optional[str]": str,
        "Optional[float]": float,
    }.get(field.type)
    bool_for_number = isinstance(value, bool) and expected in (int, float)
    if expected is not None and (not isinstance(value, expected) or bool_for_number):
        problems.append(f"{field.name}: expected {field.type}, got {raw!r}")
        return None
    return value


def parse_config_file(path) -> ExperimentConfig:
    """Read a flat key = value file into an ExperimentConfig."""
    values: dict = {}
    problems: list[str] = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for line_num, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {line_num}: expected 'key = value'")
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        field = _FIELD_BY_KEY.get(key)
        if field is None:
            problems.append(f"line {line_num}: unknown key {key!r}")
            continue
        value = _coerce(field, raw, problems)
        if value is not None:
            values[field.name] = value
    if problems:
        raise InputError("config file errors:\n  " + "\n  ".join(problems))
    return ExperimentConfig(**values)
