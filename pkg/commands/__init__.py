"""
Command modules for the coarsemed CLI.

Each module exposes ``setup(registry)`` and registers its subcommands with
``registry.add_command``; ``main.py`` discovers and loads them at startup.
"""
import argparse
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from models.errors import InputError
from utils.documents import load_document
from utils.limits import MODE_EXHAUSTIVE, MODE_SAMPLED

FORMAT_JSON = "json"
FORMAT_CSV = "csv"
SEED_LIMIT = 2 ** 64


@dataclass
class RunConfig:
    """One CLI invocation"""
    command: str
    inputs: List[str] = field(default_factory=list)
    output: Optional[str] = None
    seed: Optional[int] = None
    mode: Optional[str] = None
    samples: Optional[int] = None
    format: str = FORMAT_JSON
    options: argparse.Namespace = field(default_factory=argparse.Namespace)

    def __post_init__(self):
        if self.mode not in (None, MODE_EXHAUSTIVE, MODE_SAMPLED):
            raise InputError(f"mode must be '{MODE_EXHAUSTIVE}' or '{MODE_SAMPLED}'")
        if self.mode == MODE_SAMPLED and self.seed is None:
            raise InputError("sampled mode needs --seed")
        if self.seed is not None and not 0 <= self.seed < SEED_LIMIT:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.samples is not None and self.samples < 1:
            raise InputError("sample count must be positive")
        if self.format not in (FORMAT_JSON, FORMAT_CSV):
            raise InputError(f"format must be '{FORMAT_JSON}' or '{FORMAT_CSV}'")

    @property
    def rng_seed(self) -> int:
        return 0 if self.seed is None else self.seed

    def document(self, position: int = 0) -> Any:
        """Load the input document at ``position``."""
        if len(self.inputs) <= position:
            raise InputError(f"{self.command} needs --input")
        return load_document(self.inputs[position])

    def documents(self) -> List[Any]:
        if not self.inputs:
            raise InputError(f"{self.command} needs --input")
        return [load_document(path) for path in self.inputs]


@dataclass
class CommandResult:
    """What a command hands back to the runner"""
    payload: Dict[str, Any]
    rows: Optional[List[Dict[str, Any]]] = None
    columns: Optional[Sequence[str]] = None
    ok: bool = True
    witness: Optional[Sequence[Any]] = None
    message: str = ""
