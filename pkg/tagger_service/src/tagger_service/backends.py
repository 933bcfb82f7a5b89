"""Tagging backends.

A backend turns one prompt into either per-slot label surfaces or generated
sentinel text; it never parses labels into pairs — that belongs to the
client. Two deterministic backends ship by default so the service runs and
tests with no model weights; HF-based backends live in :mod:`.hf`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence


@dataclass(frozen=True)
class BackendConfig:
    """What to load and how it answers.

    ``output_style`` must match the model family: slot_labels for per-slot
    classifiers, generated_text for text-to-text generators.
    """

    model_id: str = "stub"
    output_style: str = "slot_labels"
    device: str = "cpu"
    max_prompt_chars: int = 16384

    def __post_init__(self) -> None:
        if self.output_style not in ("slot_labels", "generated_text"):
            raise ValueError(f"unknown output style {self.output_style!r}")


class Backend(Protocol):
    model_id: str
    output_style: str

    def run(
        self, format: str, prompt: str, n_slots: int, label_space: Sequence[str]
    ) -> list[str] | str: ...


def as_generated_text(surfaces: Sequence[str], slot_ids: Sequence[int]) -> str:
    return " ".join(f"<extra_id_{i}> {s}" for i, s in zip(slot_ids, surfaces))


class EchoBackend:
    """Echoes one constant surface per slot; the null model."""

    def __init__(self, constant: str = "O", output_style: str = "slot_labels"):
        self.model_id = f"echo-{constant}"
        self.output_style = output_style
        self.constant = constant

    def run(
        self, format: str, prompt: str, n_slots: int, label_space: Sequence[str]
    ) -> list[str] | str:
        surfaces = [self.constant] * n_slots
        if self.output_style == "slot_labels":
            return surfaces
        return as_generated_text(surfaces, range(n_slots))


_SENTINEL = re.compile(r"<extra_id_(\d+)>")


class RuleBackend:
    """Question-mark rule over the prompt's units; a toy but non-degenerate
    model double.

    A unit whose text ends with "?" (before its slot token) becomes Q_k; the
    directly following non-question unit becomes A_k. CLS prompts answer the
    binary label space with "Q"/"O".
    """

    def __init__(self, output_style: str = "slot_labels"):
        self.model_id = "rule-question-mark"
        self.output_style = output_style

    def _units(self, format: str, prompt: str, n_slots: int) -> list[str]:
        separator = " [SEP] " if format == "mask_sep" else " ; "
        units = [u for u in prompt.split(separator) if u.strip()]
        if len(units) != n_slots:
            return [""] * n_slots
        return units

    def _unit_text(self, unit: str) -> str:
        # strip the trailing slot token ([MASK], sentinel or a filled label)
        unit = unit.strip()
        unit = re.sub(r"(\[MASK\]|<extra_id_\d+>|O|Q\d+|A\d+)$", "", unit).strip()
        return unit

    def run(
        self, format: str, prompt: str, n_slots: int, label_space: Sequence[str]
    ) -> list[str] | str:
        if format == "cls_single":
            text = prompt.removeprefix("[CLS]").strip()
            surface = "Q" if text.endswith("?") or text.endswith("？") else "O"
            return [surface] if self.output_style == "slot_labels" else surface
        units = self._units(format, prompt, n_slots)
        surfaces: list[str] = []
        pair = 0
        previous_was_question = False
        for unit in units:
            text = self._unit_text(unit)
            if text.endswith("?") or text.endswith("？"):
                pair += 1
                surfaces.append(f"Q{pair}")
                previous_was_question = True
            elif previous_was_question and pair:
                surfaces.append(f"A{pair}")
                previous_was_question = False
            else:
                surfaces.append("O")
                previous_was_question = False
        if self.output_style == "slot_labels":
            return surfaces
        return as_generated_text(surfaces, range(len(surfaces)))


def build_backend(name: str, config: BackendConfig) -> Backend:
    """Backend factory for the CLI: stub | rule | hf."""
    if name == "stub":
        return EchoBackend(output_style=config.output_style)
    if name == "rule":
        return RuleBackend(output_style=config.output_style)
    if name == "hf":
        from .hf import load_hf_backend

        return load_hf_backend(config)
    raise ValueError(f"unknown backend {name!r}")
