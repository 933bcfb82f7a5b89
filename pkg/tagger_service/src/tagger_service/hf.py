"""Hugging Face backends, imported lazily so the service (and its tests)
never need torch or model weights unless one is actually requested.

generated_text style wraps a seq2seq model that fills sentinel slots;
slot_labels style wraps a masked-LM and scores the label-space surfaces at
each mask position. Both expect checkpoints fine-tuned for this tagging
task; with stock checkpoints they run but predict noise.
"""

from __future__ import annotations

import threading
from typing import Sequence

from .backends import BackendConfig


class Seq2SeqBackend:
    output_style = "generated_text"

    def __init__(self, config: BackendConfig):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self.model_id = config.model_id
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(config.model_id)
        self.model.to(config.device).eval()
        self.device = config.device
        self._device_lock = threading.Lock()  # inference serialized per device

    def run(
        self, format: str, prompt: str, n_slots: int, label_space: Sequence[str]
    ) -> str:
        encoded = self.tokenizer(prompt, return_tensors="pt", truncation=True).to(self.device)
        with self._device_lock, self._torch.no_grad():
            generated = self.model.generate(
                **encoded, max_new_tokens=4 * n_slots + 8, do_sample=False
            )
        return self.tokenizer.decode(generated[0], skip_special_tokens=False)


class MaskedSlotBackend:
    output_style = "slot_labels"

    def __init__(self, config: BackendConfig):
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.model_id = config.model_id
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(config.model_id)
        self.model.to(config.device).eval()
        self.device = config.device
        self._device_lock = threading.Lock()  # inference serialized per device

    def _candidate_ids(self, label_space: Sequence[str]) -> list[int]:
        ids = []
        for surface in label_space:
            tokens = self.tokenizer(surface, add_special_tokens=False)["input_ids"]
            ids.append(tokens[0] if tokens else self.tokenizer.unk_token_id)
        return ids

    def run(
        self, format: str, prompt: str, n_slots: int, label_space: Sequence[str]
    ) -> list[str]:
        candidates = [s for s in label_space if s != "..."]
        candidate_ids = self._candidate_ids(candidates)
        encoded = self.tokenizer(prompt, return_tensors="pt", truncation=True).to(self.device)
        mask_positions = (
            (encoded["input_ids"][0] == self.tokenizer.mask_token_id).nonzero().flatten()
        )
        with self._device_lock, self._torch.no_grad():
            logits = self.model(**encoded).logits[0]
        surfaces = ["O"] * n_slots
        for slot, position in enumerate(mask_positions.tolist()[:n_slots]):
            scores = logits[position][candidate_ids]
            surfaces[slot] = candidates[int(scores.argmax())]
        return surfaces


def load_hf_backend(config: BackendConfig):
    if config.output_style == "generated_text":
        return Seq2SeqBackend(config)
    return MaskedSlotBackend(config)
