"""Turn frame-annotated sentences into dataset records.

Each input sentence carries a character span marking the frame-evoking
verb.  Two vectors are computed per instance from a pretrained masked
language model:

* ``v_word`` -- the mean of the final-hidden-layer vectors of the
  subword tokens covering the span.
* ``v_mask`` -- the final-hidden-layer vector of the mask token, from a
  second pass over the sentence with the span replaced by a single mask
  token.

Instances whose span cannot be aligned to any subword token are skipped
and logged rather than aborting the run.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

logger = logging.getLogger(__name__)

_REQUIRED_KEYS = ("sentence", "start", "end", "lemma", "lu_id", "frame")


class ExtractorError(Exception):
    """Raised for unrecoverable input or model problems."""


@dataclass(frozen=True)
class AnnotatedSentence:
    """One frame-annotated verb occurrence.

    ``start``/``end`` are character offsets into ``sentence`` delimiting
    the target verb (half-open, non-empty, within bounds).
    """

    sentence: str
    start: int
    end: int
    lemma: str
    lu_id: str
    frame: str

    def __post_init__(self):
        if not (0 <= self.start < self.end <= len(self.sentence)):
            raise ExtractorError(
                f"span [{self.start}, {self.end}) out of bounds for "
                f"sentence of length {len(self.sentence)}"
            )


def load_annotations(path: str | Path) -> list[AnnotatedSentence]:
    """Parse the line-delimited JSON annotation format."""
    out: list[AnnotatedSentence] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExtractorError(f"malformed JSON at line {line_no}") from exc
            for key in _REQUIRED_KEYS:
                if key not in obj:
                    raise ExtractorError(f"missing key {key!r} at line {line_no}")
            try:
                out.append(
                    AnnotatedSentence(
                        sentence=str(obj["sentence"]),
                        start=int(obj["start"]),
                        end=int(obj["end"]),
                        lemma=str(obj["lemma"]),
                        lu_id=str(obj["lu_id"]),
                        frame=str(obj["frame"]),
                    )
                )
            except ExtractorError as exc:
                raise ExtractorError(f"{exc} (line {line_no})") from exc
    if not out:
        raise ExtractorError("empty annotation file")
    return out


def load_model(model_name: str):
    """Load tokenizer and model; any failure aborts the run."""
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except Exception as exc:
        raise ExtractorError(f"failed to load model {model_name!r}: {exc}") from exc
    if tokenizer.mask_token is None:
        raise ExtractorError(f"model {model_name!r} has no mask token")
    model.eval()
    return tokenizer, model


def _span_token_indices(offsets, start: int, end: int) -> list[int]:
    """Indices of subword tokens overlapping the character span."""
    hits = []
    for i, (tok_start, tok_end) in enumerate(offsets):
        if tok_start == tok_end:  # special tokens
            continue
        if tok_start < end and tok_end > start:
            hits.append(i)
    return hits


@torch.no_grad()
def _final_hidden(model, tokenizer, texts: list[str]) -> tuple[torch.Tensor, "object"]:
    enc = tokenizer(
        texts,
        return_tensors="pt",
        padding=True,
        truncation=True,
        return_offsets_mapping=True,
    )
    offsets = enc.pop("offset_mapping")
    out = model(**enc)
    return out.last_hidden_state, (enc, offsets)


def extract_records(
    annotations: list[AnnotatedSentence],
    tokenizer,
    model,
    batch_size: int = 16,
) -> tuple[list[dict], list[tuple[int, str]]]:
    """Compute (v_word, v_mask) per annotation.

    Returns the emitted records (dataset-file dicts, in input order) and
    a list of ``(input_index, reason)`` pairs for skipped annotations.
    """
    if batch_size < 1:
        raise ExtractorError(f"batch size must be >= 1, got {batch_size}")
    mask_token = tokenizer.mask_token
    mask_id = tokenizer.mask_token_id
    records: list[dict] = []
    skipped: list[tuple[int, str]] = []
    seen_ids: dict[str, int] = {}

    for lo in range(0, len(annotations), batch_size):
        batch = annotations[lo : lo + batch_size]
        word_hidden, (word_enc, word_offsets) = _final_hidden(
            model, tokenizer, [a.sentence for a in batch]
        )
        masked_texts = [
            a.sentence[: a.start] + mask_token + a.sentence[a.end :] for a in batch
        ]
        mask_hidden, (mask_enc, _) = _final_hidden(model, tokenizer, masked_texts)

        for k, ann in enumerate(batch):
            idx = lo + k
            span_toks = _span_token_indices(
                word_offsets[k].tolist(), ann.start, ann.end
            )
            if not span_toks:
                skipped.append((idx, "span matched no subword tokens"))
                logger.warning(
                    "skipping input %d (%s): span matched no subword tokens",
                    idx,
                    ann.lu_id,
                )
                continue
            mask_pos = (mask_enc["input_ids"][k] == mask_id).nonzero(as_tuple=True)[0]
            if len(mask_pos) != 1:
                skipped.append((idx, "mask token not uniquely recoverable"))
                logger.warning(
                    "skipping input %d (%s): mask token not uniquely recoverable",
                    idx,
                    ann.lu_id,
                )
                continue
            v_word = word_hidden[k, span_toks].mean(dim=0)
            v_mask = mask_hidden[k, int(mask_pos[0])]
            rec_id = f"{ann.lu_id}#{seen_ids.get(ann.lu_id, 0)}"
            seen_ids[ann.lu_id] = seen_ids.get(ann.lu_id, 0) + 1
            records.append(
                {
                    "id": rec_id,
                    "lemma": ann.lemma,
                    "lu_id": ann.lu_id,
                    "frame": ann.frame,
                    "v_word": [float(x) for x in v_word.numpy().astype(np.float32)],
                    "v_mask": [float(x) for x in v_mask.numpy().astype(np.float32)],
                    "sentence": ann.sentence,
                }
            )
    return records, skipped


def write_records(records: list[dict], path: str | Path) -> None:
    """Write records in the line-delimited dataset format."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")


def extract_file(
    annotations_path: str | Path,
    model_name: str,
    out_path: str | Path,
    batch_size: int = 16,
) -> tuple[int, int]:
    """End-to-end: annotations file -> dataset file.

    Returns (records written, inputs skipped).
    """
    annotations = load_annotations(annotations_path)
    tokenizer, model = load_model(model_name)
    records, skipped = extract_records(annotations, tokenizer, model, batch_size)
    write_records(records, out_path)
    return len(records), len(skipped)
