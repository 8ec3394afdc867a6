import json

import pytest
import torch

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "he", "she", "they", "it", "with", "in", "on", "of",
    "water", "snow", "tank", "book", "story", "meeting", "road", "table",
    "cover", "covered", "covers", "fill", "filled", "fills", "remove",
    "removed", "clear", "cleared", "discuss", "discussed", "treat",
    "treats", "about", "workers", "crew", "report", "town", "news",
    "##s", "##ed", "##ing", ".", ",",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A small randomly initialized BERT saved locally, for offline tests."""
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny-bert")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return str(root)


@pytest.fixture(scope="session")
def probe_corpus(tmp_path_factory) -> str:
    """A 50-sentence annotation file over the tiny-model vocabulary."""
    verbs = [
        ("cover", "cover.v.1", "Filling"),
        ("covered", "cover.v.2", "Topic"),
        ("fill", "fill.v.1", "Filling"),
        ("filled", "fill.v.1", "Filling"),
        ("remove", "remove.v.1", "Removing"),
        ("removed", "remove.v.1", "Removing"),
        ("clear", "clear.v.1", "Removing"),
        ("discuss", "discuss.v.1", "Topic"),
        ("discussed", "discuss.v.1", "Topic"),
        ("treat", "treat.v.1", "Topic"),
    ]
    templates = [
        "the workers {verb} the tank with water .",
        "they {verb} the road in the snow .",
        "the report {verb} the news of the town .",
        "she {verb} the story in the meeting .",
        "he {verb} the table with a book .",
    ]
    path = tmp_path_factory.mktemp("probe") / "annotations.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for verb, lu_id, frame in verbs:
            for template in templates:
                sentence = template.format(verb=verb)
                start = sentence.index(verb)
                fh.write(
                    json.dumps(
                        {
                            "sentence": sentence,
                            "start": start,
                            "end": start + len(verb),
                            "lemma": lu_id.split(".")[0],
                            "lu_id": lu_id,
                            "frame": frame,
                        }
                    )
                    + "\n"
                )
    return str(path)
