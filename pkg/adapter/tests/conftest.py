"""Builds a tiny CLIP-format checkpoint so the adapter is testable offline."""

import json

import pytest


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    import torch
    from transformers import CLIPConfig, CLIPModel

    path = tmp_path_factory.mktemp("ckpt") / "tiny-clip"
    path.mkdir()

    # character-level tokenizer: specials plus printable ASCII, with and
    # without the end-of-word marker; merges stay empty
    tokens = ["<|startoftext|>", "<|endoftext|>"]
    chars = [chr(c) for c in range(33, 127)] + [" "]
    tokens += chars + [c + "</w>" for c in chars]
    vocab = {t: i for i, t in enumerate(tokens)}
    (path / "vocab.json").write_text(json.dumps(vocab))
    (path / "merges.txt").write_text("#version: 0.2\n")

    config = CLIPConfig(
        projection_dim=32,
        text_config={
            "vocab_size": len(vocab), "hidden_size": 32, "intermediate_size": 64,
            "num_hidden_layers": 2, "num_attention_heads": 2,
            "max_position_embeddings": 77, "bos_token_id": 0, "eos_token_id": 1,
        },
        vision_config={
            "hidden_size": 32, "intermediate_size": 64, "num_hidden_layers": 2,
            "num_attention_heads": 2, "image_size": 32, "patch_size": 8,
        },
    )
    torch.manual_seed(0)
    CLIPModel(config).save_pretrained(path)
    return path
