"""Python bindings for the hear dialogue core."""

import json

from hear._hear import (
    Model,
    bleu,
    cider_d,
    corpus_bleu,
    is_audio_question,
    keywords,
    mask_distance,
    matched_keywords,
    meteor_simple,
    rouge_l,
    rub_loss,
    sample_mask,
    surrounding_zero_set,
    tokenize,
)


def model_config(model):
    """Model hyperparameters as a dict."""
    return json.loads(model.config)


__all__ = [
    "Model",
    "bleu",
    "cider_d",
    "corpus_bleu",
    "is_audio_question",
    "keywords",
    "mask_distance",
    "matched_keywords",
    "meteor_simple",
    "model_config",
    "rouge_l",
    "rub_loss",
    "sample_mask",
    "surrounding_zero_set",
    "tokenize",
]
