"""Deterministic RNG derivation: one user seed fans out into independent
streams keyed by purpose, so adding a consumer never shifts another's draws."""

import numpy as np

KEY_MODEL = 1
KEY_SHUFFLE = 2
KEY_FHN_TRAIN = 10
KEY_FHN_VAL = 11
KEY_FHN_TEST = 12
KEY_ADDING = 20
KEY_EVENTS = 30


def derived_rng(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))
