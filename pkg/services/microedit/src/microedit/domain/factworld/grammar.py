"""Closed word-level grammar of the synthetic world."""
from __future__ import annotations

import numpy as np

PAD = '<pad>'
SEP = '<sep>'
END = '<end>'
SPECIALS = (PAD, SEP, END)

CONSONANTS = 'bdfgklmnprstvz'
VOWELS = 'aeiou'

RELATION_NOUNS = (
    'capital',
    'mentor',
    'rival',
    'founder',
    'patron',
    'neighbor',
    'sibling',
    'ally',
    'heir',
    'guardian',
    'partner',
    'envoy',
)

TEMPLATES = (
    'the {noun} of {s} is',
    "{s} 's {noun} is",
    'who is the {noun} of {s} ?',
    'the {noun} for {s} is named',
)
COMPOSITION_TEMPLATE = 'the {outer} of the {inner} of {s} is'

GLUE_WORDS = frozenset({'the', 'of', 'is', "'s", 'who', '?', 'for', 'named'})


def relation_id(noun: str) -> str:
    return f'{noun}_of'


def relation_templates(noun: str) -> list[str]:
    # '{s}' stays a format slot for the subject
    return [t.replace('{noun}', noun) for t in TEMPLATES]


def composition_prompt(subject: str, inner_noun: str, outer_noun: str) -> list[str]:
    return COMPOSITION_TEMPLATE.format(outer=outer_noun, inner=inner_noun, s=subject).split()


def syllable(rng: np.random.Generator) -> str:
    return CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))]


def entity_names(count: int, rng: np.random.Generator, min_syllables: int = 2, max_syllables: int = 3) -> list[str]:
    """Distinct pronounceable CV-syllable names, none colliding with a glue or relation word."""
    reserved = GLUE_WORDS | set(RELATION_NOUNS) | set(SPECIALS)
    names: list[str] = []
    seen: set[str] = set()
    while len(names) < count:
        n_syllables = int(rng.integers(min_syllables, max_syllables + 1))
        name = ''.join(syllable(rng) for _ in range(n_syllables))
        if name in seen or name in reserved:
            continue
        seen.add(name)
        names.append(name)
    return names


def name_capacity(min_syllables: int, max_syllables: int) -> int:
    per_syllable = len(CONSONANTS) * len(VOWELS)
    return sum(per_syllable ** n for n in range(min_syllables, max_syllables + 1))
