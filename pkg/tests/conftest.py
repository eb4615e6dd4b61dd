"""Shared hand-built dependency parses used across the test suite."""

import pytest

from cxmine.conllu import Sentence, Token


def T(index, form, lemma, upos, xpos, head, deprel, space_after=True):
    return Token(
        index=index, form=form, lemma=lemma, upos=upos, xpos=xpos,
        head=head, deprel=deprel, space_after=space_after,
    )


@pytest.fixture
def sneeze_sentence():
    # "She sneezed the foam off her cappuccino."
    return Sentence(
        id="ex1",
        tokens=(
            T(1, "She", "she", "PRON", "PRP", 2, "nsubj"),
            T(2, "sneezed", "sneeze", "VERB", "VBD", 0, "root"),
            T(3, "the", "the", "DET", "DT", 4, "det"),
            T(4, "foam", "foam", "NOUN", "NN", 2, "dobj"),
            T(5, "off", "off", "ADP", "IN", 2, "prep"),
            T(6, "her", "her", "PRON", "PRP$", 7, "poss"),
            T(7, "cappuccino", "cappuccino", "NOUN", "NN", 5, "pobj", space_after=False),
            T(8, ".", ".", "PUNCT", ".", 2, "punct"),
        ),
    )


@pytest.fixture
def laugh_sentence():
    # "They laughed him off the stage."
    return Sentence(
        id="ex2",
        tokens=(
            T(1, "They", "they", "PRON", "PRP", 2, "nsubj"),
            T(2, "laughed", "laugh", "VERB", "VBD", 0, "root"),
            T(3, "him", "he", "PRON", "PRP", 2, "dobj"),
            T(4, "off", "off", "ADP", "IN", 2, "prep"),
            T(5, "the", "the", "DET", "DT", 6, "det"),
            T(6, "stage", "stage", "NOUN", "NN", 4, "pobj", space_after=False),
            T(7, ".", ".", "PUNCT", ".", 2, "punct"),
        ),
    )


@pytest.fixture
def take_into_account_sentence():
    # "I would take that into account" - structurally a match, semantically not.
    return Sentence(
        id="ex3",
        tokens=(
            T(1, "I", "I", "PRON", "PRP", 3, "nsubj"),
            T(2, "would", "would", "AUX", "MD", 3, "aux"),
            T(3, "take", "take", "VERB", "VB", 0, "root"),
            T(4, "that", "that", "PRON", "DT", 3, "dobj"),
            T(5, "into", "into", "ADP", "IN", 3, "prep"),
            T(6, "account", "account", "NOUN", "NN", 5, "pobj"),
        ),
    )


@pytest.fixture
def pop_socket_sentence():
    # "I can pop my shoulder out of my socket ." - multiword preposition.
    return Sentence(
        id="ex4",
        tokens=(
            T(1, "I", "I", "PRON", "PRP", 3, "nsubj"),
            T(2, "can", "can", "AUX", "MD", 3, "aux"),
            T(3, "pop", "pop", "VERB", "VB", 0, "root"),
            T(4, "my", "my", "PRON", "PRP$", 5, "poss"),
            T(5, "shoulder", "shoulder", "NOUN", "NN", 3, "dobj"),
            T(6, "out", "out", "ADP", "IN", 3, "prep"),
            T(7, "of", "of", "ADP", "IN", 6, "fixed"),
            T(8, "my", "my", "PRON", "PRP$", 9, "poss"),
            T(9, "socket", "socket", "NOUN", "NN", 6, "pobj", space_after=False),
            T(10, ".", ".", "PUNCT", ".", 3, "punct"),
        ),
    )


@pytest.fixture
def sleep_sentence():
    # "She slept." - intransitive, no adposition.
    return Sentence(
        id="ex5",
        tokens=(
            T(1, "She", "she", "PRON", "PRP", 2, "nsubj"),
            T(2, "slept", "sleep", "VERB", "VBD", 0, "root", space_after=False),
            T(3, ".", ".", "PUNCT", ".", 2, "punct"),
        ),
    )


def make_cmc_sentence(sid, verb_form, verb_lemma, dobj, prep, pobj, xpos="VBD"):
    """Parametric CMC-shaped sentence: 'Kim <verb> the <dobj> <prep> the <pobj> .'"""
    return Sentence(
        id=sid,
        tokens=(
            T(1, "Kim", "Kim", "PROPN", "NNP", 2, "nsubj"),
            T(2, verb_form, verb_lemma, "VERB", xpos, 0, "root"),
            T(3, "the", "the", "DET", "DT", 4, "det"),
            T(4, dobj, dobj, "NOUN", "NN", 2, "dobj"),
            T(5, prep, prep, "ADP", "IN", 2, "prep"),
            T(6, "the", "the", "DET", "DT", 7, "det"),
            T(7, pobj, pobj, "NOUN", "NN", 5, "pobj", space_after=False),
            T(8, ".", ".", "PUNCT", ".", 2, "punct"),
        ),
    )
