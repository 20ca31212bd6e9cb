from hypothesis import given
from hypothesis import strategies as st

from topobohm.words import IDENTITY, Word

letters = st.lists(st.tuples(st.sampled_from(["a", "b", "c"]), st.integers(-3, 3)), max_size=10)
words = letters.map(lambda s: Word(tuple(s)))


def test_reduction_cancels_and_merges():
    assert Word.parse("a a^-1") == IDENTITY
    assert Word.parse("a^2 a^3 b") == Word((("a", 5), ("b", 1)))
    assert Word.parse("b a a^-1 b^-1").is_identity()
    assert Word.gen("a", 0).is_identity()


def test_formatting():
    assert str(Word.gen("a", -3)) == "a^-3"
    assert Word.gen("a", -3).pretty() == "a⁻³"
    assert str(IDENTITY) == "e"
    assert str(Word.parse("a b^2")) == "a b^2"


def test_letters_and_exponent_sums():
    w = Word.parse("a^2 b^-1 a^-1")
    assert w.letters() == [("a", 1), ("a", 1), ("b", -1), ("a", -1)]
    assert w.exponent_sums() == {"a": 1, "b": -1}
    assert len(w) == 4
    assert w.generators() == {"a", "b"}


@given(words, words, words)
def test_associative(x, y, z):
    assert (x * y) * z == x * (y * z)


@given(words)
def test_inverse(x):
    assert (x * x.inverse()).is_identity()
    assert (x.inverse() * x).is_identity()
    assert x.inverse().inverse() == x


@given(words)
def test_reduced_form_is_idempotent(x):
    assert Word(x.syllables) == x
    for (g1, _), (g2, _) in zip(x.syllables, x.syllables[1:]):
        assert g1 != g2
    assert all(e != 0 for _, e in x.syllables)


@given(words, st.integers(-4, 4))
def test_powers(x, n):
    expected = IDENTITY
    for _ in range(abs(n)):
        expected = expected * (x if n > 0 else x.inverse())
    assert x**n == expected
