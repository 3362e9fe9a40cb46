import random

import pytest

from tspbmc import (
    Cipher,
    Fresh,
    Ident,
    Pair,
    PrivKey,
    PubKey,
    SymKey,
    TermSyntaxError,
    TermUniverse,
    instantiate,
    inverse_key,
    parse_term,
    render_term,
    subterms,
)
from tspbmc.errors import TermError
from tspbmc.terms import is_key_form, term_depth


def test_parse_atoms():
    assert parse_term("A") == Ident("A")
    assert parse_term("KB") == PubKey("B")
    assert parse_term("KA'") == PrivKey("A")
    assert parse_term("KAS") == SymKey("A", "S")
    assert parse_term("Ta") == Fresh("Ta")
    assert parse_term("Ta#2") == Fresh("Ta", 2)


def test_symkey_canonicalized_unordered():
    assert parse_term("KSA") == parse_term("KAS")
    assert render_term(parse_term("KSA")) == "KAS"


def test_pair_right_associative():
    t = parse_term("Ta|Tb|A")
    assert t == Pair(Fresh("Ta"), Pair(Fresh("Tb"), Ident("A")))
    assert render_term(t) == "Ta|Tb|A"


def test_cipher_structure():
    t = parse_term("<KB,Ta#1|A>")
    assert t == Cipher(PubKey("B"), Pair(Fresh("Ta", 1), Ident("A")))


def test_cipher_key_must_be_key_form():
    with pytest.raises(TermSyntaxError):
        parse_term("<A,Ta>")  # identity is not a key
    with pytest.raises(TermSyntaxError):
        parse_term("<Ta|A,Tb>")  # composite key


def test_nested_cipher_in_body():
    t = parse_term("<KA,<KB,Ta>>")
    assert isinstance(t.body, Cipher)


def test_syntax_errors_report_offset():
    with pytest.raises(TermSyntaxError) as e:
        parse_term("Ta|")
    assert e.value.offset == 3
    with pytest.raises(TermSyntaxError):
        parse_term("")
    with pytest.raises(TermSyntaxError):
        parse_term("<KB,Ta")
    with pytest.raises(TermSyntaxError):
        parse_term("Ta Tb")
    with pytest.raises(TermSyntaxError):
        parse_term("Ta#0")


def _random_term(rng, depth):
    if depth == 0 or rng.random() < 0.35:
        return rng.choice([
            Ident(rng.choice("ABS")),
            PubKey(rng.choice("ABI")),
            PrivKey(rng.choice("AB")),
            SymKey(*rng.sample("ABS", 2)),
            Fresh(rng.choice(["Ta", "Tb", "Kab"]),
                  rng.choice([None, 1, 2, 17])),
        ])
    if rng.random() < 0.5:
        return Pair(_random_term(rng, 0), _random_term(rng, depth - 1))
    key = rng.choice([PubKey("A"), PrivKey("B"), SymKey("A", "B"), Fresh("Kab", 1)])
    return Cipher(key, _random_term(rng, depth - 1))


def test_parse_render_round_trip_randomized():
    rng = random.Random(20240817)
    for _ in range(1000):
        t = _random_term(rng, 4)
        assert parse_term(render_term(t)) == t


def test_subterms():
    t = parse_term("<KB,Ta#1|A>")
    subs = subterms(t)
    assert subs == {t, PubKey("B"), Pair(Fresh("Ta", 1), Ident("A")),
                    Fresh("Ta", 1), Ident("A")}


def test_instantiate_attaches_sid_only_when_absent():
    t = parse_term("<KB,Ta|Tb#3>")
    out = instantiate(t, 2)
    assert out == parse_term("<KB,Ta#2|Tb#3>")
    with pytest.raises(TermError):
        instantiate(t, 0)


def test_inverse_key():
    assert inverse_key(PubKey("A")) == PrivKey("A")
    assert inverse_key(PrivKey("A")) == PubKey("A")
    assert inverse_key(SymKey("A", "B")) == SymKey("A", "B")
    assert inverse_key(Fresh("Kab", 1)) == Fresh("Kab", 1)
    with pytest.raises(TermError):
        inverse_key(Ident("A"))


def test_is_key_form():
    assert is_key_form(PubKey("A"))
    assert is_key_form(Fresh("Kab"))
    assert not is_key_form(Ident("A"))
    assert not is_key_form(parse_term("Ta|Tb"))


def test_fresh_metadata_not_part_of_identity():
    assert Fresh("Ta", 1, owner="A", klass="nonce") == Fresh("Ta", 1)
    assert hash(Fresh("Ta", 1, owner="A", klass="nonce")) == hash(Fresh("Ta", 1))


def test_universe_deterministic_and_subterm_closed():
    members = [parse_term("<KB,Ta#1|A>"), parse_term("Tb#1")]
    u1 = TermUniverse(members)
    u2 = TermUniverse(reversed(members))
    assert list(u1) == list(u2)
    for t in u1:
        for s in subterms(t):
            assert s in u1
    assert all(u1.term_of(u1.id_of(t)) == t for t in u1)
    assert u1.depth == max(term_depth(t) for t in u1)
