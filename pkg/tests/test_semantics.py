import pytest
from hypothesis import given, strategies as st

from ecosim.semantics import (
    MISSING_PENALTY,
    AgentSequence,
    AttributeTuple,
    SemanticDescription,
    SemanticError,
    SemanticFilter,
    UserRequest,
    description_distance,
    filter_translate,
    flatten,
    parse_item,
    raw_fitness,
    total_distance,
    travel_filter,
    tuple_distance,
)

from conftest import make_agent
import oracles

T = AttributeTuple


def test_tuple_distance_examples():
    assert tuple_distance(T(1, 25), T(1, 23)) == 2
    assert tuple_distance(T(3, 55), T(3, 55)) == 0
    assert tuple_distance(T(1, 25), T(2, 25)) == MISSING_PENALTY == 100


def test_attribute_range_enforced():
    with pytest.raises(SemanticError):
        T.of(0, 5)
    with pytest.raises(SemanticError):
        T.of(5, 101)


def test_description_size_and_duplicates():
    with pytest.raises(SemanticError):
        SemanticDescription([(1, 1), (2, 2)])
    with pytest.raises(SemanticError):
        SemanticDescription([(1, 1), (1, 2), (3, 3)])
    d = SemanticDescription([(3, 1), (1, 2), (2, 3)])
    assert [t.attribute_id for t in d] == [1, 2, 3]


def test_request_shape_rules():
    with pytest.raises(SemanticError):
        UserRequest([[(1, 1), (2, 2), (3, 3)]])
    with pytest.raises(SemanticError):
        UserRequest([[(1, 1), (2, 2)], [(1, 1), (2, 2), (3, 3)]])
    UserRequest([[(1, 1), (2, 2), (3, 3)], [(4, 4), (5, 5), (6, 6)]])


def test_flatten_examples():
    r = UserRequest([[(1, 2)], [(3, 4)]], strict=False)
    assert flatten(r) == [(1, 2), (3, 4)]
    assert flatten(UserRequest([[(2, 3), (1, 2)]], strict=False)) == [(1, 2), (2, 3)]
    r = UserRequest([[(1, 1), (2, 2), (3, 3)], [(4, 4), (5, 5), (6, 6)]])
    assert len(flatten(r)) == 6


def test_raw_fitness_examples():
    exact = AgentSequence([make_agent(1, [(1, 5), (2, 6)])])
    assert raw_fitness(exact, UserRequest([[(1, 5), (2, 6)]], strict=False)) == 1.0
    a = AgentSequence([make_agent(1, [(1, 25)])])
    assert raw_fitness(a, UserRequest([[(1, 23)]], strict=False)) == pytest.approx(1 / 3)
    b = AgentSequence([make_agent(1, [(2, 50)])])
    assert raw_fitness(b, UserRequest([[(1, 50)]], strict=False)) == pytest.approx(1 / 101)


tuples = st.lists(st.tuples(st.integers(1, 12), st.integers(1, 100)), min_size=1, max_size=6,
                  unique_by=lambda t: t[0])


@given(st.lists(tuples, min_size=1, max_size=4), st.lists(tuples, min_size=1, max_size=3))
def test_raw_fitness_matches_oracle(descs, groups):
    seq = AgentSequence([make_agent(i + 1, d) for i, d in enumerate(descs)])
    req = UserRequest(groups, strict=False)
    required = [tuple(t) for t in flatten(req)]
    assert raw_fitness(seq, req) == pytest.approx(oracles.fitness_of(descs, required))
    assert 0 < raw_fitness(seq, req) <= 1


@given(st.lists(tuples, min_size=1, max_size=4), st.lists(tuples, min_size=1, max_size=3), tuples)
def test_adding_members_never_hurts(descs, groups, extra):
    req = UserRequest(groups, strict=False)
    seq = AgentSequence([make_agent(i + 1, d) for i, d in enumerate(descs)])
    more = AgentSequence(list(seq.members) + [make_agent(99, extra)])
    assert total_distance(more, req) <= total_distance(seq, req)


def test_description_distance_examples():
    s = SemanticDescription([(1, 10), (2, 20), (3, 30)])
    assert description_distance(s, s) == 0.0
    one = lambda *t: SemanticDescription(t, strict=False)  # noqa: E731
    assert description_distance(one((1, 10)), one((1, 20))) == pytest.approx(0.10)
    assert description_distance(one((1, 10)), one((2, 10))) == pytest.approx(1.0)


@given(tuples, tuples)
def test_description_distance_bounded_and_symmetric(a, b):
    s1, s2 = SemanticDescription(a, strict=False), SemanticDescription(b, strict=False)
    d = description_distance(s1, s2)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(description_distance(s2, s1))


def test_parse_round_trip():
    d = parse_item("{(1,25), (2,35),(3,55)}")
    assert isinstance(d, SemanticDescription) and str(d) == "{(1,25),(2,35),(3,55)}"
    r = parse_item("[{(1,2),(3,4)},{(5,6)}]")
    assert isinstance(r, UserRequest) and len(r.groups) == 2
    assert str(parse_item(str(r))) == str(r)


@pytest.mark.parametrize("bad", ["", "(1,2)", "{(1,2)", "{(1,x)}", "[{(1,2)} junk]", "{(1,2)}{(3,4)}",
                                 "{(0,5)}", "{(1,2),(1,3)}"])
def test_parse_rejects(bad):
    with pytest.raises(SemanticError):
        parse_item(bad)


def test_travel_filter_single_tuples():
    f = travel_filter()
    assert f.render(T(1, 25)) == "(Business, Airline)"
    assert f.render(T(5, 37)) == "(Depart, Edinburgh)"
    assert f.render(T(4, 6)) == "(Cost, 60)"


def test_filter_fallbacks():
    f = SemanticFilter.from_lines(["# comment", "1,*,Business,", "1,25,Business,Airline"])
    assert f.render(T(1, 99)) == "(Business, 99)"
    assert f.render(T(9, 9)) == "(attr9, 9)"


def test_filter_rejects_bad_rows():
    with pytest.raises(SemanticError):
        SemanticFilter.from_lines(["1,25,Business"])


def test_translate_request_brackets():
    f = travel_filter()
    r = parse_item("[{(1,25)},{(9,9)}]")
    assert filter_translate(r, f) == "[{(Business, Airline)}, {(attr9, 9)}]"
