import pickle
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import slow_inv, slow_mul
from rlncdtn.gf_field import (DEFAULT_POLYS, FieldElement, FieldError, FieldSpec, add,
                              clmul_mod, field_for_q, get_field, inv, is_irreducible, mul)


@pytest.mark.parametrize("k", range(1, 5))
def test_axioms_exhaustive_small_fields(k):
    f = get_field(k)
    q = f.q
    els = range(q)
    for a in els:
        assert f.add(a, 0) == a
        assert f.add(a, a) == 0
        assert f.mul(a, 1) == a
        assert f.mul(a, 0) == 0
        if a:
            assert f.mul(a, f.inv(a)) == 1
        for b in els:
            assert f.add(a, b) == f.add(b, a)
            assert f.mul(a, b) == f.mul(b, a)
            assert f.mul(a, b) == slow_mul(a, b, f.reduction_poly)
            for c in els:
                assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
                assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
                assert f.add(f.add(a, b), c) == f.add(a, f.add(b, c))


@pytest.mark.parametrize("k", [8, 16])
def test_axioms_randomized_large_fields(k):
    f = get_field(k)
    rng = random.Random(k)
    poly = f.reduction_poly
    for _ in range(10_000):
        a, b, c = (rng.randrange(f.q) for _ in range(3))
        assert f.mul(a, b) == slow_mul(a, b, poly) == clmul_mod(a, b, poly)
        assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        if a:
            assert f.mul(a, f.inv(a)) == 1


def test_inverse_table_matches_search_gf16():
    f = get_field(4)
    for a in range(1, 16):
        assert f.inv(a) == slow_inv(a, f.reduction_poly)


def test_known_values_gf256():
    f = get_field(8, 0x11B)
    assert f.add(0x57, 0x83) == 0xD4
    assert f.mul(0x53, 0xCA) == 0x01
    assert f.mul(0x57, 0x83) == 0xC1


def test_element_api():
    f = get_field(8)
    x, y = f.element(0x53), f.element(0xCA)
    assert int(mul(x, y)) == 1
    assert int(add(x, x)) == 0
    assert int(inv(f.element(1))) == 1
    assert int(x / y) == f.div(0x53, 0xCA)
    assert not f.element(0)
    with pytest.raises(ZeroDivisionError):
        inv(f.element(0))
    with pytest.raises(FieldError):
        FieldElement(256, f)
    with pytest.raises(FieldError):
        x + get_field(4).element(1)


def test_default_polynomials_irreducible():
    for k, p in DEFAULT_POLYS.items():
        assert p.bit_length() - 1 == k
        assert is_irreducible(p)
    assert not is_irreducible(0b101)        # x^2 + 1 = (x + 1)^2
    assert not is_irreducible(0x11A)        # divisible by x


def test_invalid_fields():
    with pytest.raises(FieldError):
        FieldSpec(0)
    with pytest.raises(FieldError):
        FieldSpec(17)
    with pytest.raises(FieldError):
        FieldSpec(2, 0b101)
    with pytest.raises(FieldError):
        FieldSpec(8, 0x13)                  # wrong degree
    with pytest.raises(FieldError):
        field_for_q(12)


def test_every_k_builds_and_generator_has_full_order():
    for k in range(1, 17):
        f = get_field(k)
        assert len(set(f.exp[: f.q - 1])) == f.q - 1


def test_field_pickles_and_compares():
    f = get_field(8)
    g = pickle.loads(pickle.dumps(f))
    assert g == f and hash(g) == hash(f)
    assert get_field(8) is get_field(8)
    assert field_for_q(65536).k == 16


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 65535), st.integers(0, 65535))
def test_mul_matches_carryless_reference_gf65536(a, b):
    f = get_field(16)
    assert f.mul(a, b) == slow_mul(a, b, f.reduction_poly)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=12), st.integers(0, 255))
def test_row_helpers_agree_with_scalar_ops(row, c):
    f = get_field(8)
    assert f.scale(c, row) == [f.mul(c, x) for x in row]
    v = list(reversed(row))
    assert f.axpy(v, c, row) == [x ^ f.mul(c, y) for x, y in zip(v, row)]
    expect = 0
    for x, y in zip(row, v):
        expect ^= f.mul(x, y)
    assert f.dot(row, v) == expect
