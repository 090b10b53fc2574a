import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from mrlwe._modarith import modulus, tree_sum
from mrlwe.errors import ExistenceError, ParameterError, StructureError
from mrlwe.ring import (MultiPoly, RingMapping, RingParams, add, axis_ntt, base_decompose,
                        find_root, negacyclic_mul, ntt_array, num_digits, remap, ring_mul,
                        scalar_mul, sub)

Q60 = 1152921504606904321  # prime, 1 mod 8192
SHAPES = [(64,), (16, 16), (8, 8, 4), (1, 8), (4, 1, 2)]


def rand_poly(rng, shape, q):
    return MultiPoly.uniform(shape, q, rng)


# RingParams --------------------------------------------------------------------

def test_ring_params_derived_fields():
    p = RingParams((16, 8, 4), 257, 17)
    assert p.m == 3 and p.n == 512 and p.shape == (16, 8, 4)


@pytest.mark.parametrize("degrees,q,t", [
    ((12,), 257, 2),          # not a power of two
    ((8,), 263, 2),           # 263 != 1 mod 16
    ((8,), 289, 2),           # 17^2, not prime
    ((8,), 257, 257),         # t not below q
    ((8,), 257, 1),           # t < 2
    ((), 257, 2),
])
def test_ring_params_rejects(degrees, q, t):
    with pytest.raises(ParameterError):
        RingParams(degrees, q, t)


def test_ring_params_rejects_large_q():
    with pytest.raises(ParameterError):
        RingParams((8,), (1 << 62) + 17, 3)


# MultiPoly / add --------------------------------------------------------------

def test_multipoly_is_readonly_and_validated():
    p = MultiPoly.from_ints([1, 2, 3, 4], 7, (2, 2))
    with pytest.raises(ValueError):
        p.data[0, 0] = 5
    with pytest.raises((StructureError, ValueError)):
        MultiPoly((2, 2), 7, np.array([[1, 2], [3, 9]], dtype=np.uint64))


def test_add_identity_and_wrap():
    q = 257
    a = MultiPoly.from_ints(list(range(16)), q, (4, 4))
    assert a + MultiPoly.zeros((4, 4), q) == a
    top = MultiPoly.constant(q - 1, (4, 4), q) + MultiPoly.zeros((4, 4), q)
    full = MultiPoly((4, 4), q, np.full((4, 4), q - 1, dtype=np.uint64))
    one = MultiPoly((4, 4), q, np.ones((4, 4), dtype=np.uint64))
    assert not (full + one).data.any()
    assert top.data[0, 0] == q - 1


def test_add_matches_bignum(rng):
    q = Q60
    a, b = rand_poly(rng, (8, 8), q), rand_poly(rng, (8, 8), q)
    want = [(int(x) + int(y)) % q for x, y in zip(a.coeffs, b.coeffs)]
    assert add(a, b).to_list() == want
    want = [(int(x) - int(y)) % q for x, y in zip(a.coeffs, b.coeffs)]
    assert sub(a, b).to_list() == want


def test_binary_ops_check_shape_and_modulus():
    a = MultiPoly.zeros((4, 4), 257)
    with pytest.raises(StructureError):
        a + MultiPoly.zeros((16,), 257)
    with pytest.raises(StructureError):
        a + MultiPoly.zeros((4, 4), 769)
    with pytest.raises(StructureError):
        negacyclic_mul(a, MultiPoly.zeros((2, 8), 257))


def test_scalar_mul_bignum(rng):
    a = rand_poly(rng, (32,), Q60)
    c = 123456789123456789
    assert scalar_mul(a, c).to_list() == [int(x) * c % Q60 for x in a.coeffs]


# modular arithmetic kernel ----------------------------------------------------

@given(st.lists(st.tuples(st.integers(0, Q60 - 1), st.integers(0, Q60 - 1)), min_size=1, max_size=50))
def test_montgomery_mul_exact(pairs):
    m = modulus(Q60)
    a = np.array([p[0] for p in pairs], dtype=np.uint64)
    b = np.array([p[1] for p in pairs], dtype=np.uint64)
    got = [int(v) for v in m.mul(a, b)]
    assert got == [x * y % Q60 for x, y in pairs]


@pytest.mark.parametrize("q", [3, 257, 12289, (1 << 61) - 1, 4611686018427387847])
def test_montgomery_extremes(q):
    m = modulus(q)
    vals = np.array([0, 1, 2, q - 2, q - 1], dtype=np.uint64)
    a, b = np.meshgrid(vals, vals)
    got = m.mul(a.ravel(), b.ravel())
    assert [int(v) for v in got] == [int(x) * int(y) % q for x, y in zip(a.ravel(), b.ravel())]


def test_tree_sum_matches_python(rng):
    q = Q60
    terms = rng.integers(0, q, size=(37, 5), dtype=np.uint64)
    want = [sum(int(v) for v in terms[:, j]) % q for j in range(5)]
    assert [int(v) for v in tree_sum(terms, q)] == want


# negacyclic multiplication ----------------------------------------------------

def test_mul_identity_and_wrap():
    q = 257
    shape = (8, 4)
    a = MultiPoly.from_ints(list(range(32)), q, shape)
    one = MultiPoly.constant(1, shape, q)
    assert negacyclic_mul(a, one) == a
    top = MultiPoly.monomial((7, 0), shape, q)
    x1 = MultiPoly.monomial((1, 0), shape, q)
    assert negacyclic_mul(top, x1) == MultiPoly.constant(q - 1, shape, q)


@pytest.mark.parametrize("shape,q", [((64,), 257), ((8, 8), 257), ((16, 16), 12289), ((8, 8, 4), 257),
                                     ((4, 2, 2, 2), 17), ((32,), Q60)])
def test_ntt_matches_dict_oracle(rng, shape, q):
    a, b = rand_poly(rng, shape, q), rand_poly(rng, shape, q)
    want = oracles.negacyclic_mul(a.coeffs, b.coeffs, shape, q)
    assert negacyclic_mul(a, b).to_list() == want
    assert negacyclic_mul(a, b, method="schoolbook").to_list() == want


def test_ntt_large_ring_matches_schoolbook(rng):
    shape = (4096,)
    a, b = rand_poly(rng, shape, Q60), rand_poly(rng, shape, Q60)
    assert negacyclic_mul(a, b) == negacyclic_mul(a, b, method="schoolbook")


def test_ntt_requires_roots_unless_schoolbook(rng):
    q = 263  # prime, but 263 - 1 is not divisible by 16
    a = MultiPoly.uniform((8,), q, rng)
    with pytest.raises(ParameterError):
        negacyclic_mul(a, a)
    want = oracles.negacyclic_mul(a.coeffs, a.coeffs, (8,), q)
    assert negacyclic_mul(a, a, method="schoolbook").to_list() == want
    assert ring_mul(a, a).to_list() == want


def test_schoolbook_composite_modulus(rng):
    t = 1000
    a, b = MultiPoly.uniform((4, 4), t, rng), MultiPoly.uniform((4, 4), t, rng)
    assert negacyclic_mul(a, b, method="schoolbook").to_list() == oracles.negacyclic_mul(
        a.coeffs, b.coeffs, (4, 4), t)


shape_st = st.sampled_from([(16,), (4, 4), (2, 4, 2), (8, 2)])


@settings(max_examples=25)
@given(shape=shape_st, seed=st.integers(0, 2**32 - 1))
def test_ring_laws(shape, seed):
    rng = np.random.default_rng(seed)
    q = 257
    a, b, c = (rand_poly(rng, shape, q) for _ in range(3))
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


# axis NTT ---------------------------------------------------------------------

def test_axis_ntt_is_negacyclic_evaluation(rng):
    q, n = 257, 16
    p = MultiPoly.uniform((n,), q, rng)
    psi = find_root(q, n, "neg_one")
    got = axis_ntt(p, 0).to_list()
    assert got == [oracles.negacyclic_eval(p.coeffs, psi, k, q) for k in range(n)]


@given(seed=st.integers(0, 2**32 - 1), axis=st.integers(0, 2))
def test_axis_ntt_roundtrip(seed, axis):
    rng = np.random.default_rng(seed)
    p = MultiPoly.uniform((8, 4, 1), 257, rng)
    f = axis_ntt(p, axis, "forward")
    assert axis_ntt(f, axis, "inverse") == p
    if axis == 2:
        assert f == p  # degree-1 axis is the identity


def test_axis_ntt_pointwise_path_8x8(rng):
    q, shape = 257, (8, 8)
    a, b = rand_poly(rng, shape, q), rand_poly(rng, shape, q)
    fa, fb = a, b
    for ax in range(2):
        fa, fb = axis_ntt(fa, ax), axis_ntt(fb, ax)
    prod = MultiPoly(shape, q, (fa.data.astype(object) * fb.data.astype(object) % q).astype(np.uint64))
    for ax in range(2):
        prod = axis_ntt(prod, ax, "inverse")
    assert prod.to_list() == oracles.negacyclic_mul(a.coeffs, b.coeffs, shape, q)


def test_axis_ntt_missing_roots():
    p = MultiPoly.zeros((8,), 263)
    with pytest.raises(ParameterError):
        axis_ntt(p, 0)


def test_ntt_array_batch_axes(rng):
    q, shape = 257, (4, 8)
    batch = rng.integers(0, q, size=(3,) + shape, dtype=np.uint64)
    whole = ntt_array(batch, q, shape)
    for i in range(3):
        assert np.array_equal(whole[i], ntt_array(batch[i], q, shape))


# find_root --------------------------------------------------------------------

def test_find_root_trivial():
    assert find_root(257, 1, "unity") == 1


@pytest.mark.parametrize("p,order,kind", [(12289, 8, "neg_one"), (257, 16, "unity"), (257, 4, "neg_one"),
                                          (97, 48, "unity"), (12289, 3, "unity"), (7681, 256, "neg_one")])
def test_find_root_is_smallest(p, order, kind):
    assert find_root(p, order, kind) == oracles.brute_root(p, order, kind)


def test_find_root_missing():
    with pytest.raises(ExistenceError):
        find_root(257, 3, "unity")
    with pytest.raises(ExistenceError):
        find_root(257, 256, "neg_one")


def test_find_root_large_modulus():
    r = find_root(Q60, 4096, "neg_one")
    assert pow(r, 4096, Q60) == Q60 - 1


# base decomposition -------------------------------------------------------------

def test_num_digits():
    assert num_digits(257, 257) == 1
    assert num_digits(258, 257) == 2
    assert num_digits(Q60, 2) == Q60.bit_length()


def test_base_decompose_examples():
    q = 12289
    zero = base_decompose(MultiPoly.zeros((4,), q), 16)
    assert all(not d.data.any() for d in zero.digits)
    T = 16
    dec = base_decompose(MultiPoly.constant(T + 1, (4,), q), T)
    assert len(dec.digits) == num_digits(q, T)
    assert [int(d.coeffs[0]) for d in dec.digits] == [1, 1, 0, 0]
    with pytest.raises(ParameterError):
        base_decompose(zero.digits[0], 1)
    with pytest.raises(ParameterError):
        base_decompose(zero.digits[0], q)


@given(seed=st.integers(0, 2**32 - 1), T=st.sampled_from([2, 3, 16, 257, 65537, 1 << 30]))
def test_base_decompose_reconstructs(seed, T):
    rng = np.random.default_rng(seed)
    p = MultiPoly.uniform((4, 4), Q60, rng)
    dec = base_decompose(p, T)
    assert dec.reconstruct() == p
    L = num_digits(Q60, T)
    for k, c in enumerate(p.coeffs):
        assert [int(d.coeffs[k]) for d in dec.digits] == oracles.digits(int(c), T, L)


# ring mappings ------------------------------------------------------------------

def test_remap_identity():
    p = MultiPoly.from_ints(list(range(64)), 257, (8, 8))
    assert remap(p, RingMapping.identity((8, 8))) == p


def test_remap_row_major_split():
    # z^(8i + j) -> x_1^i x_2^j: x_2 is the in-block position, x_1 the block index
    p = MultiPoly.from_ints(list(range(64)), 257, (64,))
    out = remap(p, RingMapping.reshape((64,), (8, 8)))
    for i in range(8):
        for j in range(8):
            assert int(out.data[i, j]) == 8 * i + j


def test_remap_inverse_random(rng):
    p = MultiPoly.uniform((64,), 257, rng)
    for _ in range(50):
        m = RingMapping.random((64,), (4, 4, 4), rng)
        out = remap(p, m)
        assert out.to_list() == oracles.remap_flat(p.to_list(), m.perm)
        assert remap(out, m.inverse()) == p


def test_mapping_composition(rng):
    p = MultiPoly.uniform((16,), 257, rng)
    m1 = RingMapping.random((16,), (4, 4), rng)
    m2 = RingMapping.random((4, 4), (2, 8), rng)
    assert remap(remap(p, m1), m2) == remap(p, m1.then(m2))


def test_mapping_rejects_bad_input():
    with pytest.raises(StructureError):
        RingMapping((8,), (4, 4), np.arange(8))
    with pytest.raises(StructureError):
        RingMapping((4,), (2, 2), np.array([0, 0, 1, 2]))
    with pytest.raises(StructureError):
        remap(MultiPoly.zeros((8,), 257), RingMapping.identity((4, 2)))
