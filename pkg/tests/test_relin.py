import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from mrlwe.errors import StructureError
from mrlwe.params import choose_prime, min_q_bound
from mrlwe.relin import (StructureKey, gen_mult_key, gen_relin_key, gen_structure_key, relinearize,
                         remap_secret_key, skew_columns, square_key, switch_structure)
from mrlwe.ring import MultiPoly, RingMapping, RingParams, negacyclic_mul, num_digits, remap, ring_mul, scalar_mul
from mrlwe.she import Ciphertext, NoiseParams, decrypt, encrypt, he_mul, keygen, noise_norm

NOISE = NoiseParams(1.0)


def params_for(shape, t=257, D=2):
    n = int(np.prod(shape))
    return RingParams(shape, choose_prime(min_q_bound(t, 1.0, n, D), shape), t)


@pytest.fixture(scope="module")
def ring64():
    return params_for((64,))


@pytest.fixture(scope="module")
def keys64(ring64):
    return keygen(ring64, NOISE, np.random.default_rng(2))


# relinearization key -----------------------------------------------------------

def test_relin_key_relation(ring64, keys64):
    sk, _ = keys64
    rk = gen_mult_key(sk, rng=np.random.default_rng(3))
    q, t = ring64.q, ring64.t
    s2 = square_key(sk)
    assert rk.base == t
    assert len(rk.hom) == num_digits(q, t)
    for i, (a, b) in enumerate(rk.hom):
        rel = (b + negacyclic_mul(sk.s, a) - scalar_mul(s2, pow(t, i, q))).centered()
        assert np.all(rel % t == 0)
        assert np.abs(rel // t).max() <= NOISE.trunc_B * NOISE.sigma


def test_relinearize_product(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(4)
    rk = gen_mult_key(sk, rng=rng)
    t = ring64.t
    for _ in range(10):
        m1, m2 = (MultiPoly.uniform(ring64.shape, t, rng) for _ in range(2))
        c = he_mul(encrypt(pk, m1, NOISE, rng), encrypt(pk, m2, NOISE, rng))
        r = relinearize(c, rk)
        assert r.gamma == 2 and r.depth == 1
        assert decrypt(sk, r) == decrypt(sk, c) == ring_mul(m1, m2)


def test_relinearize_zero_third_component(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(5)
    rk = gen_mult_key(sk, rng=rng)
    m = MultiPoly.uniform(ring64.shape, ring64.t, rng)
    c = encrypt(pk, m, NOISE, rng)
    c3 = Ciphertext(c.comps + (MultiPoly.zeros(ring64.shape, ring64.q),), ring64, 0)
    r = relinearize(c3, rk)
    assert r.comps == c.comps
    assert decrypt(sk, r) == m


def test_relinearize_noise_growth(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(6)
    rk = gen_mult_key(sk, rng=rng)
    n, q, t = ring64.n, ring64.q, ring64.t
    L = num_digits(q, rk.base)
    m1, m2 = (MultiPoly.uniform(ring64.shape, t, rng) for _ in range(2))
    c = he_mul(encrypt(pk, m1, NOISE, rng), encrypt(pk, m2, NOISE, rng))
    m = ring_mul(m1, m2)
    before, after = noise_norm(sk, c, m), noise_norm(sk, relinearize(c, rk), m)
    # the added term is t * sum_i d_i e_i with digits below T and |e_i| <= B sigma
    assert after - before <= t * n * L * rk.base * NOISE.trunc_B * NOISE.sigma


def test_depth_two_with_relinearization():
    params = params_for((32,), D=2)
    rng = np.random.default_rng(7)
    sk, pk = keygen(params, NOISE, rng)
    rk = gen_mult_key(sk, rng=rng)
    t = params.t
    ms = [MultiPoly.uniform(params.shape, t, rng) for _ in range(3)]
    cs = [encrypt(pk, m, NOISE, rng) for m in ms]
    c = relinearize(he_mul(cs[0], cs[1]), rk)
    c = relinearize(he_mul(c, cs[2]), rk)
    assert c.depth == 2 and c.gamma == 2
    assert decrypt(sk, c) == ring_mul(ring_mul(ms[0], ms[1]), ms[2])


def test_relinearize_requires_three_components(ring64, keys64):
    sk, pk = keys64
    rk = gen_mult_key(sk, rng=np.random.default_rng(8))
    c = encrypt(pk, MultiPoly.zeros(ring64.shape, ring64.t), NOISE, np.random.default_rng(8))
    with pytest.raises(StructureError):
        relinearize(c, rk)


def test_relin_key_seeds(ring64, keys64):
    sk, pk = keys64
    rk1 = gen_mult_key(sk, rng=np.random.default_rng(1))
    rk2 = gen_mult_key(sk, rng=np.random.default_rng(2))
    assert rk1.hom[0][0] != rk2.hom[0][0]
    rng = np.random.default_rng(9)
    m1, m2 = (MultiPoly.uniform(ring64.shape, ring64.t, rng) for _ in range(2))
    c = he_mul(encrypt(pk, m1, NOISE, rng), encrypt(pk, m2, NOISE, rng))
    assert decrypt(sk, relinearize(c, rk1)) == decrypt(sk, relinearize(c, rk2))


def test_key_switch_between_keys(ring64, keys64):
    """A relin key from s to s' moves a (c0, c1) under s to one under s'."""
    sk, pk = keys64
    rng = np.random.default_rng(10)
    sk2, _ = keygen(ring64, NOISE, rng)
    rk = gen_relin_key(sk, sk2, rng=rng)
    m = MultiPoly.uniform(ring64.shape, ring64.t, rng)
    c0, c1 = encrypt(pk, m, NOISE, rng).comps
    # treat (c0, 0, c1) as decrypting under (1, s', s): relinearize c1 from s to s'
    moved = relinearize(Ciphertext((c0, MultiPoly.zeros(ring64.shape, ring64.q), c1), ring64, 0), rk)
    assert decrypt(sk2, moved) == m


def test_relin_key_shape_checks(ring64, keys64):
    sk, _ = keys64
    other = params_for((8, 8))
    sk_other, _ = keygen(other, NOISE, np.random.default_rng(0))
    with pytest.raises(StructureError):
        gen_relin_key(sk, sk_other)


# skew-circulant expansion -----------------------------------------------------------

@settings(max_examples=20)
@given(seed=st.integers(0, 2**32 - 1), shape=st.sampled_from([(16,), (4, 4), (2, 4, 2)]))
def test_skew_columns_expand_product(seed, shape):
    rng = np.random.default_rng(seed)
    q = 257
    n = int(np.prod(shape))
    c = MultiPoly.uniform(shape, q, rng)
    s_vals = rng.integers(-3, 4, size=n)
    s = MultiPoly.from_ints(s_vals.tolist(), q, shape)
    cols = skew_columns(c.data, np.arange(n), q)
    acc = MultiPoly.zeros(shape, q)
    for j in range(n):
        acc = acc + scalar_mul(MultiPoly(shape, q, cols[j]), int(s_vals[j]) % q)
    assert acc == negacyclic_mul(c, s)


def test_skew_columns_match_monomial_products(rng):
    q, shape = 257, (4, 2)
    c = MultiPoly.uniform(shape, q, rng)
    cols = skew_columns(c.data, np.arange(8), q)
    for j, idx in enumerate(np.ndindex(*shape)):
        want = oracles.negacyclic_mul(c.coeffs, MultiPoly.monomial(idx, shape, q).coeffs, shape, q)
        assert [int(v) for v in cols[j].reshape(-1)] == want


# structure switching ------------------------------------------------------------------

@pytest.fixture(scope="module")
def split_keys(ring64, keys64):
    sk, pk = keys64
    mapping = RingMapping.reshape((64,), (8, 8))
    sk2 = remap_secret_key(sk, mapping)
    stk = gen_structure_key(sk, sk2, mapping, rng=np.random.default_rng(11))
    return sk, pk, sk2, stk


def test_structure_key_layout(ring64, split_keys):
    sk, _, sk2, stk = split_keys
    L = num_digits(ring64.q, ring64.t)
    assert stk.a_grid.shape == (64, L, 8, 8)
    # 64 source coefficients: 2 * 64 * L * n_target
    assert stk.size_coeffs == 128 * L * stk.target.n
    q, t = ring64.q, ring64.t
    s_vals = sk.s.centered().reshape(-1)
    for j in (0, 5, 63):
        a, b = stk.pair(j, 0)
        rel = (b + negacyclic_mul(sk2.s, a)).centered()
        rel[0, 0] -= s_vals[j]
        assert np.all(rel % t == 0)
        assert np.abs(rel // t).max() <= 6


def test_switch_split_64_to_8x8(ring64, split_keys):
    sk, pk, sk2, stk = split_keys
    rng = np.random.default_rng(12)
    for _ in range(10):
        m = MultiPoly.uniform((64,), ring64.t, rng)
        out = switch_structure(encrypt(pk, m, NOISE, rng), stk)
        assert out.params.shape == (8, 8)
        assert decrypt(sk2, out) == remap(m, stk.mapping)


def test_switch_identity(ring64, keys64):
    sk, pk = keys64
    ident = RingMapping.identity((64,))
    stk = gen_structure_key(sk, remap_secret_key(sk, ident), ident, rng=np.random.default_rng(13))
    rng = np.random.default_rng(14)
    m = MultiPoly.uniform((64,), ring64.t, rng)
    assert decrypt(sk, switch_structure(encrypt(pk, m, NOISE, rng), stk)) == m


def test_switch_chain_equals_composition(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(15)
    w1 = RingMapping.random((64,), (8, 8), rng)
    w2 = RingMapping.random((8, 8), (4, 4, 4), rng)
    sk1 = remap_secret_key(sk, w1)
    sk2 = remap_secret_key(sk1, w2)
    stk1 = gen_structure_key(sk, sk1, w1, rng=rng)
    stk2 = gen_structure_key(sk1, sk2, w2, rng=rng)
    m = MultiPoly.uniform((64,), ring64.t, rng)
    out = switch_structure(switch_structure(encrypt(pk, m, NOISE, rng), stk1), stk2)
    assert decrypt(sk2, out) == remap(m, w1.then(w2))


def test_switch_other_base(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(16)
    w = RingMapping.random((64,), (2, 32), rng)
    stk = gen_structure_key(sk, remap_secret_key(sk, w), w, T=1 << 12, rng=rng)
    m = MultiPoly.uniform((64,), ring64.t, rng)
    out = switch_structure(encrypt(pk, m, NOISE, rng), stk)
    assert decrypt(remap_secret_key(sk, w), out) == remap(m, w)


def test_switch_after_relinearized_product(ring64, keys64):
    sk, pk = keys64
    rng = np.random.default_rng(17)
    rk = gen_mult_key(sk, rng=rng)
    w = RingMapping.reshape((64,), (8, 8))
    sk2 = remap_secret_key(sk, w)
    stk = gen_structure_key(sk, sk2, w, rng=rng)
    m1, m2 = (MultiPoly.uniform((64,), ring64.t, rng) for _ in range(2))
    c = relinearize(he_mul(encrypt(pk, m1, NOISE, rng), encrypt(pk, m2, NOISE, rng)), rk)
    assert decrypt(sk2, switch_structure(c, stk)) == remap(ring_mul(m1, m2), w)


def test_switch_errors(ring64, split_keys):
    sk, pk, sk2, stk = split_keys
    rng = np.random.default_rng(18)
    c = encrypt(pk, MultiPoly.zeros((64,), ring64.t), NOISE, rng)
    with pytest.raises(StructureError):
        switch_structure(he_mul(c, c), stk)
    other = params_for((32,))
    _, pk_o = keygen(other, NOISE, rng)
    with pytest.raises(StructureError):
        switch_structure(encrypt(pk_o, MultiPoly.zeros((32,), other.t), NOISE, rng), stk)
    wrong, _ = keygen(stk.target, NOISE, rng)
    with pytest.raises(StructureError):
        gen_structure_key(sk, wrong, stk.mapping)
    with pytest.raises(StructureError):
        StructureKey(stk.base, stk.mapping, stk.source, stk.target, stk.a_grid[:3], stk.b_grid)


def test_switch_deterministic_and_pure(ring64, split_keys):
    sk, pk, sk2, stk = split_keys
    c = encrypt(pk, MultiPoly.uniform((64,), ring64.t, np.random.default_rng(19)), NOISE,
                np.random.default_rng(20))
    a = switch_structure(c, stk, chunk=64)
    b = switch_structure(c, stk, chunk=7)
    assert a.comps == b.comps
