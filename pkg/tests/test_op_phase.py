import json
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from mrasim import error_model, op_phase
from mrasim.op_phase import (
    DetectedError,
    Identity,
    Scheme,
    SessionDecode,
    build_occupancy_estimate,
    decode_session,
    decode_subblock,
    finalize_lists,
    icr_decode,
    modulate,
    op_decode_single,
)

from helpers import dyadic_scheme, table_scheme


@pytest.fixture(scope="module")
def scheme():
    return dyadic_scheme()


@pytest.fixture(scope="module")
def ka50():
    return table_scheme(50)


def superpose(scheme, indices):
    y = np.zeros(scheme.signals.shape[1])
    for u in indices:
        y = y + modulate(u, scheme)
    return y


class TestIdentities:
    def test_uniform_chi_square(self):
        rng = np.random.default_rng(1)
        V, n_p = 4, 15
        counts = Counter()
        for _ in range(200_000):
            ident = op_phase.select_identity_uniform(V, n_p, rng)
            counts[ident.s] += 1
        obs = [counts[s] for s in range(1, V * n_p + 1)]
        assert stats.chisquare(obs).pvalue > 0.01

    def test_single_subblock(self, rng):
        assert {op_phase.select_identity_uniform(1, 7, rng).v for _ in range(100)} == {1}

    def test_identity_bijection(self):
        V, n_p = 5, 7
        seen = set()
        for v in range(1, V + 1):
            for u in range(1, n_p + 1):
                ident = Identity(v, u, V)
                assert Identity.from_s(ident.s, V) == ident
                seen.add(ident.s)
        assert seen == set(range(1, V * n_p + 1))

    def test_omt_mass_function_example(self):
        F = Fraction
        expected = [
            [F(1, 16), F(1, 16), F(1, 8), F(1, 16)],
            [F(1, 16), F(1, 8), F(1, 8), F(1, 16)],
            [F(1, 16), F(1, 8), F(1, 16), F(1, 16)],
        ]
        assert error_model.omt_mass_function(3, 4) == expected

    def test_omt_roundtrip(self, rng):
        V, n_p = 3, 4
        k1 = op_phase.omt_k1(V, n_p)
        for value in range(2**k1):
            prefix = np.array([(value >> (k1 - 1 - j)) & 1 for j in range(k1)])
            targets = set()
            for _ in range(40):
                ident = op_phase.select_identity_omt(prefix, V, n_p, rng)
                assert np.array_equal(op_phase.omt_prefix(ident, n_p), prefix)
                targets.add(ident.s)
            assert len(targets) == (2 if value + 1 <= V * n_p - 2**k1 else 1)

    def test_omt_power_of_two_is_uniform(self):
        mass = error_model.omt_mass_function(4, 8)
        assert all(m == Fraction(1, 32) for row in mass for m in row)

    def test_omt_prefix_length_checked(self, rng):
        with pytest.raises(ValueError):
            op_phase.select_identity_omt([1, 0], 3, 4, rng)

    def test_vectorized_omt_draws_follow_mass(self):
        rng = np.random.default_rng(2)
        v, u, _ = op_phase.draw_identities(400_000, 3, 4, True, rng)
        mass = np.array(error_model.omt_mass_function(3, 4), dtype=float)
        emp = np.zeros((3, 4))
        np.add.at(emp, (v, u), 1)
        emp /= v.size
        assert np.abs(emp - mass).max() < 5 * np.sqrt(0.125 / v.size)


class TestModulation:
    def test_energy_and_alphabet(self, ka50):
        A = ka50.amplitude
        for u in range(1, 16):
            x = modulate(u, ka50)
            assert np.allclose(np.abs(x), A)
            assert x @ x == pytest.approx(ka50.params.P1 * ka50.params.V * ka50.params.n_c1, rel=1e-12)

    def test_difference_vanishes_where_codewords_agree(self, ka50):
        from mrasim.codes import encode_inner

        H = ka50.aux.parity_check
        c1 = encode_inner(ka50.inner, H[:, 0])
        c2 = encode_inner(ka50.inner, H[:, 1])
        diff = modulate(1, ka50) - modulate(2, ka50)
        assert np.array_equal(diff == 0, c1 == c2)

    def test_bad_index(self, ka50):
        with pytest.raises(ValueError):
            modulate(0, ka50)

    def test_channel(self):
        rng = np.random.default_rng(5)
        obs = op_phase.subblock_channel([], 20000, rng)
        assert obs.y.var() == pytest.approx(1.0, abs=0.05)
        x = np.ones(8)
        a = op_phase.subblock_channel([x, x], 8, np.random.default_rng(9))
        b = op_phase.subblock_channel([x, x], 8, np.random.default_rng(9))
        assert np.array_equal(a.y, b.y)
        assert np.allclose(a.y - a.z, 2 * x)


class TestSingleDecode:
    def test_single_user(self, scheme):
        for u in range(1, 16):
            assert op_decode_single(modulate(u, scheme), 1, scheme) == {u}

    def test_distinct_users(self, scheme, rng):
        for _ in range(200):
            t = int(rng.integers(0, scheme.T + 1))
            idx = [int(u) + 1 for u in rng.choice(15, size=t, replace=False)]
            assert op_decode_single(superpose(scheme, idx), t, scheme) == frozenset(idx)

    def test_wrong_parity_dither_breaks_decoding(self, ka50, rng):
        # An odd dither error adds 1/2 per coordinate; the true set rarely survives.
        hits = 0
        trials = 300
        for _ in range(trials):
            idx = [int(u) + 1 for u in rng.choice(15, size=2, replace=False)]
            y = superpose(ka50, idx) + rng.standard_normal(ka50.signals.shape[1])
            try:
                L = op_decode_single(y, 3, ka50)
            except DetectedError:
                continue
            hits += L == frozenset(idx)
        assert hits / trials < 0.05

    def test_negative_t_hat(self, scheme):
        with pytest.raises(ValueError):
            op_decode_single(np.zeros(18), -1, scheme)


class TestIcr:
    def test_worked_example(self, scheme):
        u1, u2, u3 = 2, 5, 9
        z = np.zeros(18)
        y = superpose(scheme, [u1] * 3 + [u2] * 4 + [u3]) + z
        lists = icr_decode(y, 8, scheme)
        assert lists == [frozenset({u1, u3}), frozenset({u1}), frozenset({u2})]
        singles, resid = finalize_lists(lists, y, scheme)
        assert singles == {u3}
        assert np.array_equal(resid, z)

    def test_distinct_indices_single_level(self, scheme):
        lists = icr_decode(superpose(scheme, [1, 4, 7]), 3, scheme)
        assert lists == [frozenset({1, 4, 7})]

    def test_one_pair_collided(self, scheme):
        y = superpose(scheme, [3, 3, 8])
        lists = icr_decode(y, 3, scheme)
        assert lists == [frozenset({8}), frozenset({3})]
        singles, resid = finalize_lists(lists, y, scheme)
        assert singles == {8}
        assert not resid.any()

    def test_single_level_finalize(self, scheme):
        y = superpose(scheme, [2, 6]) + 0.25
        singles, resid = finalize_lists([frozenset({2, 6})], y, scheme)
        assert singles == {2, 6}
        assert np.array_equal(resid, y - modulate(2, scheme) - modulate(6, scheme))

    @pytest.mark.parametrize("n_p,k_p,n_c1", [(15, 5, 18), (7, 4, 8), (15, 7, 14), (23, 12, 16)])
    def test_singles_property(self, n_p, k_p, n_c1):
        sch = dyadic_scheme(n_p, k_p, n_c1)
        rng = np.random.default_rng(n_p * 100 + k_p)
        for _ in range(1000):
            t = int(rng.integers(0, sch.T + 1))
            idx = [int(u) + 1 for u in rng.integers(0, n_p, size=t)]
            y = superpose(sch, idx)
            lists = icr_decode(y, t, sch)
            assert len(lists) <= (int(np.floor(np.log2(t))) + 1 if t else 1)
            singles, resid = finalize_lists(lists, y, sch)
            mult = Counter(idx)
            assert singles == {u for u, m in mult.items() if m == 1}
            assert not resid.any()

    def test_list_too_long_is_detected(self, scheme):
        with pytest.raises(DetectedError):
            icr_decode(superpose(scheme, [1, 2]), 1, scheme)


class TestSubblock:
    def test_noiseless_recovery(self, scheme, rng):
        for _ in range(100):
            t = int(rng.integers(0, scheme.T + 1))
            idx = [int(u) + 1 for u in rng.choice(15, size=t, replace=False)]
            dec = decode_subblock(superpose(scheme, idx), scheme)
            assert dec.t_star == t
            assert dec.singles == frozenset(idx)

    def test_empty_subblock_prefers_zero(self, ka50):
        rng = np.random.default_rng(8)
        picks = [decode_subblock(rng.standard_normal(18), ka50).t_star for _ in range(300)]
        assert picks.count(0) / len(picks) > 0.97

    def test_policies(self, ka50):
        with pytest.raises(ValueError):
            decode_subblock(np.zeros(18), ka50, error_policy="nope")

    @pytest.mark.parametrize("policy", op_phase.ERROR_POLICIES)
    @pytest.mark.parametrize("icr", [True, False])
    def test_batched_matches_reference(self, ka50, policy, icr):
        rng = np.random.default_rng(11)
        V = 120
        Y = rng.standard_normal((V, 18)) * 1.3
        v = rng.integers(V, size=60)
        u = rng.integers(15, size=60)
        np.add.at(Y, v, ka50.signals[u])
        batch = decode_session(Y, ka50, icr=icr, error_policy=policy)
        ref = SessionDecode.from_decisions(
            [decode_subblock(Y[i], ka50, icr=icr, error_policy=policy) for i in range(V)], 15
        )
        assert np.array_equal(batch.singles, ref.singles)
        assert np.array_equal(batch.collided, ref.collided)
        assert np.array_equal(batch.t_star, ref.t_star)


class TestOccupancy:
    def decode(self, ones, collided=(), shape=(6, 5)):
        singles = np.zeros(shape, dtype=bool)
        coll = np.zeros(shape, dtype=bool)
        for v, u in ones:
            singles[v, u] = True
        for v, u in collided:
            coll[v, u] = True
        return SessionDecode(singles, coll, np.zeros(shape[0], dtype=int))

    def test_exact_count_is_identity(self, rng):
        dec = self.decode([(0, 0), (3, 2), (5, 4)])
        est = build_occupancy_estimate(dec, 3, rng)
        assert np.array_equal(est.S_hat.astype(bool), dec.singles)
        assert est.padded == () and est.erased == ()

    def test_erasure(self, rng):
        ones = [(0, 0), (3, 2), (5, 4), (1, 1), (2, 3)]
        est = build_occupancy_estimate(self.decode(ones), 3, rng)
        assert est.S_hat.sum() == 3 and len(est.erased) == 2
        assert all((v - 1, u - 1) in ones for v, u in est.erased)

    def test_padding_avoids_collided(self):
        coll = [(v, u) for v in range(6) for u in range(5) if (v + u) % 2]
        for seed in range(50):
            est = build_occupancy_estimate(self.decode([(0, 0)], coll), 4, np.random.default_rng(seed))
            assert est.S_hat.sum() == 4 and len(est.padded) == 3
            assert all((v + u) % 2 == 0 for v, u in est.padded)

    def test_assignment_order(self, rng):
        est = build_occupancy_estimate(self.decode([(5, 0), (0, 1), (2, 0)]), 3, rng)
        V = 6
        s = [v + V * (u - 1) for v, u in est.assignment]
        assert s == sorted(s) and est.assignment[0] == (3, 1)
        assert est.slot_of(1, 2) == 3 and est.slot_of(2, 2) is None


def test_scheme_json_roundtrip(ka50):
    back = Scheme.from_json(ka50.to_json())
    assert np.array_equal(back.inner.generator, ka50.inner.generator)
    assert np.array_equal(back.aux.parity_check, ka50.aux.parity_check)
    assert back.params == ka50.params and back.seed == ka50.seed
    assert json.loads(ka50.to_json())["params"]["V"] == 448


def test_scheme_build_deterministic():
    a, b = table_scheme(50, seed=4), table_scheme(50, seed=4)
    assert np.array_equal(a.inner.generator, b.inner.generator)
