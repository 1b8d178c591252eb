import itertools
from math import comb

import numpy as np
import pytest

from mrasim import catalog, codes, gf2
from mrasim.codes import AuxCode, DetectedFailure, InnerCode


def brute_min_distance(G):
    k, n = G.shape
    best = n
    for msg in itertools.product((0, 1), repeat=k):
        if any(msg):
            best = min(best, int((np.array(msg) @ G % 2).sum()))
    return best


class TestGf2:
    def test_rank_and_nullspace(self, rng):
        for _ in range(20):
            M = rng.integers(0, 2, size=(5, 9), dtype=np.uint8)
            N = gf2.nullspace(M)
            assert N.shape[0] == 9 - gf2.rank(M)
            assert not np.any(M.astype(int) @ N.T.astype(int) % 2)

    def test_bits_roundtrip(self):
        for v in (0, 1, 5, 1023):
            assert gf2.bits_to_int(gf2.int_to_bits(v, 10)) == v
        assert list(gf2.int_to_bits(5, 4)) == [0, 1, 0, 1]

    def test_span_indexing(self):
        G = np.array([[1, 0, 1], [0, 1, 1]], dtype=np.uint8)
        words = gf2.span(G)
        for i in range(4):
            expected = gf2.int_to_bits(i, 2) @ G % 2
            assert int(words[i]) == gf2.bits_to_int(expected)

    def test_min_distance_matches_brute_force(self, rng):
        for _ in range(10):
            G = rng.integers(0, 2, size=(4, 10), dtype=np.uint8)
            if gf2.rank(G) < 4:
                continue
            assert gf2.min_distance(G) == brute_min_distance(G)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            gf2.as_bits([0, 2])


class TestCatalog:
    @pytest.mark.parametrize(
        "n,k,d", [(15, 5, 7), (31, 13, 9), (23, 12, 7), (24, 12, 8), (31, 16, 7), (7, 4, 3), (15, 7, 5)]
    )
    def test_known_distances(self, n, k, d):
        assert catalog.best_min_distance(n, k) == d

    @pytest.mark.parametrize("n", [2, 5, 17, 63])
    def test_single_parity_check(self, n):
        assert catalog.best_min_distance(n, n - 1) == 2

    def test_domain(self):
        with pytest.raises(ValueError):
            catalog.lookup(5, 5)
        with pytest.raises(ValueError):
            catalog.lookup(5, 0)
        with pytest.raises(catalog.NotInCatalog):
            catalog.lookup(64, 10)

    def test_distance_only_row(self):
        with pytest.raises(catalog.NotInCatalog):
            catalog.parity_check_matrix(31, 13)

    def test_every_recipe_reaches_its_distance(self):
        # Spot check a spread of rows by exhaustive enumeration.
        rows = [e for e in catalog.load_catalog().values() if e.recipe]
        for entry in rows[:: max(1, len(rows) // 60)]:
            G = catalog.construct(entry.recipe)
            assert G.shape == (entry.k, entry.n)
            assert gf2.rank(G) == entry.k
            assert gf2.min_distance(G) >= entry.d

    def test_parity_check_is_dual(self):
        H = catalog.parity_check_matrix(15, 5)
        G = catalog.construct(catalog.lookup(15, 5).recipe)
        assert H.shape == (10, 15)
        assert not np.any(G.astype(int) @ H.T.astype(int) % 2)

    def test_catalog_monotone_in_dimension(self):
        table = catalog.load_catalog()
        for (n, k), e in table.items():
            nxt = table.get((n, k + 1))
            if nxt is not None:
                assert nxt.d <= e.d


class TestAuxCode:
    @pytest.mark.parametrize("n,k", [(15, 5), (7, 4), (15, 7), (23, 12), (31, 16)])
    def test_table_size_and_uniqueness(self, n, k):
        aux = AuxCode.from_catalog(n, k)
        expected = sum(comb(n, w) for w in range(aux.T + 1))
        assert len(aux.table) == expected
        # Brute force: distinct supports of weight <= T never share a syndrome.
        cols = aux.column_ints()
        seen = {}
        for w in range(aux.T + 1):
            for sup in itertools.combinations(range(n), w):
                s = 0
                for j in sup:
                    s ^= int(cols[j])
                assert s not in seen
                seen[s] = sup
                assert codes.bounded_distance_decode(aux.table, s) == frozenset(sup)

    def test_syndrome_roundtrip(self, rng):
        aux = AuxCode.from_catalog(15, 5)
        for _ in range(200):
            t = int(rng.integers(0, aux.T + 1))
            sup = rng.choice(15, size=t, replace=False)
            ind = np.zeros(15, dtype=np.uint8)
            ind[sup] = 1
            syn = codes.syndrome_of(aux, ind)
            assert codes.bounded_distance_decode(aux.table, syn) == frozenset(int(j) for j in sup)

    def test_detected_failure(self):
        aux = AuxCode.from_catalog(15, 5)
        missing = np.flatnonzero(aux.table.slots < 0)
        assert missing.size == 2**10 - len(aux.table)
        with pytest.raises(DetectedFailure):
            codes.bounded_distance_decode(aux.table, int(missing[0]))

    def test_rejects_repeated_columns(self):
        H = np.array([[1, 1, 0], [0, 0, 1]], dtype=np.uint8)
        with pytest.raises(ValueError):
            AuxCode(H, 3)

    def test_rejects_overstated_distance(self):
        H = catalog.parity_check_matrix(15, 7)
        with pytest.raises(ValueError):
            AuxCode(H, 7)


class TestInnerCode:
    def test_random_full_rank_and_deterministic(self):
        a = InnerCode.random(10, 18, np.random.default_rng(3))
        b = InnerCode.random(10, 18, np.random.default_rng(3))
        assert gf2.rank(a.generator) == 10
        assert np.array_equal(a.generator, b.generator)

    def test_rejects_rank_deficient(self):
        with pytest.raises(ValueError):
            InnerCode(np.array([[1, 1, 0], [1, 1, 0]], dtype=np.uint8))
        with pytest.raises(ValueError):
            InnerCode(np.ones((4, 3), dtype=np.uint8))

    def test_linearity(self, rng):
        code = InnerCode.random(6, 12, rng)
        for _ in range(50):
            a, b = rng.integers(0, 2, 6), rng.integers(0, 2, 6)
            lhs = codes.encode_inner(code, (a + b) % 2)
            rhs = (codes.encode_inner(code, a) + codes.encode_inner(code, b)) % 2
            assert np.array_equal(lhs, rhs)

    def test_codebook_matches_encoder(self, rng):
        code = InnerCode.random(5, 9, rng)
        book = code.codebook()
        for i in range(32):
            assert np.array_equal(book[i], codes.encode_inner(code, gf2.int_to_bits(i, 5)))

    def test_noiseless_ml(self, rng):
        code = InnerCode.random(8, 14, rng)
        for _ in range(30):
            m = rng.integers(0, 2, 8).astype(np.uint8)
            c = codes.encode_inner(code, m).astype(float)
            assert np.array_equal(codes.ml_decode_mod2(code, c, 0.05), m)

    def test_ml_is_brute_force_argmax(self, rng):
        code = InnerCode.random(4, 8, rng)
        s2 = 0.2
        from mrasim import fbl

        for _ in range(40):
            y = rng.uniform(0, 2, 8)
            like = [
                np.sum(fbl.wrapped_gauss_logpdf(np.mod(y - c, 2.0), s2)) for c in code.codebook()
            ]
            got = gf2.bits_to_int(codes.ml_decode_mod2(code, y, s2))
            assert like[got] == pytest.approx(max(like), abs=1e-9)

    def test_coset_symmetry(self, rng):
        # Shifting the observation by a codeword shifts the decision by it.
        code = InnerCode.random(6, 12, rng)
        book = code.codebook()
        for _ in range(40):
            y = rng.uniform(0, 2, 12)
            m = gf2.bits_to_int(codes.ml_decode_mod2(code, y, 0.1))
            j = int(rng.integers(64))
            shifted = np.mod(y + book[j], 2.0)
            m2 = gf2.bits_to_int(codes.ml_decode_mod2(code, shifted, 0.1))
            assert m2 == m ^ j

    def test_domain(self, rng):
        code = InnerCode.random(3, 6, rng)
        with pytest.raises(ValueError):
            codes.ml_decode_mod2(code, np.full(6, 2.0), 0.1)
        with pytest.raises(ValueError):
            codes.ml_decode_mod2(code, np.zeros(5), 0.1)


def test_identity_inner_code_fast_path_is_ml():
    from mrasim.codes import InnerCode, ml_decode_batch

    rng = np.random.default_rng(3)
    ident = InnerCode.identity(6)
    assert ident.is_identity
    assert not InnerCode.random(6, 9, rng).is_identity
    llr = rng.standard_normal((200, 6))
    fast = ml_decode_batch(ident, llr)
    slow = np.argmax(llr @ ident.codebook().T, axis=1)
    assert np.array_equal(fast, slow)
