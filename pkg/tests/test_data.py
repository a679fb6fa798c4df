import os

import numpy as np
import pytest

from dln.data import (
    RatingsDataset,
    SyntheticSpec,
    gen_gaussian_ops,
    gen_lowrank,
    gen_mcar_mask,
    gen_ratings_standin,
    load_movielens,
    split_ratings,
)
from dln.errors import ContractViolationError, ParseError, ResourceBudgetError
from dln.linalg import singular_values


class TestGenLowrank:
    def test_rank(self):
        M, U, s, V = gen_lowrank(SyntheticSpec(d=20, r=4, seed=0))
        sv = singular_values(M)
        assert sv[4] <= 1e-12

    def test_same_seed_identical(self):
        a = gen_lowrank(SyntheticSpec(d=10, r=3, seed=5))[0]
        b = gen_lowrank(SyntheticSpec(d=10, r=3, seed=5))[0]
        assert np.array_equal(a, b)

    def test_full_rank_unit_spectrum_is_orthogonal(self):
        M, U, s, V = gen_lowrank(SyntheticSpec(d=6, r=6, seed=1, sigma_values=(1.0,) * 6))
        assert np.allclose(M.T @ M, np.eye(6), atol=1e-12)

    def test_gram_identity(self):
        M, U, s, V = gen_lowrank(SyntheticSpec(d=15, r=5, seed=2))
        lhs = M.T @ M
        rhs = V @ np.diag(s**2) @ V.T
        assert np.linalg.norm(lhs - rhs) <= 1e-8

    def test_spectrum_descending_and_in_range(self):
        M, U, s, V = gen_lowrank(SyntheticSpec(d=12, r=6, seed=3, sigma_range=(0.5, 2.0)))
        assert np.all(np.diff(s) <= 0)
        assert np.all((s >= 0.5) & (s <= 2.0))

    def test_explicit_spectrum(self):
        M, U, s, V = gen_lowrank(SyntheticSpec(d=8, r=2, seed=4, sigma_values=(0.3, 0.7)))
        assert s.tolist() == [0.7, 0.3]

    def test_invalid_specs(self):
        with pytest.raises(ContractViolationError):
            SyntheticSpec(d=4, r=5, seed=0)
        with pytest.raises(ContractViolationError):
            SyntheticSpec(d=4, r=2, seed=0, sigma_values=(1.0,))
        with pytest.raises(ContractViolationError):
            SyntheticSpec(d=4, r=2, seed=0, sigma_range=(-1.0, 2.0))


class TestMcarMask:
    def test_full_probability(self):
        mask = gen_mcar_mask(5, 1.0, 0)
        assert mask.m == 25

    def test_same_seed_identical(self):
        a = gen_mcar_mask(10, 0.4, 3)
        b = gen_mcar_mask(10, 0.4, 3)
        assert np.array_equal(a.rows, b.rows) and np.array_equal(a.cols, b.cols)

    def test_binomial_concentration(self):
        fractions = [gen_mcar_mask(100, 0.3, seed).m / 100**2 for seed in range(30)]
        assert 0.27 <= float(np.mean(fractions)) <= 0.33

    def test_invalid_probability(self):
        with pytest.raises(ContractViolationError):
            gen_mcar_mask(5, 0.0, 0)
        with pytest.raises(ContractViolationError):
            gen_mcar_mask(5, 1.5, 0)


class TestGaussianOps:
    def test_entry_mean_within_three_sigma(self):
        op = gen_gaussian_ops(20, 50, 0)
        n = op.matrices.size
        assert abs(float(op.matrices.mean())) <= 3.0 / np.sqrt(n)

    def test_same_seed_identical(self):
        a = gen_gaussian_ops(5, 3, 1)
        b = gen_gaussian_ops(5, 3, 1)
        assert np.array_equal(a.matrices, b.matrices)

    def test_single_scalar(self):
        op = gen_gaussian_ops(1, 1, 2)
        assert op.matrices.shape == (1, 1, 1)

    def test_budget_enforced(self):
        with pytest.raises(ResourceBudgetError):
            gen_gaussian_ops(100, 1000, 0, budget_bytes=1000)


CANONICAL_LINES = [
    "1\t1\t5\t874965758",
    "1\t2\t3\t876893171",
    "2\t1\t4\t888550871",
    "3\t3\t1\t889237482",
    "2\t2\t2\t888551341",
]


class TestLoadMovielens:
    def test_parse_small_file(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text("\n".join(CANONICAL_LINES) + "\n")
        ds = load_movielens(path, shape=(3, 3))
        assert len(ds) == 5
        assert ds.users[0] == 0 and ds.items[0] == 0 and ds.ratings[0] == 5.0
        assert ds.timestamps[0] == 874965758

    def test_truncated_line_names_line_number(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text(CANONICAL_LINES[0] + "\n1\t2\t3\n")
        with pytest.raises(ParseError) as exc:
            load_movielens(path, shape=(3, 3))
        assert "line 2" in str(exc.value)

    def test_duplicate_pair_rejected(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text(CANONICAL_LINES[0] + "\n" + CANONICAL_LINES[0] + "\n")
        with pytest.raises(ParseError):
            load_movielens(path, shape=(3, 3))

    def test_rating_out_of_range(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text("1\t1\t6\t874965758\n")
        with pytest.raises(ParseError):
            load_movielens(path, shape=(3, 3))

    def test_id_out_of_range(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text("4\t1\t5\t874965758\n")
        with pytest.raises(ParseError):
            load_movielens(path, shape=(3, 3))

    def test_canonical_file_when_available(self):
        path = os.environ.get("DLN_ML100K", "data/ml-100k/u.data")
        if not os.path.exists(path):
            pytest.skip("canonical MovieLens 100K file not available in this environment")
        ds = load_movielens(path)
        assert len(ds) == 100000
        assert ds.n_users == 943 and ds.n_items == 1682


class TestSplitRatings:
    def _dataset(self, n=50, seed=0):
        import tempfile

        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "standin.data")
            shape = gen_ratings_standin(path, n_users=10, n_items=12, n_ratings=n, rank=2, seed=seed)
            return load_movielens(path, shape=shape)

    def test_counts_exact(self):
        ds = self._dataset(n=50)
        mask, y, test = split_ratings(ds, 0.8, seed=0)
        assert mask.m == 40 and test.shape[0] == 10

    def test_disjoint_union(self):
        ds = self._dataset(n=60)
        mask, y, test = split_ratings(ds, 0.8, seed=1)
        train_set = set(zip(mask.rows.tolist(), mask.cols.tolist()))
        test_set = set(zip(test[:, 0].astype(int).tolist(), test[:, 1].astype(int).tolist()))
        assert not (train_set & test_set)
        all_set = set(zip(ds.users.tolist(), ds.items.tolist()))
        assert train_set | test_set == all_set

    def test_measurements_follow_mask_order(self):
        ds = self._dataset(n=40)
        mask, y, test = split_ratings(ds, 0.75, seed=2)
        lookup = {(u, i): r for u, i, r in zip(ds.users.tolist(), ds.items.tolist(), ds.ratings.tolist())}
        for k in range(mask.m):
            assert y[k] == lookup[(int(mask.rows[k]), int(mask.cols[k]))]

    def test_single_test_entry(self):
        ds = self._dataset(n=30)
        mask, y, test = split_ratings(ds, 1.0 - 1.0 / 30.0, seed=3)
        assert test.shape[0] == 1

    def test_same_seed_identical(self):
        ds = self._dataset(n=40)
        m1, y1, t1 = split_ratings(ds, 0.8, seed=5)
        m2, y2, t2 = split_ratings(ds, 0.8, seed=5)
        assert np.array_equal(m1.rows, m2.rows) and np.array_equal(y1, y2) and np.array_equal(t1, t2)

    def test_bad_fraction(self):
        ds = self._dataset(n=20)
        with pytest.raises(ContractViolationError):
            split_ratings(ds, 1.0, seed=0)


def test_standin_generator_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.data", tmp_path / "b.data"
    shape1 = gen_ratings_standin(p1, seed=4)
    shape2 = gen_ratings_standin(p2, seed=4)
    assert shape1 == shape2
    assert p1.read_bytes() == p2.read_bytes()
    ds = load_movielens(p1, shape=shape1)
    assert len(ds) == 12000
