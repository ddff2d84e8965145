import numpy as np
import pytest
from scipy.stats import ortho_group

from vowelmark import select
from vowelmark.featureset import FeatureTable
from vowelmark.model import CrossValidator


def table(X, y, names=None):
    X = np.asarray(X, float)
    names = names or tuple(f"f{j:02d}" for j in range(X.shape[1]))
    return FeatureTable([f"S{k}" for k in range(len(X))], y, X, tuple(names))


def labels(n1, n0):
    return np.r_[np.ones(n1, int), np.zeros(n0, int)]


def test_qov_limits(rng):
    y = labels(50, 50)
    sep = np.r_[rng.uniform(5, 6, 50), rng.uniform(0, 1, 50)]
    same = rng.standard_normal(100)
    const = np.ones(100)
    s = select.qov_scores(np.c_[sep, same, const], y)
    assert s[0] == pytest.approx(2 * len(y))  # both impurities at the floor 1/(2n)
    assert s[1] == pytest.approx(2.0, rel=0.1)  # impurity near the class share 1/2
    assert s[2] == 0.0


def test_qov_overlap_oracle():
    # class 1 span [2, 5] holds two class-0 points out of five; class 0 span [0, 3] holds one of five
    x = np.array([2.0, 4.0, 5.0, 0.0, 1.0, 2.5, 3.0])
    y = np.array([1, 1, 1, 0, 0, 0, 0])
    imp1 = 2 / 5
    imp0 = 1 / 5
    assert select.qov_scores(x[:, None], y)[0] == pytest.approx(1 / np.mean([imp1, imp0]))


def test_relief_label_feature_wins(rng):
    y = labels(30, 30)
    X = np.c_[rng.standard_normal((60, 4)), y]
    r = select.rank_relief(table(X, y))
    assert r.features[0] == "f04"
    assert r.scores["f04"] == max(r.scores.values())


def test_relief_noise_weight_small(rng):
    y = labels(250, 250)
    X = np.c_[y + 0.3 * rng.standard_normal(500), rng.standard_normal(500)]
    r = select.rank_relief(table(X, y))
    assert abs(r.scores["f01"]) < 0.1


def test_duplicate_columns_share_weight(rng):
    y = labels(20, 20)
    base = rng.standard_normal((40, 3))
    X = np.c_[base, base[:, 1]]
    for ranking in (select.rank_relief(table(X, y)), select.rank_relieff(table(X, y), 5)):
        assert ranking.scores["f01"] == pytest.approx(ranking.scores["f03"], abs=1e-12)


def test_relieff_k1_matches_relief(rng):
    y = labels(25, 25)
    X = np.c_[np.r_[rng.normal(3, 1, 25), rng.normal(-3, 1, 25)], rng.standard_normal((50, 5))]
    t = table(X, y)
    a, b = select.rank_relief(t), select.rank_relieff(t, 1)
    assert a.features == b.features
    assert select.rank_relieff(t, 11).features[0] == "f00"


def test_relieff_clamps_k(rng, caplog):
    y = labels(4, 10)
    r = select.rank_relieff(table(rng.standard_normal((14, 3)), y), 11)
    assert any("clamped to 3" in n for n in r.notes)
    with pytest.raises(ValueError):
        select.rank_relieff(table(rng.standard_normal((14, 3)), y), 0)


def test_lasso_zero_above_lambda_max(rng):
    X = rng.standard_normal((40, 6))
    y = X[:, 0] + 0.1 * rng.standard_normal(40)
    path = select.lasso_path(X, y)
    assert np.all(path.coefs[0] == 0)
    big = select.lasso_path(X, y, lambdas=[path.lambdas[0] * 1.5])
    assert np.all(big.coefs == 0)


def orthonormal_problem(rng, n=64, d=8):
    Q = ortho_group.rvs(n, random_state=rng)[:, :d]
    # columns orthogonal and centred: project out the constant first
    Q = Q - Q.mean(axis=0)
    Q, _ = np.linalg.qr(Q)
    X = Q * np.sqrt(n)  # X'X / n = I
    beta = rng.normal(0, 2, d)
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return X, y


def test_lasso_orthonormal_soft_threshold(rng):
    X, y = orthonormal_problem(rng)
    path = select.lasso_path(X, y)
    ols = X.T @ (y - y.mean()) / len(y)
    oracle = np.sign(ols) * np.maximum(np.abs(ols)[None, :] - path.lambdas[:, None], 0)
    assert path.converged.all()
    assert np.max(np.abs(path.coefs - oracle)) < 1e-6


def test_lasso_duplicates_are_contiguous(rng):
    y = labels(20, 20).astype(float)
    base = rng.standard_normal((40, 5))
    base[:, 2] += y
    X = np.c_[base, base[:, 2]]
    r = select.rank_lasso(table(X, y.astype(int)))
    pos = [r.features.index("f02"), r.features.index("f05")]
    assert abs(pos[0] - pos[1]) == 1 and pos[0] < pos[1]


def test_lasso_ranking_scale_invariant(rng):
    y = labels(20, 20)
    X = rng.standard_normal((40, 7)) + 0.6 * y[:, None] * rng.uniform(0, 1, 7)
    a = select.rank_lasso(table(X, y))
    b = select.rank_lasso(table(X * rng.uniform(0.01, 100, 7), y))
    assert a.features == b.features


def test_rankings_are_permutations(rng):
    y = labels(12, 12)
    t = table(rng.standard_normal((24, 9)), y)
    for m in select.METHODS:
        r = select.rank_features(t, m, 3)
        assert sorted(r.features) == sorted(t.names)
        assert r.report().count("\n") == 11
    with pytest.raises(ValueError):
        select.rank_features(t, "pca")
    with pytest.raises(ValueError):
        select.rank_qov(table(rng.standard_normal((5, 2)), np.ones(5, int)))


def test_ranking_ties_follow_canonical_order():
    y = labels(3, 3)
    t = table(np.tile(y[:, None], (1, 3)), y, names=("c", "a", "b"))
    assert select.rank_qov(t).features == ("c", "a", "b")


def planted_table(rng, n=64):
    y = labels(31, n - 31)
    X = np.c_[y + 0.8 * rng.standard_normal(n), y + 0.8 * rng.standard_normal(n),
              rng.standard_normal(n)]
    return table(X, y, ("good1", "good2", "noise"))


def test_stepwise_drops_planted_noise_first(rng):
    t = planted_table(rng)
    cv = CrossValidator(t, folds=8, repetitions=10, seed=3)
    res = select.backward_stepwise(["good1", "noise", "good2"], cv.accuracy)
    assert res.trace[0].removed == "noise" and res.trace[0].accepted
    assert "noise" not in res.features
    assert res.accuracy >= res.initial_accuracy


def test_stepwise_trace_is_monotone(rng):
    def evaluator(fs):
        return 50 + 10 * ("good1" in fs) + 5 * ("good2" in fs) - 2 * len(fs)
    res = select.backward_stepwise(["a", "good1", "b", "good2", "c"], evaluator)
    accepted = [r.accuracy for r in res.trace if r.accepted]
    assert accepted == sorted(accepted)
    assert res.features == ("good1", "good2")
    assert not res.trace[-1].accepted
    assert "final" in res.report()


def test_stepwise_single_feature_unchanged():
    res = select.backward_stepwise(["x"], lambda fs: 90.0)
    assert res.features == ("x",) and res.trace == ()
    with pytest.raises(ValueError):
        select.backward_stepwise([], lambda fs: 0)


def test_stepwise_tie_breaks_by_position():
    res = select.backward_stepwise(["a", "b", "c"], lambda fs: 80.0)
    assert [r.removed for r in res.trace] == ["a", "b"]
    assert res.features == ("c",)
