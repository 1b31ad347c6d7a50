from datetime import datetime

import numpy as np
import pytest

from gridshed.disagg import BuildingEstimates
from gridshed.errors import ValidationError
from gridshed.reduce import (
    FEATURE_NAMES,
    FeatureMatrix,
    extract_features,
    pca_fit,
    pca_inverse,
    pca_transform,
    read_features_csv,
    symmetric_eigh,
    write_features_csv,
    zscore_normalize,
)

START = datetime(2024, 1, 1)


def _fm(x):
    x = np.asarray(x, dtype=float)
    return FeatureMatrix(tuple(f"B{i}" for i in range(x.shape[0])), x, tuple(f"f{j}" for j in range(x.shape[1])))


def _feature(fm, name, row=0):
    return fm.features[row, fm.feature_names.index(name)]


def test_feature_names():
    assert len(FEATURE_NAMES) == 29


def test_constant_building():
    est = BuildingEstimates(("a",), np.full((72, 1), 5.0), START)
    fm = extract_features(est)
    assert np.allclose(fm.features[0, :24], 5.0)
    assert _feature(fm, "std") == 0.0
    assert _feature(fm, "load_factor") == 1.0


def test_single_hour_spike():
    m = np.zeros((96, 1))
    m[8::24, 0] = 10.0
    fm = extract_features(BuildingEstimates(("a",), m, START))
    assert _feature(fm, "peak_hour") == 8
    assert _feature(fm, "peak") == 10.0
    assert np.isclose(_feature(fm, "load_factor"), _feature(fm, "mean") / 10.0)


def test_identical_buildings_identical_rows(rng):
    col = rng.uniform(0, 5, size=(60, 1))
    fm = extract_features(BuildingEstimates(("a", "b"), np.hstack([col, col]), START))
    assert np.array_equal(fm.features[0], fm.features[1])


def test_gaps_excluded():
    m = np.full((48, 1), 2.0)
    m[5, 0] = np.nan
    fm = extract_features(BuildingEstimates(("a",), m, START))
    assert _feature(fm, "mean") == 2.0


def test_all_gap_building_named():
    m = np.ones((48, 2))
    m[:, 1] = np.nan
    with pytest.raises(ValidationError, match="'b'"):
        extract_features(BuildingEstimates(("a", "b"), m, START))


def test_zscore_examples():
    z = zscore_normalize(_fm([[1.0, 7.0], [3.0, 7.0]]))
    assert z.features[:, 0].tolist() == [-1.0, 1.0]
    assert z.features[:, 1].tolist() == [0.0, 0.0]
    assert z.constant_features == ("f1",)
    zz = zscore_normalize(z)
    assert np.allclose(zz.features, z.features, atol=1e-12)
    with pytest.raises(ValueError):
        zscore_normalize(_fm([[1.0, 2.0]]))


def test_zscore_moments(rng):
    z = zscore_normalize(_fm(rng.normal(3, 2, size=(40, 5))))
    assert np.allclose(z.features.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(z.features.std(axis=0), 1, atol=1e-12)


def test_pca_line():
    t = np.linspace(-1, 1, 20)
    model = pca_fit(_fm(np.column_stack([t, 2 * t])), 0.95)
    assert model.k == 1
    assert np.isclose(model.explained_fraction, 1.0)


def test_pca_isotropic(rng):
    model = pca_fit(_fm(rng.normal(size=(500, 2))), 0.95)
    assert model.k == 2


def test_pca_reconstruction_low_rank(rng):
    basis = rng.normal(size=(2, 6))
    x = rng.normal(size=(30, 2)) @ basis + 4.0
    model = pca_fit(_fm(x), 0.999999)
    assert model.k == 2
    back = pca_inverse(model, pca_transform(model, _fm(x)).features)
    assert np.allclose(back, x, atol=1e-9)


def test_pca_properties(rng):
    x = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
    fm = _fm(x)
    model = pca_fit(fm, 0.9)
    c = model.components
    assert np.allclose(c @ c.T, np.eye(model.k), atol=1e-9)
    assert np.all(np.diff(model.explained_variance) <= 0)
    scores = pca_transform(model, fm).features
    assert np.allclose(scores.var(axis=0, ddof=1), model.explained_variance, rtol=1e-9)
    mean_row = pca_transform(model, FeatureMatrix(("m",), model.mean[None, :], fm.feature_names)).features
    assert np.allclose(mean_row, 0, atol=1e-12)
    # sign convention
    idx = np.argmax(np.abs(c), axis=1)
    assert np.all(c[np.arange(model.k), idx] > 0)
    # reconstruction error equals the discarded eigenvalues
    back = pca_inverse(model, scores)
    err = np.sum((back - x) ** 2) / (x.shape[0] - 1)
    assert np.isclose(err, model.all_eigenvalues[model.k:].sum(), rtol=1e-6)


def test_pca_one_dimensional():
    x = np.array([[1.0], [2.0], [4.0]])
    model = pca_fit(_fm(x), 0.95)
    scores = pca_transform(model, _fm(x)).features[:, 0]
    assert np.allclose(np.abs(scores), np.abs(x[:, 0] - x.mean()))


def test_pca_dimension_mismatch(rng):
    model = pca_fit(_fm(rng.normal(size=(10, 3))))
    with pytest.raises(ValueError):
        pca_transform(model, _fm(rng.normal(size=(10, 4))))


def _char_poly(a):
    """Faddeev-LeVerrier coefficients, leading 1 first."""
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs)


def test_eigen_oracle_4x4(rng):
    for _ in range(20):
        b = rng.normal(size=(6, 4))
        a = b.T @ b / 5
        lam = np.sort(np.roots(_char_poly(a)).real)[::-1]
        w, v = symmetric_eigh(a)
        assert np.allclose(w, lam, atol=1e-6)
        for j, l in enumerate(lam):
            # null vector of (A - l I) by deflation through the SVD
            _, _, vt = np.linalg.svd(a - l * np.eye(4))
            ref = vt[-1]
            assert np.isclose(abs(ref @ v[:, j]), 1.0, atol=1e-6)


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValueError):
        symmetric_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_features_csv_round_trip(tmp_path, rng):
    fm = _fm(rng.normal(size=(4, 3)))
    write_features_csv(fm, tmp_path / "f.csv")
    back = read_features_csv(tmp_path / "f.csv")
    assert back.building_ids == fm.building_ids
    assert np.allclose(back.features, fm.features, rtol=1e-11)
