import datetime as dt

import numpy as np
import pytest

from conftest import obs_row
from geoprior.domain import ClassVocabulary, ProbMatrix, normalize, validate_dataset, validate_prob_vector
from geoprior.errors import DatasetValidationError, InvalidProbabilities, VocabularyMismatch


def test_three_row_fixture(three_obs):
    assert len(three_obs) == 3
    assert len(three_obs.vocabulary) == 3
    assert three_obs.vocabulary.classes == ("sp_a", "sp_b", "sp_c")
    assert three_obs.labels().tolist() == [0, 1, 2]
    assert three_obs.observations[1].date == dt.date(2020, 2, 29)


def test_lineage_resolves(three_obs):
    h = three_obs.hierarchy
    for o in three_obs.observations:
        l2, l1 = h.lineage(o.species)
        assert l2 in h.level2 and l1 in h.level1
    assert h.lineage("sp_c") == ("gen_c", "fam_y")


def test_latitude_out_of_range_names_id():
    rows = [obs_row("ok"), obs_row("bad", lat=91.0)]
    with pytest.raises(DatasetValidationError) as err:
        validate_dataset(rows)
    v = err.value.violations
    assert [x.code for x in v] == ["CoordinateOutOfRange"]
    assert v[0].obs_id == "bad"


def test_two_parents_is_broken_hierarchy():
    rows = [obs_row("a", species="s1", genus="g1"), obs_row("b", species="s1", genus="g2")]
    with pytest.raises(DatasetValidationError) as err:
        validate_dataset(rows)
    assert "BrokenHierarchy" in err.value.codes


def test_label_in_two_levels_rejected():
    rows = [obs_row("a", species="x", genus="g1"), obs_row("b", species="s2", genus="x")]
    with pytest.raises(DatasetValidationError) as err:
        validate_dataset(rows)
    assert "BrokenHierarchy" in err.value.codes


def test_every_violation_reported():
    rows = [
        obs_row("a"),
        obs_row("a"),
        obs_row("c", lon=200),
        obs_row("d", date="2019-02-30"),
        obs_row("e", lat="north"),
    ]
    with pytest.raises(DatasetValidationError) as err:
        validate_dataset(rows)
    codes = err.value.codes
    assert codes.count("DuplicateId") == 1
    assert codes.count("CoordinateOutOfRange") == 2
    assert codes.count("InvalidDate") == 1


def test_unknown_label_against_vocabulary(three_rows):
    vocab = ClassVocabulary(("sp_a", "sp_b"))
    with pytest.raises(DatasetValidationError) as err:
        validate_dataset(three_rows, vocab)
    assert err.value.codes == ["UnknownLabel"]


def test_longitude_180_wraps():
    ds = validate_dataset([obs_row("a", lon=180.0)])
    assert ds.observations[0].longitude == -180.0


def test_idempotent(three_obs):
    again = validate_dataset(three_obs)
    assert again == three_obs
    assert validate_dataset(again) == again


def test_vocabulary_sorted_and_dense():
    v = ClassVocabulary.from_labels(["c", "a", "b", "a"])
    assert v.classes == ("a", "b", "c")
    assert [v.index_of[c] for c in v] == [0, 1, 2]
    with pytest.raises(VocabularyMismatch):
        v.require_same(ClassVocabulary(("a", "b")))


def test_prob_vector_rules():
    assert validate_prob_vector([0.2, 0.8 + 5e-7]).shape == (2,)
    with pytest.raises(InvalidProbabilities):
        validate_prob_vector([0.2, 0.81])
    with pytest.raises(InvalidProbabilities):
        validate_prob_vector([-0.1, 1.1])
    p = normalize(np.array([1.0, 2.0, 7.0]))
    assert abs(p.sum() - 1.0) <= 1e-9


def test_prob_matrix_is_read_only():
    pm = ProbMatrix(("a",), ("x", "y"), [[0.5, 0.5]])
    with pytest.raises(ValueError):
        pm.values[0, 0] = 1.0
