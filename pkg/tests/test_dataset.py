"""Problem document parsing, validation, and derived quantities."""

import numpy as np
import pytest

from querylearn.dataset import (
    Dataset,
    NoiseSpec,
    dataset_from_document,
    load_dataset,
    load_dataset_csv,
    save_dataset,
    selection_probabilities,
)
from querylearn.errors import (
    DuplicateRowsError,
    ExhaustedGroupError,
    InseparableGroupsError,
    ProblemFormatError,
    ValidationError,
)

from conftest import DATA


def test_toy1_shape(toy1):
    assert toy1.n_objects == 4
    assert toy1.n_queries == 3
    assert toy1.n_object_groups == 2
    assert toy1.objects == ("theta1", "theta2", "theta3", "theta4")
    assert toy1.matrix.tolist() == [[0, 1, 1], [1, 1, 0], [0, 1, 0], [1, 0, 0]]
    assert np.allclose(toy1.priors, 0.25)
    assert toy1.rows_distinct


def test_matrix_rows_accept_strings():
    ds = dataset_from_document({"matrix": ["011", "110"]})
    assert ds.matrix.tolist() == [[0, 1, 1], [1, 1, 0]]
    assert ds.objects == ("o1", "o2")
    assert ds.queries == ("q1", "q2", "q3")


def test_uniform_priors_default():
    ds = dataset_from_document({"matrix": ["01", "10", "11"]})
    assert np.allclose(ds.priors, 1 / 3)


def test_matrix_is_read_only(toy1):
    with pytest.raises(ValueError):
        toy1.matrix[0, 0] = 1


@pytest.mark.parametrize("doc,message", [
    ({}, "matrix"),
    ({"matrix": ["01", "0"]}, "length"),
    ({"matrix": ["02", "01"]}, "0/1"),
    ({"matrix": ["01", "10"], "priors": [0.5]}, "priors"),
    ({"matrix": ["01", "10"], "priors": [0.9, 0.2]}, "sum"),
    ({"matrix": ["01", "10"], "objects": ["a"]}, "matrix rows"),
    ({"matrix": ["01", "10"], "queries": ["q1"]}, "expected"),
    ({"matrix": ["01", "10"], "objects": ["a", "a"]}, "unique"),
    ({"matrix": ["01", "10"], "object_groups": [1, 3]}, "dense"),
    ({"matrix": ["01", "10"], "object_groups": [1]}, "object_groups"),
    ({"matrix": ["01", "10"], "selection_weights": {"q1": 1.0}}, "query_groups"),
    ({"matrix": ["01", "10"], "query_groups": [1, 2],
      "selection_weights": {"q1": -1.0}}, "positive"),
    ({"matrix": ["01", "10"], "unknown_key": 1}, "unknown"),
])
def test_malformed_documents_rejected(doc, message):
    with pytest.raises((ProblemFormatError, ValidationError)) as err:
        dataset_from_document(doc)
    assert message in str(err.value)


def test_duplicate_rows_flagged_and_rejected_for_object_id():
    ds = dataset_from_document({"matrix": ["01", "01", "10"]})
    assert not ds.rows_distinct
    with pytest.raises(DuplicateRowsError):
        ds.validate_for("object-id")


def test_duplicate_rows_inside_one_group_are_fine_for_group_id():
    ds = dataset_from_document(
        {"matrix": ["01", "01", "10"], "object_groups": [1, 1, 2]}
    )
    ds.validate_for("group-id")


def test_inseparable_groups_rejected_at_load():
    with pytest.raises(InseparableGroupsError):
        dataset_from_document(
            {"matrix": ["01", "01", "10"], "object_groups": [1, 2, 2]}
        )


def test_group_id_requires_groups():
    ds = dataset_from_document({"matrix": ["01", "10"]})
    with pytest.raises(ValidationError):
        ds.validate_for("group-id")


def test_load_from_text_and_path(tmp_path):
    text = "matrix:\n  - '01'\n  - '10'\n"
    from_text = load_dataset(text)
    p = tmp_path / "prob.yaml"
    p.write_text(text)
    from_path = load_dataset(p)
    assert from_text.fingerprint() == from_path.fingerprint()


def test_document_round_trip(toy2, tmp_path):
    path = tmp_path / "t2.yaml"
    save_dataset(toy2, path)
    again = load_dataset(path)
    assert again.fingerprint() == toy2.fingerprint()
    assert again.to_document() == toy2.to_document()


def test_noise_round_trip(toy3, tmp_path):
    assert toy3.noise == NoiseSpec(error_prone=(1, 2), model=1)
    path = tmp_path / "t3.yaml"
    save_dataset(toy3, path)
    assert load_dataset(path).noise == toy3.noise


def test_fingerprint_tracks_content(toy1):
    doc = toy1.to_document()
    doc["priors"] = [0.3, 0.3, 0.2, 0.2]
    other = dataset_from_document(doc)
    assert other.fingerprint() != toy1.fingerprint()
    assert len(toy1.fingerprint()) == 16


def test_csv_pair_matches_yaml(toy1):
    ds = load_dataset_csv(DATA / "toy1_matrix.csv", DATA / "toy1_meta.csv")
    assert ds.fingerprint() == toy1.fingerprint()


def test_csv_matrix_alone():
    ds = load_dataset_csv(DATA / "toy1_matrix.csv")
    assert ds.n_objects == 4
    assert ds.object_groups is None
    assert np.allclose(ds.priors, 0.25)


def test_noise_spec_validation():
    with pytest.raises(ValidationError):
        NoiseSpec(error_prone=(0,), model=3)
    with pytest.raises(ValidationError):
        NoiseSpec(error_prone=(0,), model=2, p=0.7)
    with pytest.raises(ValidationError):
        NoiseSpec(error_prone=(0, 0), model=1)
    assert NoiseSpec(error_prone=(0,), model=1).p == 0.5


def test_selection_probabilities_toy2(toy2):
    assert selection_probabilities(toy2, 2, ()) == {"q3": 0.9, "q4": 0.1}
    assert selection_probabilities(toy2, 2, ("q4",)) == {"q3": 1.0}
    assert selection_probabilities(toy2, 1, ()) == {"q1": 0.5, "q2": 0.5}


def test_selection_probabilities_exhausted(toy2):
    with pytest.raises(ExhaustedGroupError):
        selection_probabilities(toy2, 2, ("q3", "q4"))


def test_uniform_selection_when_no_weights():
    ds = dataset_from_document({"matrix": ["011", "101", "110"],
                                "query_groups": [1, 1, 2]})
    probs = selection_probabilities(ds, 1, ())
    assert probs == {"q1": 0.5, "q2": 0.5}
