from pathlib import Path

import pytest

from querylearn import load_dataset

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def toy1():
    return load_dataset(DATA / "toy1.yaml")


@pytest.fixture(scope="session")
def toy2():
    return load_dataset(DATA / "toy2.yaml")


@pytest.fixture(scope="session")
def toy3():
    return load_dataset(DATA / "toy3.yaml")


@pytest.fixture(scope="session")
def fig_group_tree():
    # depth-2 group-identification tree on toy1: split q1, then q2 on the 1-side
    return {
        "format": "decision-tree",
        "version": 1,
        "variant": "group-id",
        "root": {
            "kind": "query",
            "query": "q1",
            "low": {
                "kind": "leaf",
                "outcome": {"group": 1},
                "objects": ["theta1", "theta3"],
            },
            "high": {
                "kind": "query",
                "query": "q2",
                "low": {
                    "kind": "leaf",
                    "outcome": {"group": 2},
                    "objects": ["theta4"],
                },
                "high": {
                    "kind": "leaf",
                    "outcome": {"group": 1},
                    "objects": ["theta2"],
                },
            },
        },
    }


@pytest.fixture(scope="session")
def fig_groupquery_tree():
    # toy2 tree suggesting query groups; weights 0.9/0.1 at the root, 0.5/0.5 inside
    leaf = lambda name: {"kind": "leaf", "outcome": {"object": name}, "objects": [name]}
    return {
        "format": "decision-tree",
        "version": 1,
        "variant": "object-id-group-queries",
        "root": {
            "kind": "query-group",
            "group": 2,
            "branches": [
                {
                    "query": "q3",
                    "prob": 0.9,
                    "low": leaf("theta3"),
                    "high": {
                        "kind": "query-group",
                        "group": 1,
                        "branches": [
                            {"query": "q1", "prob": 0.5,
                             "low": leaf("theta1"), "high": leaf("theta2")},
                            {"query": "q2", "prob": 0.5,
                             "low": leaf("theta2"), "high": leaf("theta1")},
                        ],
                    },
                },
                {
                    "query": "q4",
                    "prob": 0.1,
                    "low": leaf("theta1"),
                    "high": {
                        "kind": "query-group",
                        "group": 2,
                        "branches": [
                            {"query": "q3", "prob": 1.0,
                             "low": leaf("theta3"), "high": leaf("theta2")},
                        ],
                    },
                },
            ],
        },
    }
