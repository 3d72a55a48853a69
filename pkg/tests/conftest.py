import pytest

import stubnet as sn


@pytest.fixture
def two_sources():
    """One persuadable agent reading opposite stubborn sources equally."""
    return sn.network_from_edges(
        3,
        [(1, 0, 0.5), (2, 0, 0.5)],
        {1: 0.0, 2: 1.0},
        original_ids=("v", "s0", "s1"),
    )


@pytest.fixture
def chain():
    """s1 -> a -> b with a weak stubborn-0 pull on b."""
    return sn.network_from_edges(
        4,
        [(2, 0, 0.3), (0, 1, 0.2), (3, 1, 0.1)],
        {2: 1.0, 3: 0.0},
        original_ids=("a", "b", "s1", "s0"),
    )


@pytest.fixture
def feedback_pair():
    """Two persuadable agents reading each other, one weak stubborn source."""
    return sn.network_from_edges(
        3,
        [(1, 0, 0.25), (0, 1, 0.49), (2, 1, 0.01)],
        {2: 1.0},
        original_ids=("i", "j", "s"),
    )
