import pytest

from hybridhh.core import STAR, HeadList, PrivacyParams, Stage


def make_final_head_list(num_queries: int, urls_per_query: int) -> HeadList:
    """Final-stage head list with named queries/urls plus the wildcard."""
    entries = {
        f"q{i}": tuple(f"q{i}/u{j}" for j in range(urls_per_query))
        for i in range(num_queries)
    }
    entries[STAR] = (STAR,)
    return HeadList(entries, Stage.FINAL)


def make_augmented_head_list(k: int, k_q: int) -> HeadList:
    """Client-augmented list with k queries total and k_q urls per regular query."""
    hl = make_final_head_list(k - 1, k_q - 1)
    return hl.augment_for_clients()


@pytest.fixture
def default_params() -> PrivacyParams:
    return PrivacyParams()
