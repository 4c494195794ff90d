"""Shared fixtures: the default spectral basis is expensive enough to build
once per session, and several suites only need its ground eigenpair."""

import pytest

from edwards1d.spectral import build_basis


@pytest.fixture(scope="session")
def basis():
    return build_basis()
