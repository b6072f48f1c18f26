import pytest

from bbcode import code_from_name
from logical import build_basis
from lpu import Module, build_lpu


@pytest.fixture(scope="session")
def gross():
    return code_from_name("gross")


@pytest.fixture(scope="session")
def two_gross():
    return code_from_name("two-gross")


@pytest.fixture(scope="session")
def gross_basis(gross):
    return build_basis("gross", gross)


@pytest.fixture(scope="session")
def two_gross_basis(two_gross):
    return build_basis("two-gross", two_gross)


@pytest.fixture(scope="session")
def gross_module(gross, gross_basis):
    basis, ops = gross_basis
    return Module(gross, basis, ops, build_lpu(gross, basis, ops))


@pytest.fixture(scope="session")
def two_gross_module(two_gross, two_gross_basis):
    basis, ops = two_gross_basis
    return Module(two_gross, basis, ops, build_lpu(two_gross, basis, ops))


# full synthesis tables take minutes; only slow tests request them
@pytest.fixture(scope="session")
def gross_synthesis_table(gross, gross_basis):
    from compiler import build_synthesis_table

    return build_synthesis_table(gross, gross_basis[1])


@pytest.fixture(scope="session")
def two_gross_synthesis_table(two_gross, two_gross_basis):
    from compiler import build_synthesis_table

    return build_synthesis_table(two_gross, two_gross_basis[1])
