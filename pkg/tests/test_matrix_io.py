import numpy as np
import pytest

from critpersist.errors import DimensionMismatch, NotSymmetric
from critpersist.grassmann import Subspace
from critpersist.matrix_io import read_operator, read_subspace, write_operator
from critpersist.spectral_core import SymOperator


def test_operator_file_format(tmp_path):
    write_operator(tmp_path / "a.txt", SymOperator(np.diag([-2.0, 0.0, 3.0])))
    lines = (tmp_path / "a.txt").read_text().splitlines()
    assert lines[0].split() == ["3"] and len(lines) == 4
    assert read_operator(tmp_path / "a.txt").entries[2, 2] == 3.0


def test_asymmetric_file_rejected(tmp_path):
    (tmp_path / "b.txt").write_text("2\n1 2\n0 1\n")
    with pytest.raises(NotSymmetric):
        read_operator(tmp_path / "b.txt")


def test_subspace_basis_checked(tmp_path):
    (tmp_path / "c.txt").write_text("2 1\n1\n1\n")
    with pytest.raises(Exception):
        read_subspace(tmp_path / "c.txt")


def test_roundtrip_exact(tmp_path, rng):
    A = rng.standard_normal((4, 4))
    op = SymOperator.symmetrized(A)
    write_operator(tmp_path / "d.txt", op)
    assert np.array_equal(read_operator(tmp_path / "d.txt").entries, op.entries)
