import numpy as np
import pytest

from conftest import random_problem
from toeplitz_matvec.core import BlockVector, Layout
from toeplitz_matvec.oracle import MAX_WORK, assemble_dense, dense_adjoint, dense_forward
from toeplitz_matvec.pipeline import BlockColumn


def test_hand_example():
    # n_t=2, scalar blocks F1=2, F2=3: d = [2 m1, 3 m1 + 2 m2]
    col = BlockColumn(np.array([[[2.0]], [[3.0]]]))
    m = BlockVector(np.array([1.0, 10.0]), 1, 2)
    assert dense_forward(col, m).data.tolist() == [2.0, 23.0]
    d = BlockVector(np.array([1.0, 10.0]), 1, 2)
    # F^T = [[2, 3], [0, 2]]
    assert dense_adjoint(col, d).data.tolist() == [32.0, 20.0]


@pytest.mark.parametrize("n_m, n_d, n_t", [(1, 1, 1), (3, 2, 5), (4, 6, 3)])
def test_loops_agree_with_assembled_matrix(rng, n_m, n_d, n_t):
    col, m, d = random_problem(rng, n_m, n_d, n_t)
    F = assemble_dense(col)
    # assembled matrix uses time-blocked ordering: index t*space + s
    m_tb = m.space_time().T.ravel()
    d_tb = d.space_time().T.ravel()
    fwd = dense_forward(col, m).space_time().T.ravel()
    adj = dense_adjoint(col, d).space_time().T.ravel()
    assert np.allclose(fwd, F @ m_tb, rtol=1e-13, atol=1e-13)
    assert np.allclose(adj, F.T @ d_tb, rtol=1e-13, atol=1e-13)


def test_assembled_is_block_lower_triangular(rng):
    col, _, _ = random_problem(rng, 2, 3, 4)
    F = assemble_dense(col)
    for i in range(4):
        for j in range(4):
            blk = F[i * 3:(i + 1) * 3, j * 2:(j + 1) * 2]
            if j > i:
                assert not blk.any()
            else:
                assert np.array_equal(blk, col.blocks[i - j])


def test_accepts_tosi_input(rng):
    col, m, _ = random_problem(rng, 3, 2, 4)
    from toeplitz_matvec.core import reorder
    assert dense_forward(col, reorder(m, Layout.TOSI)).bitwise_equal(dense_forward(col, m))


def test_refuses_huge():
    n_t = int(np.sqrt(MAX_WORK)) + 2
    col = BlockColumn(np.zeros((n_t, 1, 1)))
    with pytest.raises(ValueError):
        dense_forward(col, BlockVector(np.zeros(n_t), 1, n_t))
