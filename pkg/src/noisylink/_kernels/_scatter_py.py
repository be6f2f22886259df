"""Pure-numpy fallback for the compiled scatter kernels."""

import numpy as np


def spmm_forward(rows, cols, weights, x, out):
    np.add.at(out, rows, weights[:, None] * x[cols])


def spmm_backward_x(rows, cols, weights, grad_out, grad_x):
    np.add.at(grad_x, cols, weights[:, None] * grad_out[rows])


def spmm_backward_weights(rows, cols, x, grad_out, grad_w):
    np.einsum("ek,ek->e", grad_out[rows], x[cols], out=grad_w)
