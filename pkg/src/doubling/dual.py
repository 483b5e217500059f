"""Vectorized forward-mode dual numbers.

A :class:`Dual` carries an array of values ``val`` and, on a trailing axis,
the partial derivatives ``eps`` of each value with respect to ``m`` seed
variables, so ``eps.shape == val.shape + (m,)``.  Metric component functions
written with ordinary numpy operations (arithmetic, indexing, ``np.sum``,
``np.exp`` and friends) accept a :class:`Dual` unchanged, which is what makes
them "liftable".
"""

from __future__ import annotations

import numpy as np

_UNARY = {
    np.exp: (np.exp, np.exp),
    np.log: (np.log, lambda x: 1.0 / x),
    np.sqrt: (np.sqrt, lambda x: 0.5 / np.sqrt(x)),
    np.sin: (np.sin, np.cos),
    np.cos: (np.cos, lambda x: -np.sin(x)),
    np.tanh: (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
    np.square: (np.square, lambda x: 2.0 * x),
    np.reciprocal: (np.reciprocal, lambda x: -1.0 / x**2),
}


class Dual:
    __slots__ = ("val", "eps")
    __array_priority__ = 1000

    def __init__(self, val, eps):
        self.val = np.asarray(val, dtype=float)
        self.eps = np.asarray(eps, dtype=float)

    @classmethod
    def seed(cls, x):
        """Independent variables: derivative of ``x[..., i]`` w.r.t. variable ``k`` is ``δ_ik``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return cls(x, np.broadcast_to(np.eye(n), x.shape + (n,)).copy())

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def nvars(self):
        return self.eps.shape[-1]

    def __repr__(self):
        return f"Dual(val={self.val!r}, nvars={self.nvars})"

    # arithmetic -----------------------------------------------------------

    def _const_eps(self, value):
        shape = np.broadcast_shapes(self.val.shape, np.shape(value))
        return np.broadcast_to(self.eps, shape + (self.nvars,))

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        other = np.asarray(other, dtype=float)
        return Dual(self.val + other, self._const_eps(other))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.eps * other.val[..., None] + other.eps * self.val[..., None],
            )
        other = np.asarray(other, dtype=float)
        return Dual(self.val * other, self.eps * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(
                self.val * inv,
                (self.eps - other.eps * (self.val * inv)[..., None]) * inv[..., None],
            )
        other = np.asarray(other, dtype=float)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=float)
        inv = 1.0 / self.val
        return Dual(other * inv, -self.eps * (other * inv * inv)[..., None])

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("Dual exponents are not supported")
        if p == 0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.eps))
        if p == 1:
            return self
        return Dual(self.val**p, self.eps * (p * self.val ** (p - 1))[..., None])

    # array protocol -------------------------------------------------------

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Dual(self.val[key], self.eps[key + (slice(None),)])

    def sum(self, axis=None, keepdims=False, **_):
        if axis is None:
            axes = tuple(range(self.ndim))
        else:
            axes = np.atleast_1d(axis)
            axes = tuple(int(a) % self.ndim for a in axes)
        return Dual(self.val.sum(axis=axes, keepdims=keepdims),
                    self.eps.sum(axis=axes, keepdims=keepdims))

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        if ufunc in _UNARY:
            f, df = _UNARY[ufunc]
            (x,) = inputs
            return Dual(f(x.val), x.eps * df(x.val)[..., None])
        if ufunc is np.negative:
            return -inputs[0]
        a, b = inputs
        if ufunc is np.add:
            return a + b if isinstance(a, Dual) else b + a
        if ufunc is np.subtract:
            return a - b if isinstance(a, Dual) else (-b) + a
        if ufunc is np.multiply:
            return a * b if isinstance(a, Dual) else b * a
        if ufunc is np.true_divide:
            return a / b if isinstance(a, Dual) else b.__rtruediv__(a)
        if ufunc is np.power and isinstance(a, Dual):
            return a ** float(b)
        return NotImplemented


def value(x):
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def stack(items, axis=0):
    """``np.stack`` that keeps derivative information when any item is a Dual."""
    duals = [it for it in items if isinstance(it, Dual)]
    if not duals:
        return np.stack([np.asarray(it, dtype=float) for it in items], axis=axis)
    m = duals[0].nvars
    shape = np.broadcast_shapes(*(np.shape(value(it)) for it in items))
    vals, epss = [], []
    for it in items:
        if isinstance(it, Dual):
            vals.append(np.broadcast_to(it.val, shape))
            epss.append(np.broadcast_to(it.eps, shape + (m,)))
        else:
            vals.append(np.broadcast_to(np.asarray(it, dtype=float), shape))
            epss.append(np.zeros(shape + (m,)))
    ax = axis if axis >= 0 else axis + len(shape) + 1
    return Dual(np.stack(vals, axis=ax), np.stack(epss, axis=ax))


def pad_block(G, extra=1):
    """Block-diagonal ``diag(G, I_extra)`` on the last two axes."""
    n = value(G).shape[-1]
    k = n + extra
    if isinstance(G, Dual):
        val = np.zeros(G.shape[:-2] + (k, k))
        val[..., :n, :n] = G.val
        idx = np.arange(n, k)
        val[..., idx, idx] = 1.0
        eps = np.zeros(G.shape[:-2] + (k, k, G.nvars))
        eps[..., :n, :n, :] = G.eps
        return Dual(val, eps)
    G = np.asarray(G, dtype=float)
    out = np.zeros(G.shape[:-2] + (k, k))
    out[..., :n, :n] = G
    idx = np.arange(n, k)
    out[..., idx, idx] = 1.0
    return out
