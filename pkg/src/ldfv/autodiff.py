"""Array-level reverse-mode differentiation.

A :class:`Tape` records every operation applied to its :class:`Var` objects
together with a vector-Jacobian closure.  Nodes are appended in evaluation
order, which is a topological order, so :meth:`Tape.gradient` visits them
once in reverse.

The module-level functions (``sqrt``, ``maximum``, ``concatenate``...) accept
plain numpy arrays as well and then simply defer to numpy.  Numerical kernels
elsewhere in the package are written against this namespace so the same code
serves the plain solver and the differentiated training step.

Subgradient conventions: ``abs`` and ``sqrt`` have gradient 0 at 0, and
``maximum(a, b)`` routes the gradient to ``a`` only where ``a > b``.
"""

from __future__ import annotations

import numpy as np

SELU_SCALE = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717


class Tape:
    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def var(self, value) -> "Var":
        """Register a leaf (e.g. a network parameter)."""
        return Var(np.array(value, dtype=np.float64), self, (), None)

    def _record(self, value, parents, vjp):
        return Var(value, self, parents, vjp)

    def gradient(self, root: "Var", wrt):
        """Gradients of scalar ``root`` with respect to each Var in ``wrt``.

        Leaves that do not influence ``root`` get zero arrays.
        """
        if root.tape is not self:
            raise ValueError("root does not belong to this tape")
        if root.value.size != 1:
            raise ValueError("gradient() needs a scalar root")
        grads = {root._id: np.ones_like(root.value)}
        for node in reversed(self._nodes[: root._id + 1]):
            g = grads.pop(node._id, None)
            if g is None or node._vjp is None:
                if g is not None:
                    grads[node._id] = g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if parent is None or pg is None:
                    continue
                pid = parent._id
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        out = []
        for v in wrt:
            g = grads.get(v._id)
            out.append(np.zeros_like(v.value) if g is None else np.broadcast_to(g, v.shape).copy())
        return out


class Var:
    """A float64 array recorded on a :class:`Tape`."""

    __array_ufunc__ = None

    def __init__(self, value, tape, parents, vjp):
        self.value = value
        self.tape = tape
        self._parents = parents
        self._vjp = vjp
        self._id = len(tape._nodes)
        tape._nodes.append(self)

    shape = property(lambda self: self.value.shape)
    ndim = property(lambda self: self.value.ndim)
    size = property(lambda self: self.value.size)

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var(shape={self.shape}, id={self._id})"

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        if k == 2:
            return mul(self, self)
        raise NotImplementedError("only squaring is supported")

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __gt__(self, other):
        return self.value > _val(other)

    def __lt__(self, other):
        return self.value < _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def _val(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def is_var(x) -> bool:
    return isinstance(x, Var)


def value(x):
    """Underlying numpy value of a Var (identity for arrays)."""
    return x.value if isinstance(x, Var) else x


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _parents(*xs):
    return tuple(x if isinstance(x, Var) else None for x in xs)


def add(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return a + b
    av, bv = _val(a), _val(b)
    sa, sb = np.shape(av), np.shape(bv)
    return tape._record(av + bv, _parents(a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a):
    if not isinstance(a, Var):
        return -a
    return a.tape._record(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return a * b
    av, bv = _val(a), _val(b)
    sa, sb = np.shape(av), np.shape(bv)
    return tape._record(
        av * bv,
        _parents(a, b),
        lambda g: (_unbroadcast(g * bv, sa) if isinstance(a, Var) else None,
                   _unbroadcast(g * av, sb) if isinstance(b, Var) else None),
    )


def div(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return a / b
    av, bv = _val(a), _val(b)
    out = av / bv
    sa, sb = np.shape(av), np.shape(bv)
    return tape._record(
        out,
        _parents(a, b),
        lambda g: (_unbroadcast(g / bv, sa) if isinstance(a, Var) else None,
                   _unbroadcast(-g * out / bv, sb) if isinstance(b, Var) else None),
    )


def abs(a):  # noqa: A001 - mirrors numpy's name
    if not isinstance(a, Var):
        return np.abs(a)
    s = np.sign(a.value)
    return a.tape._record(np.abs(a.value), (a,), lambda g: (g * s,))


def sign(a):
    return np.sign(_val(a))


def sqrt(a):
    if not isinstance(a, Var):
        return np.sqrt(a)
    out = np.sqrt(a.value)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(out > 0, 0.5 / np.where(out > 0, out, 1.0), 0.0)
        return (g * d,)

    return a.tape._record(out, (a,), vjp)


def exp(a):
    if not isinstance(a, Var):
        return np.exp(a)
    out = np.exp(a.value)
    return a.tape._record(out, (a,), lambda g: (g * out,))


def log(a):
    if not isinstance(a, Var):
        return np.log(a)
    av = a.value
    return a.tape._record(np.log(av), (a,), lambda g: (g / av,))


def maximum(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return np.maximum(a, b)
    av, bv = _val(a), _val(b)
    pick_a = av > bv
    sa, sb = np.shape(av), np.shape(bv)
    return tape._record(
        np.where(pick_a, av, bv),
        _parents(a, b),
        lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), sa) if isinstance(a, Var) else None,
                   _unbroadcast(np.where(pick_a, 0.0, g), sb) if isinstance(b, Var) else None),
    )


def minimum(a, b):
    return neg(maximum(neg(a), neg(b)))


def relu(a):
    """``max(0, a)`` with zero subgradient at the kink."""
    return maximum(a, 0.0)


def where(cond, a, b):
    tape = _tape_of(a, b)
    cond = np.asarray(cond)
    if tape is None:
        return np.where(cond, a, b)
    av, bv = _val(a), _val(b)
    sa, sb = np.shape(av), np.shape(bv)
    return tape._record(
        np.where(cond, av, bv),
        _parents(a, b),
        lambda g: (_unbroadcast(np.where(cond, g, 0.0), sa) if isinstance(a, Var) else None,
                   _unbroadcast(np.where(cond, 0.0, g), sb) if isinstance(b, Var) else None),
    )


def _is_fancy(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (np.ndarray, list)) for i in items)


def getitem(a, idx):
    if not isinstance(a, Var):
        return a[idx]
    av = a.value
    fancy = _is_fancy(idx)

    def vjp(g):
        full = np.zeros_like(av)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] += g
        return (full,)

    return a.tape._record(av[idx], (a,), vjp)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    s0 = a.shape
    return a.tape._record(a.value.reshape(shape), (a,), lambda g: (g.reshape(s0),))


def sum(a, axis=None):  # noqa: A001
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    s0 = a.shape

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, s0),)

    return a.tape._record(np.sum(a.value, axis=axis), (a,), vjp)


def mean(a, axis=None):
    if not isinstance(a, Var):
        return np.mean(a, axis=axis)
    n = a.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return sum(a, axis) * (1.0 / n)


def concatenate(xs, axis=0):
    xs = list(xs)
    tape = _tape_of(*xs)
    if tape is None:
        return np.concatenate(xs, axis=axis)
    vals = [np.asarray(_val(x), dtype=np.float64) for x in xs]
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])

    def vjp(g):
        out = []
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if isinstance(x, Var):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                out.append(g[tuple(sl)])
            else:
                out.append(None)
        return out

    return tape._record(np.concatenate(vals, axis=axis), _parents(*xs), vjp)


def stack(xs, axis=0):
    xs = list(xs)
    tape = _tape_of(*xs)
    if tape is None:
        return np.stack(xs, axis=axis)
    vals = [np.broadcast_to(_val(x), np.broadcast_shapes(*[np.shape(_val(y)) for y in xs])) for x in xs]
    shapes = [np.shape(_val(x)) for x in xs]

    def vjp(g):
        parts = np.moveaxis(g, axis, 0)
        return [_unbroadcast(p, s) if isinstance(x, Var) else None for x, p, s in zip(xs, parts, shapes)]

    return tape._record(np.stack(vals, axis=axis), _parents(*xs), vjp)


def selu(a):
    """SELU with the standard published constants."""
    if not isinstance(a, Var):
        return SELU_SCALE * np.where(a > 0, a, SELU_ALPHA * np.expm1(np.minimum(a, 0.0)))
    av = a.value
    pos = av > 0
    e = np.exp(np.minimum(av, 0.0))
    out = SELU_SCALE * np.where(pos, av, SELU_ALPHA * (e - 1.0))
    d = SELU_SCALE * np.where(pos, 1.0, SELU_ALPHA * e)
    return a.tape._record(out, (a,), lambda g: (g * d,))


def _windows(x, kh, kw, H, W):
    return [x[..., ky:ky + H, kx:kx + W] for ky in range(kh) for kx in range(kw)]


def conv(x, weight, bias):
    """Valid cross-correlation over the last two axes.

    ``x``: ``(C_in, *batch, H + kh - 1, W + kw - 1)``; ``weight``:
    ``(C_out, C_in, kh, kw)``; ``bias``: ``(C_out,)``.  Returns
    ``(C_out, *batch, H, W)``.
    """
    xv, wv, bv = _val(x), _val(weight), _val(bias)
    cout, cin, kh, kw = wv.shape
    H = xv.shape[-2] - kh + 1
    W = xv.shape[-1] - kw + 1
    cols = np.stack(_windows(xv, kh, kw, H, W), axis=1)
    cols = cols.reshape((cin * kh * kw,) + cols.shape[2:])
    wm = wv.reshape(cout, cin * kh * kw)
    out = np.tensordot(wm, cols, axes=(1, 0))
    out += bv.reshape((cout,) + (1,) * (out.ndim - 1))
    tape = _tape_of(x, weight, bias)
    if tape is None:
        return out

    def vjp(g):
        gx = gw = gb = None
        if isinstance(weight, Var):
            rest = tuple(range(1, g.ndim))
            gw = np.tensordot(g, cols, axes=(rest, rest)).reshape(wv.shape)
        if isinstance(bias, Var):
            gb = g.reshape(cout, -1).sum(axis=1)
        if isinstance(x, Var):
            gcols = np.tensordot(wm.T, g, axes=(1, 0))
            gcols = gcols.reshape((cin, kh * kw) + gcols.shape[1:])
            gx = np.zeros_like(xv)
            k = 0
            for ky in range(kh):
                for kx in range(kw):
                    gx[..., ky:ky + H, kx:kx + W] += gcols[:, k]
                    k += 1
        return (gx, gw, gb)

    return tape._record(out, _parents(x, weight, bias), vjp)
