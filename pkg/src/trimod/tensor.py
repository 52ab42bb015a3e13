"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every value in the network is a Tensor wrapping a numpy float64 array.
Operations record their inputs and a gradient closure; backward() walks the
recorded graph once, accumulating d(output)/d(leaf) into each reachable leaf
that requires gradients. Graphs are rebuilt per example, so sequence lengths
can vary freely.

Shape discipline is strict: binary elementwise ops require exactly equal
shapes (no broadcasting). Structured ops that combine different shapes
(smul, add_to_rows, ...) are explicit and named.

Gradient closures must never mutate the arrays they receive; accumulation
here is non-destructive (`a = a + b`), so closures may safely return views.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


class Tensor:
    """A dense float64 array plus optional gradient bookkeeping.

    `data` is the raw numpy array (row-major). Leaf tensors created with
    requires_grad=True accumulate into `grad` across backward() calls;
    interior nodes carry the recorded parents and gradient closure instead.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backprop = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def sum(self) -> "Tensor":
        out = _node(np.asarray(self.data.sum()), (self,))
        if out._parents:
            shape = self.data.shape

            def bp(g):
                return ((self, np.full(shape, float(g))),)

            out._backprop = bp
        return out

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out = _node(self.data.reshape(shape), (self,))
        if out._parents:
            out._backprop = lambda g: ((self, g.reshape(old)),)
        return out

    # Elementwise arithmetic between tensors; scalars go through scale/shift.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named leaf tensor; the unit of training and serialization."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.zero_grad()

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _node(data, parents) -> Tensor:
    """Create an operation result; records parents only when grads are live."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
    return out


def _check_same_shape(a: Tensor, b: Tensor, opname: str):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{opname}: operand shapes {a.data.shape} and {b.data.shape} differ")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    out = _node(a.data + b.data, (a, b))
    if out._parents:
        out._backprop = lambda g: ((a, g), (b, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    out = _node(a.data - b.data, (a, b))
    if out._parents:
        out._backprop = lambda g: ((a, g), (b, -g))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    out = _node(a.data * b.data, (a, b))
    if out._parents:
        out._backprop = lambda g: ((a, g * b.data), (b, g * a.data))
    return out


def neg(a: Tensor) -> Tensor:
    out = _node(-a.data, (a,))
    if out._parents:
        out._backprop = lambda g: ((a, -g),)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (not a tensor-tensor broadcast)."""
    c = float(c)
    out = _node(a.data * c, (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g * c),)
    return out


def shift(a: Tensor, c: float) -> Tensor:
    """Add a python constant elementwise."""
    out = _node(a.data + float(c), (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g),)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _node(y, (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g * (1.0 - y * y)),)
    return out


def sigmoid(a: Tensor) -> Tensor:
    # Stable in both tails: rewrite via exp of -|x|.
    x = a.data
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = _node(y, (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g * y * (1.0 - y)),)
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = _node(y, (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g * y),)
    return out


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError(f"log: domain error, minimum operand value is {a.data.min()}")
    out = _node(np.log(a.data), (a,))
    if out._parents:
        out._backprop = lambda g: ((a, g / a.data),)
    return out


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: (m,k)@(k,n), (m,k)@(k,) or (k,)@(k,n)."""
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dimensions disagree, {ad.shape} x {bd.shape}")
        out = _node(ad @ bd, (a, b))
        if out._parents:
            out._backprop = lambda g: ((a, g @ bd.T), (b, ad.T @ g))
        return out
    if ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dimensions disagree, {ad.shape} x {bd.shape}")
        out = _node(ad @ bd, (a, b))
        if out._parents:
            out._backprop = lambda g: ((a, np.outer(g, bd)), (b, ad.T @ g))
        return out
    if ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dimensions disagree, {ad.shape} x {bd.shape}")
        out = _node(ad @ bd, (a, b))
        if out._parents:
            out._backprop = lambda g: ((a, bd @ g), (b, np.outer(ad, g)))
        return out
    raise ShapeError(f"matmul: unsupported ranks {ad.shape} x {bd.shape} (use dot for two vectors)")


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two equal-length vectors; returns a scalar tensor."""
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise ShapeError(f"dot: needs two vectors, got {a.shape} and {b.shape}")
    _check_same_shape(a, b, "dot")
    out = _node(np.asarray(a.data @ b.data), (a, b))
    if out._parents:
        out._backprop = lambda g: ((a, float(g) * b.data), (b, float(g) * a.data))
    return out


def smul(s: Tensor, t: Tensor) -> Tensor:
    """Scale tensor t by scalar tensor s (gradient flows into both)."""
    if s.data.size != 1:
        raise ShapeError(f"smul: first operand must be scalar, got shape {s.shape}")
    sv = float(s.data.reshape(()))
    out = _node(sv * t.data, (s, t))
    if out._parents:

        def bp(g):
            return ((s, np.asarray((g * t.data).sum()).reshape(s.data.shape)), (t, sv * g))

        out._backprop = bp
    return out


# ---------------------------------------------------------------------------
# Structure ops
# ---------------------------------------------------------------------------


def concat(parts, axis: int = 0) -> Tensor:
    """Lay tensors out contiguously along `axis`; gradient splits back."""
    parts = list(parts)
    if not parts:
        raise ShapeError("concat: needs at least one tensor")
    if len(parts) == 1:
        return parts[0]
    rank = parts[0].data.ndim
    if not 0 <= axis < max(rank, 1):
        raise ShapeError(f"concat: axis {axis} out of range for rank {rank}")
    for p in parts[1:]:
        if p.data.ndim != rank:
            raise ShapeError(f"concat: mixed ranks {parts[0].shape} and {p.shape}")
        for d in range(rank):
            if d != axis and p.data.shape[d] != parts[0].data.shape[d]:
                raise ShapeError(f"concat: incompatible shapes {parts[0].shape} and {p.shape} on axis {d}")
    out = _node(np.concatenate([p.data for p in parts], axis=axis), (*parts,))
    if out._parents:
        sizes = [p.data.shape[axis] for p in parts]

        def bp(g):
            grads = []
            off = 0
            index = [slice(None)] * rank
            for p, n in zip(parts, sizes):
                index[axis] = slice(off, off + n)
                grads.append((p, g[tuple(index)]))
                off += n
            return grads

        out._backprop = bp
    return out


def take_row(m: Tensor, i: int) -> Tensor:
    """Row i of a matrix as a vector (embedding-style lookup)."""
    if m.data.ndim != 2:
        raise ShapeError(f"take_row: needs a matrix, got shape {m.shape}")
    if not 0 <= i < m.data.shape[0]:
        raise ShapeError(f"take_row: row {i} out of range for shape {m.shape}")
    out = _node(m.data[i], (m,))
    if out._parents:
        shape = m.data.shape

        def bp(g):
            gm = np.zeros(shape)
            gm[i] = g
            return ((m, gm),)

        out._backprop = bp
    return out


def take_col(m: Tensor, j: int) -> Tensor:
    """Column j of a matrix as a vector."""
    if m.data.ndim != 2:
        raise ShapeError(f"take_col: needs a matrix, got shape {m.shape}")
    if not 0 <= j < m.data.shape[1]:
        raise ShapeError(f"take_col: column {j} out of range for shape {m.shape}")
    out = _node(m.data[:, j], (m,))
    if out._parents:
        shape = m.data.shape

        def bp(g):
            gm = np.zeros(shape)
            gm[:, j] = g
            return ((m, gm),)

        out._backprop = bp
    return out


def submatrix(m: Tensor, r0: int, r1: int, c0: int, c1: int) -> Tensor:
    """Contiguous block m[r0:r1, c0:c1]."""
    if m.data.ndim != 2:
        raise ShapeError(f"submatrix: needs a matrix, got shape {m.shape}")
    rows, cols = m.data.shape
    if not (0 <= r0 <= r1 <= rows and 0 <= c0 <= c1 <= cols):
        raise ShapeError(f"submatrix: block [{r0}:{r1}, {c0}:{c1}] invalid for shape {m.shape}")
    out = _node(m.data[r0:r1, c0:c1], (m,))
    if out._parents:
        shape = m.data.shape

        def bp(g):
            gm = np.zeros(shape)
            gm[r0:r1, c0:c1] = g
            return ((m, gm),)

        out._backprop = bp
    return out


def slice1d(v: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice of a vector."""
    if v.data.ndim != 1:
        raise ShapeError(f"slice1d: needs a vector, got shape {v.shape}")
    if not 0 <= start <= stop <= v.data.shape[0]:
        raise ShapeError(f"slice1d: range [{start},{stop}) invalid for length {v.data.shape[0]}")
    out = _node(v.data[start:stop], (v,))
    if out._parents:
        n = v.data.shape[0]

        def bp(g):
            gv = np.zeros(n)
            gv[start:stop] = g
            return ((v, gv),)

        out._backprop = bp
    return out


def at(v: Tensor, i: int) -> Tensor:
    """Single element of a vector as a scalar tensor."""
    if v.data.ndim != 1:
        raise ShapeError(f"at: needs a vector, got shape {v.shape}")
    if not 0 <= i < v.data.shape[0]:
        raise ShapeError(f"at: index {i} out of range for length {v.data.shape[0]}")
    out = _node(np.asarray(v.data[i]), (v,))
    if out._parents:
        n = v.data.shape[0]

        def bp(g):
            gv = np.zeros(n)
            gv[i] = float(g)
            return ((v, gv),)

        out._backprop = bp
    return out


def pick(m: Tensor, i: int, j: int) -> Tensor:
    """Single entry of a matrix as a scalar tensor."""
    if m.data.ndim != 2:
        raise ShapeError(f"pick: needs a matrix, got shape {m.shape}")
    out = _node(np.asarray(m.data[i, j]), (m,))
    if out._parents:
        shape = m.data.shape

        def bp(g):
            gm = np.zeros(shape)
            gm[i, j] = float(g)
            return ((m, gm),)

        out._backprop = bp
    return out


def add_to_rows(m: Tensor, v: Tensor) -> Tensor:
    """out[i, j] = m[i, j] + v[i]; the explicit row-broadcast add."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[0] != v.data.shape[0]:
        raise ShapeError(f"add_to_rows: incompatible shapes {m.shape} and {v.shape}")
    out = _node(m.data + v.data[:, None], (m, v))
    if out._parents:
        out._backprop = lambda g: ((m, g), (v, g.sum(axis=1)))
    return out


def logsumexp(v: Tensor) -> Tensor:
    """log(sum(exp(v))) of a vector, stabilized; gradient is softmax(v)."""
    if v.data.ndim != 1:
        raise ShapeError(f"logsumexp: needs a vector, got shape {v.shape}")
    m = v.data.max()
    y = m + math.log(np.exp(v.data - m).sum())
    out = _node(np.asarray(y), (v,))
    if out._parents:
        soft = np.exp(v.data - y)
        out._backprop = lambda g: ((v, float(g) * soft),)
    return out


def logsumexp_axis0(m: Tensor) -> Tensor:
    """Column-wise log-sum-exp of a matrix: out[j] = log(sum_i(exp(m[i,j])))."""
    if m.data.ndim != 2:
        raise ShapeError(f"logsumexp_axis0: needs a matrix, got shape {m.shape}")
    top = m.data.max(axis=0)
    y = top + np.log(np.exp(m.data - top[None, :]).sum(axis=0))
    out = _node(y, (m,))
    if out._parents:
        soft = np.exp(m.data - y[None, :])
        out._backprop = lambda g: ((m, soft * g[None, :]),)
    return out


def affine(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """w @ x + b, the ubiquitous projection."""
    return add(matmul(w, x), b)


def mean(a: Tensor) -> Tensor:
    return scale(a.sum(), 1.0 / a.data.size)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


def _toposort(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out: Tensor):
    """Accumulate d(out)/d(leaf) into every reachable requires-grad leaf.

    `out` must be a scalar. Repeated calls keep accumulating, which is what
    gradient accumulation across batches relies on.
    """
    if out.data.size != 1:
        raise ValueError(f"backward: output must be scalar, got shape {out.shape}")
    if not out.requires_grad:
        return
    order = _toposort(out)
    grads = {id(out): np.ones_like(out.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backprop is not None:
            for parent, pg in node._backprop(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg
        elif node.requires_grad:
            node.grad = np.array(g) if node.grad is None else node.grad + g


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------


def grad_check(f, params, eps: float = 1e-5, max_coords_per_param=None, rng=None) -> float:
    """Compare backward() against central differences, per coordinate.

    f is a no-argument callable that rebuilds the graph and returns a scalar
    Tensor; it must be deterministic across calls. Returns the maximum
    relative error, with denominator max(|analytic|, |numeric|, 1e-8).
    When max_coords_per_param is set, that many coordinates are sampled per
    parameter (deterministically via rng) instead of sweeping all of them.
    """
    if eps <= 0:
        raise ValueError("grad_check: eps must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise FloatingPointError("grad_check: f returned a non-finite value")
    backward(out)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        else:
            coords = range(n)
        afl = ana.reshape(-1)
        for i in coords:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                fp = f().item()
                flat[i] = orig - eps
                fm = f().item()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            denom = max(abs(afl[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(afl[i] - numeric) / denom)
    return worst
