"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tape`` records operations in execution order while it is active (as a
context manager); ``backward`` replays the records in reverse and accumulates
gradients into the participating tensors.  Everything runs in 64-bit floats so
analytic gradients can be compared against finite differences at tight
tolerances.  Convolution follows the cross-correlation convention (no kernel
flip).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


class TapeError(RuntimeError):
    """Raised on invalid tape usage (double backward, non-scalar loss, ...)."""


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Ordered log of differentiable operations.

    Records are appended in forward execution order, so every input of a
    record precedes the record's output; reverse iteration therefore visits
    each node after all of its consumers.  A tape can be consumed by
    ``backward`` exactly once.
    """

    def __init__(self) -> None:
        self.records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _TAPE_STACK.pop()
        return False

    def record(self, output: "Tensor", inputs: tuple["Tensor", ...], backward_fn) -> None:
        self.records.append((output, inputs, backward_fn))

    def __len__(self) -> int:
        return len(self.records)


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """N-dimensional float64 value, optionally participating in a tape."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar: same-shape tensors or python scalars only.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def abs(self) -> "Tensor":
        return abs_val(self)

    def relu(self) -> "Tensor":
        return pointwise(self, "relu")

    def tanh(self) -> "Tensor":
        return pointwise(self, "tanh")

    def sigmoid(self) -> "Tensor":
        return pointwise(self, "sigmoid")


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def zero_grad(tensors) -> None:
    """Clear gradients; mandatory between backward passes on fresh tapes."""
    if isinstance(tensors, dict):
        tensors = tensors.values()
    for t in tensors:
        t.grad = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, inputs, backward_fn)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Reverse accumulation of ``d loss / d leaf`` for every tape participant.

    The loss must be scalar.  Gradients of requires_grad tensors that feed the
    tape but have no path to the loss end up as zeros; tensors never touched
    by the tape keep ``grad=None`` (semantically zero).  A tape can only be
    consumed once: call ``zero_grad`` and rebuild the graph for another pass.
    """
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward; "
                        "zero_grad and rebuild the graph before differentiating again")
    tape.consumed = True
    seen_inputs: list[Tensor] = []
    loss.grad = np.ones_like(loss.data)
    for out, inputs, backward_fn in reversed(tape.records):
        seen_inputs.extend(t for t in inputs if t.requires_grad)
        if out.grad is None:
            continue
        backward_fn(out.grad)
    for t in seen_inputs:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)


# ---------------------------------------------------------------------------
# elementwise and reduction ops
# ---------------------------------------------------------------------------

def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = Tensor(a.data + s)

        def bw(g):
            _accumulate(a, g)

        return _record(out, (a,), bw)
    _check_same_shape(a, b, "add")
    out = Tensor(a.data + b.data)

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _record(out, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    _check_same_shape(a, b, "sub")
    out = Tensor(a.data - b.data)

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _record(out, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = Tensor(a.data * s)

        def bw(g):
            _accumulate(a, g * s)

        return _record(out, (a,), bw)
    _check_same_shape(a, b, "mul")
    out = Tensor(a.data * b.data)

    def bw(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _record(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)

    def bw(g):
        _accumulate(a, -g)

    return _record(out, (a,), bw)


def abs_val(a: Tensor) -> Tensor:
    out = Tensor(np.abs(a.data))
    sign = np.sign(a.data)

    def bw(g):
        _accumulate(a, g * sign)

    return _record(out, (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum())
    shape = a.shape

    def bw(g):
        _accumulate(a, np.full(shape, float(g)))

    return _record(out, (a,), bw)


_POINTWISE_FWD = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
}


def pointwise(a: Tensor, fn: str) -> Tensor:
    """Elementwise relu / tanh / sigmoid with registered derivative."""
    if fn not in _POINTWISE_FWD:
        raise ValueError(f"unknown pointwise fn {fn!r}; expected one of {sorted(_POINTWISE_FWD)}")
    y = _POINTWISE_FWD[fn](a.data)
    out = Tensor(y)
    if fn == "relu":
        mask = a.data > 0

        def bw(g):
            _accumulate(a, g * mask)
    elif fn == "tanh":
        def bw(g, y=y):
            _accumulate(a, g * (1.0 - y * y))
    else:  # sigmoid
        def bw(g, y=y):
            _accumulate(a, g * y * (1.0 - y))
    return _record(out, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    out = Tensor(a.data.reshape(shape))
    orig = a.shape

    def bw(g):
        _accumulate(a, g.reshape(orig))

    return _record(out, (a,), bw)


def narrow_batch(a: Tensor, start: int, length: int) -> Tensor:
    """Slice ``length`` items along axis 0 starting at ``start``."""
    if not (0 <= start and start + length <= a.shape[0]):
        raise ShapeError(f"narrow_batch [{start}:{start + length}] out of range for {a.shape}")
    out = Tensor(a.data[start:start + length])
    shape = a.shape

    def bw(g):
        full = np.zeros(shape)
        full[start:start + length] = g
        _accumulate(a, full)

    return _record(out, (a,), bw)


def select_column(a: Tensor, col: int) -> Tensor:
    """Column ``col`` of a 2-d tensor as a 1-d tensor."""
    if a.data.ndim != 2:
        raise ShapeError(f"select_column expects 2-d input, got {a.shape}")
    out = Tensor(a.data[:, col].copy())
    shape = a.shape

    def bw(g):
        full = np.zeros(shape)
        full[:, col] = g
        _accumulate(a, full)

    return _record(out, (a,), bw)


# ---------------------------------------------------------------------------
# linear / structural ops
# ---------------------------------------------------------------------------

def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight.T + bias for x:[N,D_in], weight:[D_out,D_in], bias:[D_out]."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or bias.data.ndim != 1:
        raise ShapeError(
            f"affine expects x:[N,D_in], weight:[D_out,D_in], bias:[D_out]; "
            f"got {x.shape}, {weight.shape}, {bias.shape}")
    n, d_in = x.shape
    d_out, d_in_w = weight.shape
    if d_in != d_in_w or bias.shape != (d_out,):
        raise ShapeError(
            f"affine dimension mismatch: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    out = Tensor(x.data @ weight.data.T + bias.data)

    def bw(g):
        _accumulate(x, g @ weight.data)
        _accumulate(weight, g.T @ x.data)
        _accumulate(bias, g.sum(axis=0))

    return _record(out, (x, weight, bias), bw)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along axis 1; all non-channel dims must agree.

    Zero-width operands are allowed (concat with an empty tensor is identity).
    """
    if a.data.ndim != b.data.ndim or a.data.ndim < 2:
        raise ShapeError(f"concat_channels: incompatible ranks {a.shape} vs {b.shape}")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"concat_channels: non-channel dims differ: {a.shape} vs {b.shape}")
    ca = a.shape[1]
    out = Tensor(np.concatenate([a.data, b.data], axis=1))

    def bw(g):
        _accumulate(a, g[:, :ca])
        _accumulate(b, g[:, ca:])

    return _record(out, (a, b), bw)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x:[N,C_in,H,W] with kernel:[C_out,C_in,k,k]."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    n, c_in, h, w = x.shape
    c_out, c_in_k, kh, kw = kernel.shape
    if kh != kw:
        raise ShapeError(f"conv2d kernel must be square, got {kernel.shape}")
    k = kh
    if k % 2 != 1:
        raise ShapeError(f"conv2d kernel size must be odd, got {k}")
    if c_in != c_in_k:
        raise ShapeError(
            f"conv2d channel mismatch: input has {c_in} channels, kernel expects {c_in_k} "
            f"(input {x.shape}, kernel {kernel.shape})")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride {stride} or padding {padding}")
    if (h + 2 * padding - k) % stride != 0 or (w + 2 * padding - k) % stride != 0:
        raise ShapeError(
            f"conv2d: spatial dims {(h, w)} with padding {padding}, kernel {k}, stride {stride} "
            f"do not tile; (dim + 2*padding - k) must be divisible by stride")
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (w + 2 * padding - k) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d: output would be empty for input {x.shape}, kernel {kernel.shape}")

    if k == 1 and stride == 1 and padding == 0:
        # 1x1 fast path: a single channel-mixing matmul.
        w2 = kernel.data.reshape(c_out, c_in)
        out_d = np.einsum("oc,nchw->nohw", w2, x.data, optimize=True)
        out = Tensor(out_d)

        def bw1(g):
            _accumulate(x, np.einsum("oc,nohw->nchw", w2, g, optimize=True))
            gw = np.einsum("nohw,nchw->oc", g, x.data, optimize=True)
            _accumulate(kernel, gw.reshape(c_out, c_in, 1, 1))

        return _record(out, (x, kernel), bw1)

    # Channel-first im2col + a single GEMM: cols[(C_in*k*k), (N*Ho*Wo)] is
    # filled with contiguous slice copies, which beats strided gathers here.
    if padding > 0:
        xp = np.zeros((n, c_in, h + 2 * padding, w + 2 * padding))
        xp[:, :, padding:padding + h, padding:padding + w] = x.data
    else:
        xp = x.data
    xpt = xp.transpose(1, 0, 2, 3)
    hi_end = (h_out - 1) * stride + 1
    wi_end = (w_out - 1) * stride + 1
    cols = np.empty((c_in, k * k, n, h_out, w_out))
    for ki in range(k):
        for kj in range(k):
            cols[:, ki * k + kj] = xpt[:, :, ki:ki + hi_end:stride, kj:kj + wi_end:stride]
    colmat = cols.reshape(c_in * k * k, n * h_out * w_out)
    out_t = kernel.data.reshape(c_out, c_in * k * k) @ colmat
    out = Tensor(np.ascontiguousarray(
        out_t.reshape(c_out, n, h_out, w_out).transpose(1, 0, 2, 3)))

    def bw(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(c_out, -1)
        if kernel.requires_grad:
            _accumulate(kernel, (gt @ colmat.T).reshape(c_out, c_in, k, k))
        if x.requires_grad:
            gcols = (kernel.data.reshape(c_out, -1).T @ gt).reshape(c_in, k * k, n, h_out, w_out)
            gxpt = np.zeros((c_in, n, h + 2 * padding, w + 2 * padding))
            for ki in range(k):
                for kj in range(k):
                    gxpt[:, :, ki:ki + hi_end:stride, kj:kj + wi_end:stride] += gcols[:, ki * k + kj]
            gx = gxpt[:, :, padding:padding + h, padding:padding + w] if padding else gxpt
            _accumulate(x, np.ascontiguousarray(gx.transpose(1, 0, 2, 3)))

    return _record(out, (x, kernel), bw)


def maxpool2d(x: Tensor, window: int) -> Tensor:
    """Per-window max over non-overlapping windows; ties route to the first
    (row-major) position in backward."""
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2d expects 4-d input, got {x.shape}")
    n, c, h, w = x.shape
    if window < 1 or h % window != 0 or w % window != 0:
        raise ShapeError(f"maxpool2d: spatial dims {(h, w)} not divisible by window {window}")
    ho, wo = h // window, w // window
    tiles = x.data.reshape(n, c, ho, window, wo, window)
    tiles = np.ascontiguousarray(tiles.transpose(0, 1, 2, 4, 3, 5)).reshape(n, c, ho, wo, window * window)
    idx = tiles.argmax(axis=-1)
    out = Tensor(np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0])

    def bw(g):
        rows = (np.arange(ho) * window)[None, None, :, None] + idx // window
        cols = (np.arange(wo) * window)[None, None, None, :] + idx % window
        flat = rows * w + cols
        gx = np.zeros((n, c, h * w))
        gx[np.arange(n)[:, None, None, None], np.arange(c)[None, :, None, None], flat] = g
        _accumulate(x, gx.reshape(n, c, h, w))

    return _record(out, (x,), bw)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Replicate each pixel factor x factor; backward sums over replicas."""
    if x.data.ndim != 4:
        raise ShapeError(f"upsample_nearest expects 4-d input, got {x.shape}")
    if factor < 1:
        raise ShapeError(f"upsample_nearest: factor must be >= 1, got {factor}")
    n, c, h, w = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3))

    def bw(g):
        _accumulate(x, g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))

    return _record(out, (x,), bw)


def pad_edge(x: Tensor, pad: int) -> Tensor:
    """Replicate-pad the two spatial dims of [N,C,H,W] by ``pad`` pixels."""
    if x.data.ndim != 4:
        raise ShapeError(f"pad_edge expects 4-d input, got {x.shape}")
    if pad < 0:
        raise ShapeError(f"pad_edge: pad must be >= 0, got {pad}")
    if pad == 0:
        return reshape(x, x.shape)
    out = Tensor(np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="edge"))

    def bw(g):
        gx = g[:, :, pad:-pad, pad:-pad].copy()
        for i in range(pad):
            gx[:, :, 0, :] += g[:, :, i, pad:-pad]
            gx[:, :, -1, :] += g[:, :, -1 - i, pad:-pad]
            gx[:, :, :, 0] += g[:, :, pad:-pad, i]
            gx[:, :, :, -1] += g[:, :, pad:-pad, -1 - i]
        gx[:, :, 0, 0] += g[:, :, :pad, :pad].sum(axis=(2, 3))
        gx[:, :, 0, -1] += g[:, :, :pad, -pad:].sum(axis=(2, 3))
        gx[:, :, -1, 0] += g[:, :, -pad:, :pad].sum(axis=(2, 3))
        gx[:, :, -1, -1] += g[:, :, -pad:, -pad:].sum(axis=(2, 3))
        _accumulate(x, gx)

    return _record(out, (x,), bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """[N,C,H,W] -> [N,C] spatial mean."""
    if x.data.ndim != 4:
        raise ShapeError(f"global_avg_pool expects 4-d input, got {x.shape}")
    n, c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(2, 3)))

    def bw(g):
        _accumulate(x, np.broadcast_to(g[:, :, None, None], (n, c, h, w)) / (h * w))

    return _record(out, (x,), bw)


def add_channel_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias [C] to [N,C,H,W]."""
    if x.data.ndim != 4 or bias.data.ndim != 1 or bias.shape[0] != x.shape[1]:
        raise ShapeError(f"add_channel_bias: got x {x.shape}, bias {bias.shape}")
    out = Tensor(x.data + bias.data[None, :, None, None])

    def bw(g):
        _accumulate(x, g)
        _accumulate(bias, g.sum(axis=(0, 2, 3)))

    return _record(out, (x, bias), bw)


def add_channel_map(x: Tensor, v: Tensor) -> Tensor:
    """Broadcast-add a per-sample channel vector [N,C] over [N,C,H,W]."""
    if x.data.ndim != 4 or v.data.ndim != 2 or v.shape != x.shape[:2]:
        raise ShapeError(f"add_channel_map: got x {x.shape}, v {v.shape}")
    out = Tensor(x.data + v.data[:, :, None, None])

    def bw(g):
        _accumulate(x, g)
        _accumulate(v, g.sum(axis=(2, 3)))

    return _record(out, (x, v), bw)


def scale_per_sample(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each sample of [N,...] by its scalar from s:[N]."""
    if s.data.ndim != 1 or s.shape[0] != x.shape[0]:
        raise ShapeError(f"scale_per_sample: got x {x.shape}, s {s.shape}")
    extra = (1,) * (x.data.ndim - 1)
    sview = s.data.reshape((-1,) + extra)
    out = Tensor(x.data * sview)

    def bw(g):
        _accumulate(x, g * sview)
        _accumulate(s, (g * x.data).reshape(x.shape[0], -1).sum(axis=1))

    return _record(out, (x, s), bw)


def masked_softmax(scores: Tensor, available: np.ndarray) -> Tensor:
    """Softmax over the last axis of [N,P] with unavailable entries forced to
    zero weight (their scores are treated as -inf).  Every row must keep at
    least one available entry."""
    if scores.data.ndim != 2:
        raise ShapeError(f"masked_softmax expects 2-d scores, got {scores.shape}")
    mask = np.asarray(available, dtype=bool)
    if mask.shape != scores.shape:
        raise ShapeError(f"masked_softmax: mask shape {mask.shape} != scores shape {scores.shape}")
    if not mask.any(axis=1).all():
        raise ShapeError("masked_softmax: some row has no available entry")
    z = np.where(mask, scores.data, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z, where=np.isfinite(z), out=np.zeros_like(z))
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def bw(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        _accumulate(scores, y * (g - dot))

    return _record(out, (scores,), bw)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    passed: bool
    checked: int
    worst_abs_err: float
    worst_rel_err: float
    worst_leaf: str
    worst_index: int
    failures: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {status}: {self.checked} coords, worst abs {self.worst_abs_err:.3e} "
                f"rel {self.worst_rel_err:.3e} at {self.worst_leaf}[{self.worst_index}]")


def check_gradients(f, leaves, samples: int = 50, abs_tol: float = 1e-4,
                    rel_tol: float = 1e-3, step: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients of the scalar ``f()`` against central
    finite differences at ``samples`` random coordinates of ``leaves``.

    ``f`` must rebuild its graph on every call from the leaf tensors it
    closes over.  A coordinate passes when
    ``|analytic - numeric| <= max(abs_tol, rel_tol * |numeric|)``.
    """
    if not isinstance(leaves, dict):
        leaves = {f"leaf{i}": t for i, t in enumerate(leaves)}
    rng = np.random.default_rng(seed)
    zero_grad(leaves)
    with Tape() as tape:
        loss = f()
    backward(loss, tape)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in leaves.items()
    }

    coords = [(name, i) for name, t in leaves.items() for i in range(t.size)]
    if len(coords) > samples:
        picks = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[i] for i in picks]

    worst_abs = 0.0
    worst_rel = 0.0
    worst = ("", 0)
    failures: list[str] = []
    for name, i in coords:
        t = leaves[name]
        orig = t.data.flat[i]
        t.data.flat[i] = orig + step
        hi = float(f().data.reshape(()))
        t.data.flat[i] = orig - step
        lo = float(f().data.reshape(()))
        t.data.flat[i] = orig
        numeric = (hi - lo) / (2.0 * step)
        a = analytic[name].flat[i]
        abs_err = abs(a - numeric)
        if abs_err > worst_abs:
            worst_abs, worst = abs_err, (name, i)
        if abs(numeric) > abs_tol:
            worst_rel = max(worst_rel, abs_err / abs(numeric))
        if abs_err > max(abs_tol, rel_tol * abs(numeric)):
            failures.append(f"{name}[{i}]: analytic {a:.6e} vs numeric {numeric:.6e}")
    return GradCheckReport(
        passed=not failures,
        checked=len(coords),
        worst_abs_err=worst_abs,
        worst_rel_err=worst_rel,
        worst_leaf=worst[0],
        worst_index=worst[1],
        failures=failures,
    )
