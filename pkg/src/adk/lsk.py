"""Large-selective-kernel attention block, as pure numpy forward passes.

Two convolution paths are provided on purpose. ``conv2d_direct`` is the
oracle: a quadruple loop over (batch, out-channel, y, x) summing dilated
taps, slow and obviously right. ``conv2d_fast`` is an im2col
reformulation whose only correctness argument is agreement with the
oracle. Everything computes in float64; the on-disk format is float32.

The block itself: a depthwise 5x5 conv gives a short-range map, a dilated
depthwise 7x7 (d=3) on top of it a long-range map; each is halved through
a ghost conv; per-pixel channel mean and max of the concatenation feed a
7x7 two-channel conv whose sigmoid splits into one spatial attention map
per branch; the attention-weighted branches are summed, fused back to the
input width by a pointwise conv, and gate the input element-wise. All
convolutions here preserve spatial size, which pins every padding:
2p = d(k-1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit


def _as_tensor4(x: np.ndarray, what: str = "input") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"{what} must be 4-d (b, c, h, w), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")
    return x


@dataclass(frozen=True, eq=False)
class ConvSpec:
    """A 2-d cross-correlation: weights (out, in/groups, k, k), stride 1."""

    in_channels: int
    out_channels: int
    kernel_size: int
    padding: int
    weights: np.ndarray
    bias: np.ndarray | None = None
    dilation: int = 1
    groups: int = 1

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.kernel_size < 1 or self.padding < 0 or self.dilation < 1 or self.groups < 1:
            raise ValueError("kernel size/padding/dilation/groups out of range")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"groups {self.groups} must divide in {self.in_channels} and out {self.out_channels}"
            )
        want = (self.out_channels, self.in_channels // self.groups, self.kernel_size, self.kernel_size)
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != want:
            raise ValueError(f"weights shape {w.shape} != expected {want}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        object.__setattr__(self, "weights", w)
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.shape != (self.out_channels,):
                raise ValueError(f"bias shape {b.shape} != ({self.out_channels},)")
            if not np.all(np.isfinite(b)):
                raise ValueError("bias contains non-finite values")
            object.__setattr__(self, "bias", b)

    @property
    def span(self) -> int:
        """Receptive-field extent: d(k-1) + 1."""
        return self.dilation * (self.kernel_size - 1) + 1

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        oh = h + 2 * self.padding - self.dilation * (self.kernel_size - 1)
        ow = w + 2 * self.padding - self.dilation * (self.kernel_size - 1)
        if oh < 1 or ow < 1:
            raise ValueError(
                f"kernel span {self.span} exceeds padded input {h + 2 * self.padding}x{w + 2 * self.padding}"
            )
        return oh, ow

    def preserves_spatial(self) -> bool:
        return 2 * self.padding == self.dilation * (self.kernel_size - 1)


def _check_input(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    x = _as_tensor4(x)
    if x.shape[1] != spec.in_channels:
        raise ValueError(f"input channels {x.shape[1]} != spec in_channels {spec.in_channels}")
    return x


def conv2d_direct(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Reference convolution: loop over every output element, sum the taps."""
    x = _check_input(x, spec)
    b, _, h, w = x.shape
    oh, ow = spec.out_size(h, w)
    p, d, k = spec.padding, spec.dilation, spec.kernel_size
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cin_g = spec.in_channels // spec.groups
    cout_g = spec.out_channels // spec.groups
    out = np.zeros((b, spec.out_channels, oh, ow), dtype=np.float64)
    for bi in range(b):
        for co in range(spec.out_channels):
            ch0 = (co // cout_g) * cin_g
            kernel = spec.weights[co]
            for oy in range(oh):
                for ox in range(ow):
                    patch = xp[
                        bi,
                        ch0 : ch0 + cin_g,
                        oy : oy + d * (k - 1) + 1 : d,
                        ox : ox + d * (k - 1) + 1 : d,
                    ]
                    out[bi, co, oy, ox] = float((patch * kernel).sum())
            if spec.bias is not None:
                out[bi, co] += spec.bias[co]
    return out


def conv2d_fast(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """im2col convolution: gather dilated patches once, then one matmul
    per group. Agrees with conv2d_direct within 1e-6 relative."""
    x = _check_input(x, spec)
    b, _, h, w = x.shape
    oh, ow = spec.out_size(h, w)
    p, d, k = spec.padding, spec.dilation, spec.kernel_size
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    windows = sliding_window_view(xp, (spec.span, spec.span), axis=(2, 3))
    windows = windows[..., ::d, ::d]  # (b, c_in, oh, ow, k, k)
    cin_g = spec.in_channels // spec.groups
    cout_g = spec.out_channels // spec.groups
    out = np.empty((b, spec.out_channels, oh, ow), dtype=np.float64)
    for g in range(spec.groups):
        cols = windows[:, g * cin_g : (g + 1) * cin_g]
        cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, cin_g * k * k)
        wmat = spec.weights[g * cout_g : (g + 1) * cout_g].reshape(cout_g, cin_g * k * k)
        prod = cols @ wmat.T  # (b, oh*ow, cout_g)
        out[:, g * cout_g : (g + 1) * cout_g] = prod.transpose(0, 2, 1).reshape(b, cout_g, oh, ow)
    if spec.bias is not None:
        out += spec.bias[None, :, None, None]
    return out


@dataclass(frozen=True, eq=False)
class GhostSpec:
    """Halved conv: a pointwise primary makes half the outputs, a cheap
    depthwise 3x3 derives the other half from them."""

    primary: ConvSpec
    cheap: ConvSpec

    def __post_init__(self):
        p, c = self.primary, self.cheap
        if p.kernel_size != 1 or p.padding != 0 or p.dilation != 1 or p.groups != 1:
            raise ValueError("ghost primary must be a plain pointwise conv")
        if c.kernel_size != 3 or c.padding != 1 or c.dilation != 1:
            raise ValueError("ghost cheap conv must be k=3, p=1")
        if c.groups != c.in_channels or c.in_channels != c.out_channels:
            raise ValueError("ghost cheap conv must be depthwise")
        if c.in_channels != p.out_channels:
            raise ValueError(
                f"ghost cheap channels {c.in_channels} != primary output {p.out_channels}"
            )

    @property
    def out_channels(self) -> int:
        return 2 * self.primary.out_channels


def ghost_conv(x: np.ndarray, ghost: GhostSpec, conv=conv2d_fast) -> np.ndarray:
    """Primary half concatenated with its cheap depthwise derivation."""
    first = conv(x, ghost.primary)
    second = conv(first, ghost.cheap)
    return np.concatenate([first, second], axis=1)


def channel_pool(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and max over channels, each (b, 1, h, w)."""
    x = _as_tensor4(x)
    return x.mean(axis=1, keepdims=True), x.max(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class LskParams:
    """All weights of the block, for channel width C (divisible by 4).

    branch1: depthwise k=5 p=2 over C; branch2: depthwise k=7 p=9 d=3 over
    C; ghost1/ghost2: C -> C/2 each; attention: 2 -> 2, k=7 p=3;
    fusion: pointwise C/2 -> C.
    """

    branch1: ConvSpec
    branch2: ConvSpec
    ghost1: GhostSpec
    ghost2: GhostSpec
    attention: ConvSpec
    fusion: ConvSpec

    def __post_init__(self):
        c = self.branch1.in_channels
        if c % 4:
            raise ValueError(f"channel width {c} must be divisible by 4")
        half, quarter = c // 2, c // 4

        def need(cond: bool, msg: str):
            if not cond:
                raise ValueError(msg)

        b1, b2 = self.branch1, self.branch2
        need(b1.out_channels == c and b1.groups == c and b1.kernel_size == 5 and b1.padding == 2
             and b1.dilation == 1, "branch1 must be depthwise k=5 p=2 over C")
        need(b2.in_channels == c and b2.out_channels == c and b2.groups == c
             and b2.kernel_size == 7 and b2.padding == 9 and b2.dilation == 3,
             "branch2 must be depthwise k=7 p=9 d=3 over C")
        for name, g in (("ghost1", self.ghost1), ("ghost2", self.ghost2)):
            need(g.primary.in_channels == c and g.primary.out_channels == quarter,
                 f"{name} must map C={c} to C/2={half} (primary C/4={quarter})")
        a = self.attention
        need(a.in_channels == 2 and a.out_channels == 2 and a.kernel_size == 7
             and a.padding == 3 and a.dilation == 1 and a.groups == 1,
             "attention conv must be 2->2, k=7 p=3")
        f = self.fusion
        need(f.in_channels == half and f.out_channels == c and f.kernel_size == 1
             and f.padding == 0 and f.dilation == 1 and f.groups == 1,
             "fusion conv must be pointwise C/2 -> C")
        for spec in (b1, b2, a, f, self.ghost1.primary, self.ghost1.cheap,
                     self.ghost2.primary, self.ghost2.cheap):
            need(spec.preserves_spatial(), "every conv in the block must preserve spatial size")

    @property
    def channels(self) -> int:
        return self.branch1.in_channels


def lsk_forward(x: np.ndarray, params: LskParams, conv=conv2d_fast) -> np.ndarray:
    """Forward pass; output shape equals input shape.

    The two sigmoid maps each weight one branch; with all-zero weights the
    maps are exactly 0.5 everywhere but both branches are zero, so the
    fused gate and hence the output are zero.
    """
    x = _as_tensor4(x)
    if x.shape[1] != params.channels:
        raise ValueError(f"input channels {x.shape[1]} != params channels {params.channels}")
    shallow = conv(x, params.branch1)
    deep = conv(shallow, params.branch2)
    half_a = ghost_conv(shallow, params.ghost1, conv)
    half_b = ghost_conv(deep, params.ghost2, conv)
    merged = np.concatenate([half_a, half_b], axis=1)
    mean_map, max_map = channel_pool(merged)
    pooled = np.concatenate([mean_map, max_map], axis=1)
    gates = expit(conv(pooled, params.attention))
    gate_a = gates[:, 0:1]  # broadcasts over the C/2 branch channels
    gate_b = gates[:, 1:2]
    weighted = half_a * gate_a + half_b * gate_b
    return x * conv(weighted, params.fusion)


def random_lsk_params(channels: int, seed: int = 0, scale: float = 0.1, bias: bool = False) -> LskParams:
    """Gaussian-initialized parameters for a given channel width."""
    if channels % 4:
        raise ValueError(f"channel width {channels} must be divisible by 4")
    rng = np.random.default_rng(seed)
    half, quarter = channels // 2, channels // 4

    def spec(cin, cout, k, p, d=1, g=1):
        w = rng.normal(0.0, scale, size=(cout, cin // g, k, k))
        b = rng.normal(0.0, scale, size=cout) if bias else None
        return ConvSpec(cin, cout, k, p, w, b, dilation=d, groups=g)

    def ghost(cin):
        return GhostSpec(spec(cin, quarter, 1, 0), spec(quarter, quarter, 3, 1, g=quarter))

    return LskParams(
        branch1=spec(channels, channels, 5, 2, g=channels),
        branch2=spec(channels, channels, 7, 9, d=3, g=channels),
        ghost1=ghost(channels),
        ghost2=ghost(channels),
        attention=spec(2, 2, 7, 3),
        fusion=spec(half, channels, 1, 0),
    )


def zero_lsk_params(channels: int) -> LskParams:
    return random_lsk_params(channels, seed=0, scale=0.0)


# --- binary tensor and parameter files ---------------------------------------
#
# Tensor file: 4 little-endian uint32 dims (b, c, h, w) then b*c*h*w
# little-endian float32 values, row-major. Parameter file: magic "ADKP",
# uint32 version, uint32 entry count, then per entry a uint16 name length,
# the utf-8 name, uint8 rank, rank uint32 dims, and the float32 payload.


def write_tensor4(f: BinaryIO, x: np.ndarray) -> None:
    x = _as_tensor4(x, "tensor")
    f.write(struct.pack("<4I", *x.shape))
    f.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def read_tensor4(f: BinaryIO) -> np.ndarray:
    header = f.read(16)
    if len(header) != 16:
        raise ValueError("truncated tensor header")
    dims = struct.unpack("<4I", header)
    if any(d < 1 for d in dims):
        raise ValueError(f"non-positive tensor dims {dims}")
    count = int(np.prod(dims))
    payload = f.read(4 * count)
    if len(payload) != 4 * count:
        raise ValueError(f"tensor payload truncated: want {4 * count} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)


_PARAMS_MAGIC = b"ADKP"


def _write_entry(f: BinaryIO, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_entry(f: BinaryIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", f.read(2))
    name = f.read(name_len).decode("utf-8")
    (rank,) = struct.unpack("<B", f.read(1))
    dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
    count = int(np.prod(dims))
    data = np.frombuffer(f.read(4 * count), dtype="<f4").astype(np.float64)
    if data.size != count:
        raise ValueError(f"parameter entry {name!r} truncated")
    return name, data.reshape(dims)


def write_lsk_params(f: BinaryIO, params: LskParams) -> None:
    entries: list[tuple[str, np.ndarray]] = []

    def add(name: str, spec: ConvSpec):
        entries.append((f"{name}.weight", spec.weights))
        if spec.bias is not None:
            entries.append((f"{name}.bias", spec.bias))

    add("branch1", params.branch1)
    add("branch2", params.branch2)
    add("ghost1.primary", params.ghost1.primary)
    add("ghost1.cheap", params.ghost1.cheap)
    add("ghost2.primary", params.ghost2.primary)
    add("ghost2.cheap", params.ghost2.cheap)
    add("attention", params.attention)
    add("fusion", params.fusion)
    f.write(_PARAMS_MAGIC)
    f.write(struct.pack("<II", 1, len(entries)))
    for name, arr in entries:
        _write_entry(f, name, arr)


def read_lsk_params(f: BinaryIO) -> LskParams:
    if f.read(4) != _PARAMS_MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version, n = struct.unpack("<II", f.read(8))
    if version != 1:
        raise ValueError(f"unsupported parameter file version {version}")
    entries = dict(_read_entry(f) for _ in range(n))

    def spec(name: str, cin, cout, k, p, d=1, g=1) -> ConvSpec:
        if f"{name}.weight" not in entries:
            raise ValueError(f"parameter file missing {name}.weight")
        return ConvSpec(
            cin, cout, k, p, entries[f"{name}.weight"], entries.get(f"{name}.bias"),
            dilation=d, groups=g,
        )

    c = int(entries["branch1.weight"].shape[0])
    half, quarter = c // 2, c // 4
    return LskParams(
        branch1=spec("branch1", c, c, 5, 2, g=c),
        branch2=spec("branch2", c, c, 7, 9, d=3, g=c),
        ghost1=GhostSpec(
            spec("ghost1.primary", c, quarter, 1, 0),
            spec("ghost1.cheap", quarter, quarter, 3, 1, g=quarter),
        ),
        ghost2=GhostSpec(
            spec("ghost2.primary", c, quarter, 1, 0),
            spec("ghost2.cheap", quarter, quarter, 3, 1, g=quarter),
        ),
        attention=spec("attention", 2, 2, 7, 3),
        fusion=spec("fusion", half, c, 1, 0),
    )
