"""Point-voxel denoiser eps_theta(x_t, t).

Structure: four set-abstraction (SA) stages downsample the cloud while
growing features, four feature-propagation (FP) stages interpolate back up
with skip connections, and a final shared linear head maps to per-point noise
predictions. SA/FP stages are built from PVConv blocks: features are
voxelized onto a D^3 grid (per-shape normalized scatter-average), pushed
through [conv3x3x3 -> GroupNorm(8) -> Swish -> Dropout(0.1) -> conv3x3x3 ->
GroupNorm(8) -> optional voxel self-attention], trilinearly devoxelized back
onto the points, and fused (added) with a per-point linear branch. Every
PVConv input is concatenated with a broadcast time embedding.

Geometry (voxel assignment, FPS centers, ball-query neighborhoods, 3-NN
interpolation) depends only on the input coordinates, never on parameters, so
it is computed once per input in float64 numpy as a reusable "plan"; the
parameter-dependent math runs in torch and is differentiable end to end.

Determinism: no torch RNG is used anywhere. Dropout masks are drawn from a
caller-supplied numpy Generator, one mask per PVConv block in execution order
(SA1 blocks, SA2, ..., FP4), and only when the module is in training mode.
Voxel scatter-addition runs in ascending point order within each shape.

The desk preset halves every channel count of the full architecture, halves
the voxel resolutions, shrinks the center counts, and uses a 32-dim time
embedding; center counts are clamped to the current level's point count, so
any N >= 1 is accepted (the desk default is N=128).
"""

from __future__ import annotations

import itertools

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.spatial.distance import cdist

__all__ = [
    "ARCH_FULL", "ARCH_DESK", "arch_preset", "raw_time_embedding",
    "farthest_point_sample", "ball_query", "interp_plan",
    "PVDenoiser", "DenoiserWrap", "init_denoiser", "denoise",
]

ARCH_FULL = {
    "name": "full",
    "temb_dim": 64,
    "sa": [
        {"L": 2, "c_out": 32,  "d": 32, "attn": False, "n_center": 1024, "radius": 0.1, "n_neighbor": 32},
        {"L": 3, "c_out": 64,  "d": 16, "attn": True,  "n_center": 256,  "radius": 0.2, "n_neighbor": 32},
        {"L": 3, "c_out": 128, "d": 8,  "attn": False, "n_center": 64,   "radius": 0.4, "n_neighbor": 32},
        {"L": 0, "c_out": 0,   "d": 0,  "attn": False, "n_center": 16,   "radius": 0.8, "n_neighbor": 32},
    ],
    "fp": [
        {"L": 3, "c_out": 256, "d": 8,  "attn": False},
        {"L": 3, "c_out": 256, "d": 8,  "attn": True},
        {"L": 2, "c_out": 128, "d": 16, "attn": False},
        {"L": 2, "c_out": 64,  "d": 32, "attn": False},
    ],
}

ARCH_DESK = {
    "name": "desk",
    "temb_dim": 32,
    "sa": [
        {"L": 2, "c_out": 16, "d": 16, "attn": False, "n_center": 256, "radius": 0.1, "n_neighbor": 32},
        {"L": 3, "c_out": 32, "d": 8,  "attn": True,  "n_center": 64,  "radius": 0.2, "n_neighbor": 32},
        {"L": 3, "c_out": 64, "d": 4,  "attn": False, "n_center": 16,  "radius": 0.4, "n_neighbor": 32},
        {"L": 0, "c_out": 0,  "d": 0,  "attn": False, "n_center": 4,   "radius": 0.8, "n_neighbor": 32},
    ],
    "fp": [
        {"L": 3, "c_out": 128, "d": 4,  "attn": False},
        {"L": 3, "c_out": 128, "d": 4,  "attn": True},
        {"L": 2, "c_out": 64,  "d": 8,  "attn": False},
        {"L": 2, "c_out": 32,  "d": 16, "attn": False},
    ],
}


def arch_preset(name: str) -> dict:
    if name == "full":
        return ARCH_FULL
    if name == "desk":
        return ARCH_DESK
    raise ValueError(f"unknown architecture preset {name!r}")


# ---------------------------------------------------------------------------
# Time embedding

def raw_time_embedding(t, dim: int) -> np.ndarray:
    """Interleaved (sin w_k t, cos w_k t) for k = 1..dim/2, w_k = 10000^(-2k/dim).

    Values lie in [-1, 1]. numpy reference twin of the torch module below.
    """
    if dim % 2 != 0 or dim < 2:
        raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
    t = np.asarray(t, dtype=np.float64)
    k = np.arange(1, dim // 2 + 1, dtype=np.float64)
    omega = 10000.0 ** (-2.0 * k / dim)
    ang = t[..., None] * omega
    out = np.empty(t.shape + (dim,), dtype=np.float64)
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


class TimeEmbedding(nn.Module):
    """Sinusoidal embedding followed by Linear -> LeakyReLU(0.1) -> Linear."""

    def __init__(self, dim: int):
        super().__init__()
        if dim % 2 != 0 or dim < 2:
            raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
        self.dim = dim
        k = torch.arange(1, dim // 2 + 1, dtype=torch.float64)
        self.register_buffer("omega", (10000.0 ** (-2.0 * k / dim)))
        self.fc1 = nn.Linear(dim, dim)
        self.fc2 = nn.Linear(dim, dim)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        dtype = self.fc1.weight.dtype
        ang = t.to(self.omega.dtype)[:, None] * self.omega
        raw = torch.empty(t.shape[0], self.dim, dtype=self.omega.dtype, device=t.device)
        raw[:, 0::2] = torch.sin(ang)
        raw[:, 1::2] = torch.cos(ang)
        h = self.fc1(raw.to(dtype))
        return self.fc2(F.leaky_relu(h, negative_slope=0.1))


# ---------------------------------------------------------------------------
# Parameter-independent geometry (numpy float64)

def farthest_point_sample(pc: np.ndarray, k: int) -> np.ndarray:
    """Greedy FPS starting at index 0; each pick maximizes the min squared
    distance to the chosen set among unchosen indices, ties to the lowest
    index. k=N returns a permutation of all indices."""
    pc = np.asarray(pc, dtype=np.float64)
    n = pc.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    idx = np.empty(k, dtype=np.int64)
    idx[0] = 0
    d2 = np.sum((pc - pc[0]) ** 2, axis=1)
    d2[0] = -1.0  # chosen points can never be re-picked
    for i in range(1, k):
        nxt = int(np.argmax(d2))  # first occurrence == lowest index on ties
        idx[i] = nxt
        nd = np.sum((pc - pc[nxt]) ** 2, axis=1)
        np.minimum(d2, nd, out=d2)
        d2[nxt] = -1.0
    return idx


def ball_query(pc: np.ndarray, centers: np.ndarray, r: float, k_nbr: int) -> np.ndarray:
    """Up to k_nbr point indices within distance r (inclusive) of each center,
    in ascending index order; an empty neighborhood falls back to the center's
    nearest point, and short lists repeat their first entry."""
    pc = np.asarray(pc, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    d2 = cdist(centers, pc, "sqeuclidean")
    out = np.empty((centers.shape[0], k_nbr), dtype=np.int64)
    r2 = r * r
    for i in range(centers.shape[0]):
        within = np.nonzero(d2[i] <= r2)[0]
        if within.size == 0:
            within = np.array([int(np.argmin(d2[i]))], dtype=np.int64)
        take = within[:k_nbr]
        out[i, : take.size] = take
        if take.size < k_nbr:
            out[i, take.size:] = take[0]
    return out


def interp_plan(fine: np.ndarray, coarse: np.ndarray):
    """3-NN inverse-squared-distance interpolation plan from coarse onto fine.

    Returns (idx (F, k), w (F, k)) with k = min(3, |coarse|); weights are
    1/(d^2 + 1e-8) normalized to sum to 1. Neighbor order is by ascending
    distance with ties to the lowest index.
    """
    fine = np.asarray(fine, dtype=np.float64)
    coarse = np.asarray(coarse, dtype=np.float64)
    d2 = cdist(fine, coarse, "sqeuclidean")
    k = min(3, coarse.shape[0])
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    d2k = np.take_along_axis(d2, idx, axis=1)
    w = 1.0 / (d2k + 1e-8)
    w /= w.sum(axis=1, keepdims=True)
    return idx.astype(np.int64), w


def _unit_cube_coords(pts: np.ndarray) -> np.ndarray:
    """Map each shape into [0,1]^3 by its centroid and max radius (radius 0
    falls back to scale 1)."""
    centroid = pts.mean(axis=1, keepdims=True)
    shifted = pts - centroid
    radius = np.linalg.norm(shifted, axis=2).max(axis=1)
    radius[radius == 0.0] = 1.0
    return shifted / (2.0 * radius[:, None, None]) + 0.5


def make_voxel_plan(pts: np.ndarray, d: int, dtype: torch.dtype) -> dict:
    """Scatter and trilinear-gather index/weight tensors for a (B, N, 3) level.

    Scatter: voxel index floor(u * d) clipped to [0, d-1], so the boundary
    coordinate 1.0 lands in the last voxel. Gather: standard center-aligned
    trilinear interpolation with edge replication (a point at an exact voxel
    center reads exactly that voxel).
    """
    u = _unit_cube_coords(np.asarray(pts, dtype=np.float64))
    b, n, _ = u.shape
    cell = np.clip(np.floor(u * d).astype(np.int64), 0, d - 1)
    scatter = (cell[..., 0] * d + cell[..., 1]) * d + cell[..., 2]

    g = u * d - 0.5
    i0 = np.floor(g)
    frac = g - i0
    i0 = i0.astype(np.int64)
    gather_idx = np.empty((b, n, 8), dtype=np.int64)
    gather_w = np.empty((b, n, 8), dtype=np.float64)
    for j, (dx, dy, dz) in enumerate(itertools.product((0, 1), repeat=3)):
        cx = np.clip(i0[..., 0] + dx, 0, d - 1)
        cy = np.clip(i0[..., 1] + dy, 0, d - 1)
        cz = np.clip(i0[..., 2] + dz, 0, d - 1)
        gather_idx[..., j] = (cx * d + cy) * d + cz
        wx = frac[..., 0] if dx else 1.0 - frac[..., 0]
        wy = frac[..., 1] if dy else 1.0 - frac[..., 1]
        wz = frac[..., 2] if dz else 1.0 - frac[..., 2]
        gather_w[..., j] = wx * wy * wz
    return {
        "d": int(d),
        "scatter": torch.from_numpy(scatter),
        "gather_idx": torch.from_numpy(gather_idx),
        "gather_w": torch.from_numpy(gather_w).to(dtype),
    }


# ---------------------------------------------------------------------------
# Voxel transfer (torch, differentiable in the features)

def voxelize(feats: torch.Tensor, plan: dict) -> torch.Tensor:
    """(B, C, N) point features -> (B, C, D^3) mean-scattered grid."""
    b, c, n = feats.shape
    d3 = plan["d"] ** 3
    offs = torch.arange(b, dtype=torch.int64) * d3
    flat = (plan["scatter"] + offs[:, None]).reshape(-1)
    src = feats.permute(1, 0, 2).reshape(c, -1)
    sums = feats.new_zeros((c, b * d3)).index_add(1, flat, src)
    counts = feats.new_zeros(b * d3).index_add(0, flat, feats.new_ones(b * n))
    grid = sums / counts.clamp(min=1.0)
    return grid.reshape(c, b, d3).permute(1, 0, 2)


def devoxelize(grid: torch.Tensor, plan: dict) -> torch.Tensor:
    """(B, C, D^3) grid -> (B, C, N) trilinearly interpolated point features."""
    b, c, _ = grid.shape
    out = None
    for j in range(8):
        idx = plan["gather_idx"][:, :, j].unsqueeze(1).expand(-1, c, -1)
        v = grid.gather(2, idx) * plan["gather_w"][:, None, :, j]
        out = v if out is None else out + v
    return out


# ---------------------------------------------------------------------------
# Network modules

class VoxelAttention(nn.Module):
    """Single-head scaled dot-product self-attention over voxel positions,
    with 1x1x1 q/k/v/out projections and a residual connection."""

    def __init__(self, channels: int):
        super().__init__()
        self.q = nn.Conv1d(channels, channels, 1)
        self.k = nn.Conv1d(channels, channels, 1)
        self.v = nn.Conv1d(channels, channels, 1)
        self.out = nn.Conv1d(channels, channels, 1)

    def forward(self, g: torch.Tensor) -> torch.Tensor:
        c = g.shape[1]
        q = self.q(g).transpose(1, 2)
        k = self.k(g)
        v = self.v(g).transpose(1, 2)
        w = torch.softmax(q @ k * (float(c) ** -0.5), dim=-1)
        return g + self.out((w @ v).transpose(1, 2))


class SharedMLP(nn.Module):
    """Per-point (or per-voxel) linear -> GroupNorm(8) -> Swish."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        _check_groups(c_out)
        self.fc = nn.Conv1d(c_in, c_out, 1)
        self.gn = nn.GroupNorm(8, c_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.silu(self.gn(self.fc(x)))


def _check_groups(channels: int) -> None:
    if channels % 8 != 0:
        raise ValueError(f"GroupNorm(8) needs channels divisible by 8, got {channels}")


class PVConv(nn.Module):
    """One point-voxel convolution block (see module docstring for the
    layer order). c_in excludes the time embedding, which is concatenated
    to the input features at the top of the block."""

    def __init__(self, c_in: int, c_out: int, d: int, temb_dim: int,
                 use_attn: bool, dropout: float = 0.1):
        super().__init__()
        _check_groups(c_out)
        cat = c_in + temb_dim
        self.d = d
        self.dropout_p = dropout
        self.conv1 = nn.Conv3d(cat, c_out, 3, padding=1)
        self.gn1 = nn.GroupNorm(8, c_out)
        self.conv2 = nn.Conv3d(c_out, c_out, 3, padding=1)
        self.gn2 = nn.GroupNorm(8, c_out)
        self.attn = VoxelAttention(c_out) if use_attn else None
        self.point_fc = nn.Conv1d(cat, c_out, 1)
        self.point_gn = nn.GroupNorm(8, c_out)

    def forward(self, feats: torch.Tensor, temb: torch.Tensor, vox_plan: dict,
                dropout_rng: np.random.Generator | None = None) -> torch.Tensor:
        b, _, n = feats.shape
        x = torch.cat([feats, temb.unsqueeze(-1).expand(-1, -1, n)], dim=1)
        d = self.d
        g = voxelize(x, vox_plan)
        g = self.conv1(g.reshape(b, -1, d, d, d)).flatten(2)
        g = F.silu(self.gn1(g))
        if self.training and dropout_rng is not None and self.dropout_p > 0.0:
            keep = dropout_rng.random(tuple(g.shape)) >= self.dropout_p
            mask = torch.from_numpy(keep).to(g.dtype) / (1.0 - self.dropout_p)
            g = g * mask
        g = self.conv2(g.reshape(b, -1, d, d, d)).flatten(2)
        g = self.gn2(g)
        if self.attn is not None:
            g = self.attn(g)
        dev = devoxelize(g, vox_plan)
        pt = F.silu(self.point_gn(self.point_fc(x)))
        return dev + pt


class SAModule(nn.Module):
    """Set abstraction: L PVConv blocks, a shared MLP, then FPS centers with
    ball-query grouping; grouped (feature, relative coordinate) pairs are
    max-pooled per center. Grouping-only when L=0 (no PVConv, no MLP)."""

    def __init__(self, c_in: int, cfg: dict, temb_dim: int):
        super().__init__()
        self.cfg = cfg
        blocks = []
        for i in range(cfg["L"]):
            blocks.append(PVConv(c_in if i == 0 else cfg["c_out"], cfg["c_out"],
                                 cfg["d"], temb_dim, cfg["attn"]))
        self.blocks = nn.ModuleList(blocks)
        self.mlp = SharedMLP(cfg["c_out"], cfg["c_out"]) if cfg["L"] > 0 else None
        self.out_channels = (cfg["c_out"] if cfg["L"] > 0 else c_in) + 3

    def forward(self, feats, temb, pts, centers, plan, dropout_rng):
        f = feats
        for blk in self.blocks:
            f = blk(f, temb, plan["vox"], dropout_rng)
        if self.mlp is not None:
            f = self.mlp(f)
        idx = plan["group_idx"]
        b, c, _ = f.shape
        k, nbr = idx.shape[1], idx.shape[2]
        flat = idx.reshape(b, 1, k * nbr)
        grouped = f.gather(2, flat.expand(-1, c, -1)).reshape(b, c, k, nbr)
        nbr_pts = pts.gather(1, idx.reshape(b, k * nbr, 1).expand(-1, -1, 3))
        rel = nbr_pts.reshape(b, k, nbr, 3) - centers.unsqueeze(2)
        g = torch.cat([grouped, rel.permute(0, 3, 1, 2)], dim=1)
        return g.amax(dim=3)


class FPModule(nn.Module):
    """Feature propagation: 3-NN inverse-distance interpolation of coarse
    features onto fine points, concat with the skip features, then L PVConv
    blocks and a shared MLP."""

    def __init__(self, c_in: int, cfg: dict, temb_dim: int):
        super().__init__()
        self.cfg = cfg
        blocks = []
        for i in range(cfg["L"]):
            blocks.append(PVConv(c_in if i == 0 else cfg["c_out"], cfg["c_out"],
                                 cfg["d"], temb_dim, cfg["attn"]))
        self.blocks = nn.ModuleList(blocks)
        self.mlp = SharedMLP(cfg["c_out"], cfg["c_out"])

    def forward(self, coarse_feats, skip_feats, temb, plan, dropout_rng):
        b, c, _ = coarse_feats.shape
        idx, w = plan["interp_idx"], plan["interp_w"]
        interp = None
        for j in range(idx.shape[-1]):
            col = idx[:, :, j].unsqueeze(1).expand(-1, c, -1)
            v = coarse_feats.gather(2, col) * w[:, None, :, j]
            interp = v if interp is None else interp + v
        f = torch.cat([interp, skip_feats], dim=1)
        for blk in self.blocks:
            f = blk(f, temb, plan["vox"], dropout_rng)
        return self.mlp(f)


class PVDenoiser(nn.Module):
    """The full denoiser. forward(x (B,N,3), t (B,)) -> (B,N,3) noise estimate.

    Plans (all parameter-independent geometry) can be precomputed with
    build_plans and passed back in to amortize repeated evaluations at the
    same input.
    """

    def __init__(self, arch: dict):
        super().__init__()
        self.arch = arch
        temb_dim = arch["temb_dim"]
        self.temb = TimeEmbedding(temb_dim)
        sa_modules = []
        c = 3
        self.level_channels = [3]  # encoder feature width at each level
        for cfg in arch["sa"]:
            mod = SAModule(c, cfg, temb_dim)
            sa_modules.append(mod)
            c = mod.out_channels
            self.level_channels.append(c)
        self.sa_modules = nn.ModuleList(sa_modules)
        fp_modules = []
        prev = self.level_channels[4]
        for j, cfg in enumerate(arch["fp"]):
            skip_c = self.level_channels[3 - j]
            fp_modules.append(FPModule(prev + skip_c, cfg, temb_dim))
            prev = cfg["c_out"]
        self.fp_modules = nn.ModuleList(fp_modules)
        self.head = nn.Conv1d(prev, 3, 1)

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def build_plans(self, x) -> dict:
        """Geometry plans for an input batch: level coordinates, FPS centers,
        ball-query groups, voxel scatter/gather tables, interpolation weights.
        x is (B, N, 3) (numpy or torch)."""
        if isinstance(x, torch.Tensor):
            x = x.detach().cpu().double().numpy()
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[-1] != 3 or x.shape[1] < 1:
            raise ValueError(f"expected (B, N, 3) input, got {x.shape}")
        b = x.shape[0]
        dtype = self.dtype
        pts = [x]
        sa_plans = []
        for cfg in self.arch["sa"]:
            cur = pts[-1]
            k_eff = min(cfg["n_center"], cur.shape[1])
            cidx = np.stack([farthest_point_sample(cur[i], k_eff) for i in range(b)])
            centers = np.stack([cur[i][cidx[i]] for i in range(b)])
            gidx = np.stack([ball_query(cur[i], centers[i], cfg["radius"],
                                        cfg["n_neighbor"]) for i in range(b)])
            vox = make_voxel_plan(cur, cfg["d"], dtype) if cfg["L"] > 0 else None
            sa_plans.append({"group_idx": torch.from_numpy(gidx), "vox": vox})
            pts.append(centers)
        fp_plans = []
        for j, cfg in enumerate(self.arch["fp"]):
            coarse, fine = pts[4 - j], pts[3 - j]
            pairs = [interp_plan(fine[i], coarse[i]) for i in range(b)]
            iidx = np.stack([p[0] for p in pairs])
            iw = np.stack([p[1] for p in pairs])
            fp_plans.append({
                "interp_idx": torch.from_numpy(iidx),
                "interp_w": torch.from_numpy(iw).to(dtype),
                "vox": make_voxel_plan(fine, cfg["d"], dtype),
            })
        pts_t = [torch.from_numpy(p).to(dtype) for p in pts]
        return {"pts": pts_t, "sa": sa_plans, "fp": fp_plans}

    def forward(self, x: torch.Tensor, t, dropout_rng: np.random.Generator | None = None,
                plans: dict | None = None) -> torch.Tensor:
        if x.ndim != 3 or x.shape[-1] != 3 or x.shape[1] < 1:
            raise ValueError(f"expected (B, N, 3) input, got {tuple(x.shape)}")
        if plans is None:
            plans = self.build_plans(x)
        t = torch.as_tensor(t, dtype=torch.int64).reshape(-1)
        if t.shape[0] == 1 and x.shape[0] > 1:
            t = t.expand(x.shape[0])
        if t.shape[0] != x.shape[0]:
            raise ValueError(f"got {t.shape[0]} timesteps for batch of {x.shape[0]}")
        temb = self.temb(t)
        pts = plans["pts"]
        f = x.transpose(1, 2)
        skips = [f]
        for i, sa in enumerate(self.sa_modules):
            f = sa(f, temb, pts[i], pts[i + 1], plans["sa"][i], dropout_rng)
            skips.append(f)
        g = skips[4]
        for j, fp in enumerate(self.fp_modules):
            g = fp(g, skips[3 - j], temb, plans["fp"][j], dropout_rng)
        return self.head(g).transpose(1, 2)


def init_denoiser(arch: dict, seed: int, zero_head: bool = True) -> PVDenoiser:
    """Fresh float32 denoiser with deterministic initialization.

    Conv/linear weights draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) in
    named_parameters order from one numpy generator; biases start at 0,
    GroupNorm at scale 1 / shift 0. The output head is then zeroed (unless
    zero_head=False) so an untrained model predicts eps_hat = 0; the draw
    stream is identical either way.
    """
    model = PVDenoiser(arch)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.ndim >= 2:
                fan_in = int(np.prod(p.shape[1:]))
                bound = 1.0 / float(np.sqrt(fan_in))
                vals = rng.uniform(-bound, bound, size=tuple(p.shape))
                p.copy_(torch.from_numpy(vals).to(p.dtype))
            elif name.endswith(".weight"):
                p.fill_(1.0)  # GroupNorm scale
            else:
                p.zero_()
        if zero_head:
            model.head.weight.zero_()
            model.head.bias.zero_()
    return model


class DenoiserWrap:
    """numpy adapter used by the samplers: (N, 3) float64 in, (N, 3) out.

    Evaluation mode (dropout off), no gradients. epsilon_batch lets the
    samplers advance many chains through one batched forward.
    """

    def __init__(self, model: PVDenoiser):
        self.model = model
        self.model.eval()

    def _run(self, xs: np.ndarray, t: int) -> np.ndarray:
        with torch.no_grad():
            xt = torch.from_numpy(xs).to(self.model.dtype)
            out = self.model(xt, torch.full((xs.shape[0],), int(t), dtype=torch.int64))
        return out.double().numpy()

    def __call__(self, x: np.ndarray, t: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self._run(x[None], t)[0]

    def epsilon_batch(self, xs: np.ndarray, t: int) -> np.ndarray:
        return self._run(np.asarray(xs, dtype=np.float64), t)


def denoise(model: PVDenoiser, xt: np.ndarray, t: int) -> np.ndarray:
    """Single-cloud convenience wrapper: eps_hat for one (N, 3) cloud."""
    return DenoiserWrap(model)(xt, t)
