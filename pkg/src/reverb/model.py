"""The forecasting network: linear base plus two learned delta branches.

Prediction is a superposition of three decoupled parts computed in the
ego-centered frame:

    Y_hat = Y_lin + dY_non + dY_soc

``Y_lin`` extrapolates a least-squares line through the observed steps.
Each delta branch encodes the observation into per-row features, infers
a latency kernel pair (R, G) from them, applies the reverberation
transform to the features' sequential similarity, decodes the result to
spectrum coefficients, and maps those back to trajectory space with the
exact inverse-transform matrix.  The non-interactive branch works on
the ego's own history (rows = T_h spectrum rows); the social branch
works on angle-partitioned neighbor features (rows = N_theta * T_h,
bucket-major).

Branch and kernel toggles reproduce the ablation grid.  A disabled
branch contributes an exact zero delta (shapes stay fixed, and no
gradient flows into its parameters).  A disabled R kernel becomes a
fixed uniform matrix with entries 1/rows; a disabled G kernel becomes a
static trainable tanh-bounded matrix, one independent column per
generation.  The static-G variant is an approximation of the
per-channel strategy it stands in for, and is documented as such.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import transforms
from .data import Sample, preprocess
from .errors import ConfigError, ShapeError
from .kernels import ReverbKernelPair
from .linear import linear_fit
from .nn import tensor as T
from .nn.layers import MLP, Dense, ParameterStore
from .nn.transformer import EncoderDecoder
from .social import SocialEncoder

_SQRT_EPS = 1e-12


@dataclass
class ModelConfig:
    """Shape and wiring choices; ``validate`` raises ConfigError early."""

    t_h: int = 8
    t_f: int = 12
    m: int = 2
    dt: float = 0.4
    transform: str = "haar"
    d: int = 128
    k_g: int = 20
    n_theta: int = 8
    tf_layers: int = 2
    tf_heads: int = 8
    noise_dim: int | None = None
    use_linear: bool = True
    use_non: bool = True
    use_soc: bool = True
    kernel_r: bool = True
    kernel_g: bool = True
    per_step_partitions: bool = False

    def validate(self) -> "ModelConfig":
        transforms.check_kind(self.transform)
        if self.t_h < 2 or self.t_f < 1:
            raise ConfigError(f"need t_h >= 2 and t_f >= 1, got {self.t_h}, {self.t_f}")
        if self.transform != "none":
            if self.t_h % 2 or self.t_f % 2:
                raise ConfigError(
                    f"transform {self.transform!r} needs even horizons, "
                    f"got t_h={self.t_h}, t_f={self.t_f}"
                )
        if self.m < 1:
            raise ConfigError("need at least one coordinate dimension")
        if self.k_g < 1:
            raise ConfigError(f"need k_g >= 1, got {self.k_g}")
        if self.n_theta < 1:
            raise ConfigError(f"need n_theta >= 1, got {self.n_theta}")
        if self.d < 2:
            raise ConfigError(f"feature dim too small: {self.d}")
        if self.d % self.tf_heads:
            raise ConfigError(f"d={self.d} not divisible by heads={self.tf_heads}")
        if self.z_dim < 1:
            raise ConfigError("noise dimension must be >= 1")
        if not (self.use_linear or self.use_non or self.use_soc):
            raise ConfigError("all three prediction parts are disabled")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        return self

    @property
    def z_dim(self) -> int:
        return self.d // 2 if self.noise_dim is None else self.noise_dim

    @property
    def hist_rows(self) -> int:
        return transforms.spectrum_shape(self.transform, self.t_h, self.m)[0]

    @property
    def fut_rows(self) -> int:
        return transforms.spectrum_shape(self.transform, self.t_f, self.m)[0]

    @property
    def cols(self) -> int:
        return transforms.spectrum_shape(self.transform, self.t_h, self.m)[1]

    @property
    def soc_rows(self) -> int:
        return self.n_theta * self.hist_rows


@dataclass
class EncodedBatch:
    """Numpy-side encoding of a list of preprocessed samples.

    Social fields index into ``own_spec`` (one row block per agent,
    egos first within each sample) and are empty arrays when the batch
    has no neighbors.
    """

    samples: list
    spec_x: np.ndarray
    spec_lin: np.ndarray
    spec_res: np.ndarray
    y_lin: np.ndarray
    gt: np.ndarray
    offsets: np.ndarray
    own_spec: np.ndarray | None = None
    own_sample: np.ndarray | None = None
    pair_ego: np.ndarray | None = None
    pair_nbr: np.ndarray | None = None
    pair_sample: np.ndarray | None = None
    pair_rows: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.spec_x.shape[0]

    def subset(self, indices) -> "EncodedBatch":
        idx = np.asarray(indices, dtype=np.int64)
        out = EncodedBatch(
            samples=[self.samples[i] for i in idx],
            spec_x=self.spec_x[idx],
            spec_lin=self.spec_lin[idx],
            spec_res=self.spec_res[idx],
            y_lin=self.y_lin[idx],
            gt=self.gt[idx],
            offsets=self.offsets[idx],
        )
        if self.own_spec is None:
            return out
        new_pos = -np.ones(self.size, dtype=np.int64)
        new_pos[idx] = np.arange(len(idx))
        own_keep = np.flatnonzero(new_pos[self.own_sample] >= 0)
        row_map = -np.ones(self.own_spec.shape[0], dtype=np.int64)
        row_map[own_keep] = np.arange(len(own_keep))
        pair_keep = np.flatnonzero(new_pos[self.pair_sample] >= 0)
        out.own_spec = self.own_spec[own_keep]
        out.own_sample = new_pos[self.own_sample[own_keep]]
        out.pair_ego = row_map[self.pair_ego[pair_keep]]
        out.pair_nbr = row_map[self.pair_nbr[pair_keep]]
        out.pair_sample = new_pos[self.pair_sample[pair_keep]]
        out.pair_rows = self.pair_rows[pair_keep]
        return out


@dataclass
class PredictionBatch:
    """Per-ego output: K_g world-frame hypotheses plus the kernels used."""

    values: np.ndarray
    y_lin: np.ndarray
    kernels_non: ReverbKernelPair | None
    kernels_soc: ReverbKernelPair | None
    scene_id: str
    agent_id: str
    start_frame: float


def superpose(y_lin: np.ndarray, *deltas: np.ndarray) -> np.ndarray:
    """Broadcast the base over generations and add the deltas."""
    out = np.asarray(y_lin, dtype=np.float64)[None, :, :].copy()
    for d in deltas:
        out = out + np.asarray(d, dtype=np.float64)
    return out


def best_of_k_loss(values: np.ndarray, gt: np.ndarray) -> float:
    """Minimum over generations of the mean per-step distance.

    Ties go to the lowest generation index (argmin convention).
    """
    values = np.asarray(values, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if values.ndim != 3 or values.shape[1:] != gt.shape:
        raise ShapeError(f"shape mismatch: {values.shape} vs {gt.shape}")
    dist = np.linalg.norm(values - gt[None], axis=2).mean(axis=1)
    return float(dist[int(np.argmin(dist))])


class ReverbPredictor:
    """Owns the parameters and the differentiable forward passes."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.store = ParameterStore(seed)
        c = config
        need_e_non = c.use_non or c.use_soc
        if need_e_non:
            self.embed_alpha = MLP(self.store, "enc.alpha", [c.cols, c.d, c.d], "tanh")
            self.embed_beta = MLP(self.store, "enc.beta", [c.cols, c.d, c.d], "tanh")
        if c.use_non:
            self.proj_non = Dense(self.store, "non.proj", c.d + c.z_dim, c.d)
            self.value_non = Dense(self.store, "non.value", c.cols, c.d)
            self.tf_non = EncoderDecoder(
                self.store, "non.tf", c.d, heads=c.tf_heads, layers=c.tf_layers,
                max_len=c.hist_rows,
            )
            self.decode_non = Dense(self.store, "non.decode", c.d, c.cols)
            self._add_kernel_heads("non", c.hist_rows)
        if c.use_soc:
            self.social = SocialEncoder(
                self.store, "soc", c.transform, c.t_h, c.m, c.d, c.n_theta,
                per_step=c.per_step_partitions,
            )
            self.proj_soc = Dense(self.store, "soc.proj", 2 * c.d + c.z_dim, c.d)
            self.value_soc = Dense(self.store, "soc.value", c.cols, c.d)
            self.tf_soc = EncoderDecoder(
                self.store, "soc.tf", c.d, heads=c.tf_heads, layers=c.tf_layers,
                max_len=c.soc_rows,
            )
            self.decode_soc = Dense(self.store, "soc.decode", c.d, c.cols)
            self._add_kernel_heads("soc", c.soc_rows)
        inv = transforms.inverse_matrix(c.transform, c.t_f, c.m)
        self._inv = T.Tensor(np.array(inv))

    def _add_kernel_heads(self, branch: str, rows: int):
        c = self.config
        if c.kernel_r:
            setattr(self, f"head_r_{branch}",
                    Dense(self.store, f"{branch}.head_r", c.d, c.fut_rows))
        if c.kernel_g:
            setattr(self, f"head_g_{branch}",
                    Dense(self.store, f"{branch}.head_g", c.d, c.k_g))
        else:
            setattr(self, f"static_g_{branch}",
                    self.store.add(f"{branch}.static_g", (rows, c.k_g), init="xavier"))

    # ------------------------------------------------------------------
    # Encoding (numpy side)

    def encode(self, samples) -> EncodedBatch:
        c = self.config
        prepped, spec_x, spec_lin, spec_res, y_lin, gt, offsets = [], [], [], [], [], [], []
        own_spec, own_sample, pair_ego, pair_nbr, pair_sample, pair_rows = [], [], [], [], [], []
        for b, raw in enumerate(samples):
            s = preprocess(raw)
            ego = s.ego.values
            if ego.shape != (c.t_h, c.m):
                raise ShapeError(
                    f"sample {b}: ego window {ego.shape}, expected {(c.t_h, c.m)}"
                )
            if s.gt.values.shape != (c.t_f, c.m):
                raise ShapeError(
                    f"sample {b}: gt window {s.gt.values.shape}, expected {(c.t_f, c.m)}"
                )
            fit = linear_fit(ego, c.t_f)
            prepped.append(s)
            spec_x.append(transforms.forward_values(ego, c.transform))
            spec_lin.append(transforms.forward_values(fit.fitted, c.transform))
            spec_res.append(transforms.forward_values(ego - fit.fitted, c.transform))
            y_lin.append(fit.predicted)
            gt.append(s.gt.values)
            offsets.append(s.offset)
            if c.use_soc:
                ego_row = len(own_spec)
                own_spec.append(self.social.own_spectrum(ego))
                own_sample.append(b)
                for nbr in s.neighbors:
                    if nbr.values.shape != (c.t_h, c.m):
                        raise ShapeError(
                            f"sample {b}: neighbor window {nbr.values.shape}, "
                            f"expected {(c.t_h, c.m)}"
                        )
                    pair_ego.append(ego_row)
                    pair_nbr.append(len(own_spec))
                    pair_sample.append(b)
                    pair_rows.append(self.social.row_partitions(ego, nbr.values))
                    own_spec.append(self.social.own_spectrum(nbr.values))
                    own_sample.append(b)
        batch = EncodedBatch(
            samples=prepped,
            spec_x=np.stack(spec_x),
            spec_lin=np.stack(spec_lin),
            spec_res=np.stack(spec_res),
            y_lin=np.stack(y_lin),
            gt=np.stack(gt),
            offsets=np.stack(offsets),
        )
        if c.use_soc:
            batch.own_spec = np.stack(own_spec)
            batch.own_sample = np.array(own_sample, dtype=np.int64)
            batch.pair_ego = np.array(pair_ego, dtype=np.int64)
            batch.pair_nbr = np.array(pair_nbr, dtype=np.int64)
            batch.pair_sample = np.array(pair_sample, dtype=np.int64)
            batch.pair_rows = (
                np.stack(pair_rows) if pair_rows
                else np.zeros((0, c.hist_rows), dtype=np.int64)
            )
        return batch

    def draw_noise(self, rng) -> dict:
        """One z per branch per forward pass; draw order is fixed."""
        z = self.config.z_dim
        return {"non": rng.standard_normal(z), "soc": rng.standard_normal(z)}

    def zero_noise(self) -> dict:
        z = self.config.z_dim
        return {"non": np.zeros(z), "soc": np.zeros(z)}

    # ------------------------------------------------------------------
    # Differentiable forward

    def _e_non(self, batch: EncodedBatch) -> T.Tensor:
        a = self.embed_alpha(T.Tensor(batch.spec_x))
        b = self.embed_beta(T.Tensor(batch.spec_lin))
        return (a - b) * 0.5

    def _tile_noise(self, z: np.ndarray, batch_size: int, rows: int) -> T.Tensor:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.config.z_dim,):
            raise ShapeError(f"noise must be ({self.config.z_dim},), got {z.shape}")
        return T.Tensor(np.broadcast_to(z, (batch_size, rows, z.shape[0])))

    def _kernels(self, branch: str, f: T.Tensor, rows: int):
        c = self.config
        bsz = f.data.shape[0]
        if c.kernel_r:
            r = T.tanh(getattr(self, f"head_r_{branch}")(f))
        else:
            r = T.Tensor(np.broadcast_to(1.0 / rows, (bsz, rows, c.fut_rows)))
        if c.kernel_g:
            g = T.tanh(getattr(self, f"head_g_{branch}")(f))
        else:
            g = T.tanh(getattr(self, f"static_g_{branch}"))
            g = T.reshape(g, (1, rows, c.k_g))
        return r, g

    def _rehearse(self, f: T.Tensor, r: T.Tensor, g: T.Tensor, decode: Dense) -> T.Tensor:
        """similarity -> reverberation transform -> decode -> inverse."""
        c = self.config
        bsz, rows, d = f.data.shape
        sim = T.reshape(f, (bsz, rows, 1, d)) * T.reshape(f, (bsz, 1, rows, d))
        simT = T.transpose(sim, (0, 3, 1, 2))
        r4 = T.reshape(r, (r.data.shape[0], 1, rows, c.fut_rows))
        tmp = T.matmul(simT, r4)
        g3 = T.transpose(g, (0, 2, 1))
        g4 = T.reshape(g3, (g.data.shape[0], 1, c.k_g, rows))
        fld = T.transpose(T.matmul(g4, tmp), (0, 2, 3, 1))
        spec = decode(fld)
        flat = T.reshape(spec, (bsz, c.k_g, c.fut_rows * c.cols))
        seq = T.matmul(flat, self._inv)
        return T.reshape(seq, (bsz, c.k_g, c.t_f, c.m))

    def _branch_non(self, batch: EncodedBatch, e_non: T.Tensor, z: np.ndarray):
        c = self.config
        zt = self._tile_noise(z, batch.size, c.hist_rows)
        qk = self.proj_non(T.concat([e_non, zt], axis=2))
        mem = self.value_non(T.Tensor(batch.spec_res))
        feats = self.tf_non(qk, mem)
        r, g = self._kernels("non", feats, c.hist_rows)
        return self._rehearse(feats, r, g, self.decode_non), r, g

    def _branch_soc(self, batch: EncodedBatch, e_non: T.Tensor, z: np.ndarray):
        c = self.config
        e_soc = self._social_rows(batch)
        tiled = T.concat([e_non] * c.n_theta, axis=1)
        zt = self._tile_noise(z, batch.size, c.soc_rows)
        qk = self.proj_soc(T.concat([tiled, e_soc, zt], axis=2))
        mem = self.value_soc(T.Tensor(batch.spec_res))
        feats = self.tf_soc(qk, mem)
        r, g = self._kernels("soc", feats, c.soc_rows)
        return self._rehearse(feats, r, g, self.decode_soc), r, g

    def _social_rows(self, batch: EncodedBatch) -> T.Tensor:
        """Pooled pair features, (B, N_theta*T_h, d), bucket-major rows."""
        c = self.config
        own = self.social.embed_own(T.Tensor(batch.own_spec))
        e_i = T.index_select(own, batch.pair_ego, axis=0)
        e_j = T.index_select(own, batch.pair_nbr, axis=0)
        pf = self.social.embed_pair(e_i * e_j)
        n_pairs = batch.pair_ego.shape[0]
        flat = T.reshape(pf, (n_pairs * c.hist_rows, c.d))
        t_idx = np.broadcast_to(np.arange(c.hist_rows), (n_pairs, c.hist_rows))
        seg = (batch.pair_sample[:, None] * c.soc_rows
               + batch.pair_rows * c.hist_rows + t_idx).ravel()
        pooled = T.segment_mean(flat, seg, batch.size * c.soc_rows)
        return T.reshape(pooled, (batch.size, c.soc_rows, c.d))

    def forward(self, batch: EncodedBatch, noise: dict):
        """Returns (predictions (B, K_g, t_f, m) in the ego frame, info).

        ``info`` holds the kernel tensors actually used per enabled
        branch (None for disabled branches).
        """
        c = self.config
        parts = []
        if c.use_linear:
            parts.append(T.Tensor(batch.y_lin[:, None, :, :]))
        info = {"r_non": None, "g_non": None, "r_soc": None, "g_soc": None}
        e_non = self._e_non(batch) if (c.use_non or c.use_soc) else None
        if c.use_non:
            delta, r, g = self._branch_non(batch, e_non, noise["non"])
            parts.append(delta)
            info["r_non"], info["g_non"] = r, g
        if c.use_soc:
            delta, r, g = self._branch_soc(batch, e_non, noise["soc"])
            parts.append(delta)
            info["r_soc"], info["g_soc"] = r, g
        pred = parts[0]
        for p in parts[1:]:
            pred = pred + p
        if pred.data.shape[1] == 1 and c.k_g > 1:
            pred = pred + T.Tensor(np.zeros((1, c.k_g, 1, 1)))
        return pred, info

    def loss(self, batch: EncodedBatch, noise: dict):
        """Best-of-K mean per-step distance, averaged over the batch."""
        pred, info = self.forward(batch, noise)
        diff = pred - T.Tensor(batch.gt[:, None, :, :])
        sq = T.sum_(diff * diff, axis=3)
        dist = T.mean_(T.sqrt(sq + _SQRT_EPS), axis=2)
        best = np.argmin(dist.data, axis=1)
        return T.mean_(T.take_per_row(dist, best)), pred, info

    # ------------------------------------------------------------------
    # Inference-facing wrappers

    def predict(self, samples, rng=None, noise: dict | None = None) -> list:
        """World-frame hypotheses per sample; zero noise when rng is None."""
        if noise is None:
            noise = self.draw_noise(rng) if rng is not None else self.zero_noise()
        batch = self.encode(samples)
        with T.no_grad():
            pred, info = self.forward(batch, noise)
        out = []
        for b, s in enumerate(batch.samples):
            values = pred.data[b] + batch.offsets[b][None, None, :]
            out.append(
                PredictionBatch(
                    values=values,
                    y_lin=batch.y_lin[b] + batch.offsets[b][None, :],
                    kernels_non=self._pair(info, "non", b),
                    kernels_soc=self._pair(info, "soc", b),
                    scene_id=s.scene_id,
                    agent_id=s.agent_id,
                    start_frame=s.start_frame,
                )
            )
        return out

    def _pair(self, info: dict, branch: str, b: int):
        r, g = info[f"r_{branch}"], info[f"g_{branch}"]
        if r is None or g is None:
            return None
        r_b = r.data[b] if r.data.shape[0] > 1 else r.data[0]
        g_b = g.data[b] if g.data.shape[0] > 1 else g.data[0]
        return ReverbKernelPair(r=np.array(r_b), g=np.array(g_b))

    def encode_non(self, sample: Sample) -> np.ndarray:
        """Half-difference embedding of one sample, (T_h, d)."""
        batch = self.encode([sample])
        with T.no_grad():
            e = self._e_non(batch)
        return e.data[0]

    def forward_non(self, sample: Sample, noise: dict | None = None):
        """Single-sample non-interactive delta, ((K_g, t_f, m), kernels)."""
        return self._forward_single(sample, noise, "non")

    def forward_soc(self, sample: Sample, noise: dict | None = None):
        """Single-sample social delta, ((K_g, t_f, m), kernels)."""
        return self._forward_single(sample, noise, "soc")

    def _forward_single(self, sample: Sample, noise: dict | None, branch: str):
        if not getattr(self.config, f"use_{branch}"):
            raise ConfigError(f"branch {branch!r} is disabled in this model")
        if noise is None:
            noise = self.zero_noise()
        batch = self.encode([sample])
        with T.no_grad():
            e_non = self._e_non(batch)
            fn = self._branch_non if branch == "non" else self._branch_soc
            delta, r, g = fn(batch, e_non, noise[branch])
        info = {f"r_{branch}": r, f"g_{branch}": g}
        return np.array(delta.data[0]), self._pair(info, branch, 0)
