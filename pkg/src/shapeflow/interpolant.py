"""Conditional stochastic interpolant between shape distributions.

The drift of the SDE ``dI_t = b(I_t, c) dt + sigma_t dW_t`` is learned by
regressing onto the registration-flow velocity evaluated along the flow
(plus scheduled noise), conditioned on a centerline encoding.  Training
draws one uniform time and one Gaussian noise field per shape per epoch;
generation integrates the SDE with Euler-Maruyama and averages endpoint
clouds over samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .autodiff import Adam, Tensor, concat
from .geometry import knn_graph
from .io import load_json, save_json
from .meshes import CenterlineEncoding
from .nets import MLP
from .registration import TimeFlow, RegistrationResult, flow_forward, step_velocity

__all__ = [
    "SigmaSchedule",
    "sigma",
    "DriftNetConfig",
    "DriftNet",
    "TrainingConfig",
    "conditional_drift_target",
    "train",
    "finetune",
    "sample",
    "perturb_condition",
    "convex_blend",
    "save_driftnet",
    "load_driftnet",
]


# --- noise schedule -----------------------------------------------------------

@dataclass(frozen=True)
class SigmaSchedule:
    """Diffusion coefficient schedule.

    ``karras`` mode interpolates between ``sigma_max`` at t=0 and
    ``sigma_min`` at t=1 with exponent ``rho``; ``bridge`` mode is the
    Brownian-bridge profile ``sigma * sqrt(t (1 - t))``, which vanishes at
    both endpoints (the linear-interpolant coefficients are
    ``alpha(t) = 1 - t`` and ``beta(t) = t``).
    """

    mode: str = "karras"
    sigma_max: float = 0.002
    sigma_min: float = 0.001
    rho: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.mode not in ("karras", "bridge"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.sigma_max < 0 or self.sigma_min < 0 or self.rho <= 0:
            raise ValueError("sigma_max, sigma_min must be >= 0 and rho > 0")

    def alpha(self, t: float) -> float:
        return 1.0 - t

    def beta(self, t: float) -> float:
        return t

    def __call__(self, t: float) -> float:
        return sigma(self, t)


def sigma(schedule: SigmaSchedule, t: float) -> float:
    """Evaluate the schedule at ``t`` in [0, 1]."""
    t = float(t)
    if t < 0.0 or t > 1.0:
        raise ValueError("time must lie in [0, 1]")
    if schedule.mode == "bridge":
        return schedule.sigma * np.sqrt(t * (1.0 - t))
    inv_rho = 1.0 / schedule.rho
    base = schedule.sigma_max ** inv_rho + t * (
        schedule.sigma_min ** inv_rho - schedule.sigma_max ** inv_rho
    )
    return float(base ** schedule.rho)


# --- drift network -------------------------------------------------------------

@dataclass
class DriftNetConfig:
    n_cntrl: int = 3
    n_fourier: int = 8
    head_hidden: int = 128
    trunk_hidden: tuple = (64, 64)
    message_passing_rounds: int = 0
    k_neighbors: int = 12
    d_cond: int = 0   # 0 -> 4 * n_cntrl
    d_time: int = 0   # 0 -> d_cond

    def __post_init__(self):
        if self.d_cond == 0:
            self.d_cond = 4 * self.n_cntrl
        if self.d_time == 0:
            self.d_time = self.d_cond
        if self.d_time % 2:
            raise ValueError("time encoding dimension must be even")
        if self.n_fourier < 1:
            raise ValueError("need at least one position frequency")


class DriftNet:
    """Conditional drift ``b(x, t, c)`` over a fixed template node set.

    Node features concatenate a position Fourier embedding
    ``[cos(v (x) x), sin(v (x) x)]`` with frequencies ``v = 1, 2, ...,
    2^(n_fourier - 1)`` on box-normalized coordinates, a sinusoidal time
    encoding with frequencies ``omega_i = exp(-ln(10000) 2i / d)`` passed
    through a one-hidden-layer head (relu hidden, tanh output), and the
    flattened centerline conditioning passed through a head of the same
    shape.  The per-node trunk maps the concatenation to a 3-vector;
    optional rounds of k-nearest-neighbor mean-aggregation message passing
    (graph fixed on the template) can be inserted before the output layer.
    """

    def __init__(self, config: DriftNetConfig, template_points, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        pts = np.asarray(template_points, dtype=float)
        self.box_lo = pts.min(axis=0)
        self.box_hi = pts.max(axis=0)
        self.freqs = 2.0 ** np.arange(config.n_fourier)
        d = config.d_time
        i = np.arange(d // 2)
        self.omegas = np.exp(-np.log(10000.0) * 2.0 * i / d)
        width = 3 * config.n_fourier * 2
        self.width = width
        self.time_head = MLP((d, config.head_hidden, width),
                             activation="relu", out_activation="tanh", rng=rng)
        self.cond_head = MLP((config.d_cond, config.head_hidden, width),
                             activation="relu", out_activation="tanh", rng=rng)
        hidden = tuple(config.trunk_hidden)
        self.pre = MLP((3 * width, *hidden), activation="tanh",
                       out_activation="tanh", rng=rng)
        h = hidden[-1]
        self.rounds = [
            MLP((2 * h, h), activation="tanh", out_activation="tanh", rng=rng)
            for _ in range(config.message_passing_rounds)
        ]
        self.out = MLP((h, 3), activation="tanh", out_activation="linear",
                       rng=rng)
        if config.message_passing_rounds > 0:
            self.adjacency = knn_graph(pts, config.k_neighbors)
        else:
            self.adjacency = None

    @property
    def parameters(self):
        nets = [self.time_head, self.cond_head, self.pre, *self.rounds, self.out]
        return [p for net in nets for p in net.parameters]

    @property
    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters)

    def _condition_vector(self, condition) -> np.ndarray:
        if isinstance(condition, CenterlineEncoding):
            if condition.n_cntrl != self.config.n_cntrl:
                raise ValueError(
                    f"condition has {condition.n_cntrl} control points, "
                    f"network expects {self.config.n_cntrl}"
                )
            vec = condition.flatten()
        else:
            vec = np.asarray(condition, dtype=float).ravel()
        d = self.config.d_cond
        if len(vec) < d:
            vec = np.concatenate([vec, np.zeros(d - len(vec))])
        return vec[:d]

    def _position_features(self, points: Tensor) -> Tensor:
        scale = np.where(self.box_hi > self.box_lo,
                         self.box_hi - self.box_lo, 1.0)
        norm = (points - self.box_lo) * (1.0 / scale)  # (n, 3)
        n = norm.shape[0]
        ang = norm.reshape(n, 3, 1) * self.freqs.reshape(1, 1, -1)
        ang = ang.reshape(n, 3 * len(self.freqs))
        return concat([ang.cos(), ang.sin()], axis=1)

    def _time_embedding(self, t: float) -> Tensor:
        enc = np.empty(self.config.d_time)
        enc[0::2] = np.sin(self.omegas * t)
        enc[1::2] = np.cos(self.omegas * t)
        return self.time_head(enc.reshape(1, -1))

    def forward(self, points, t: float, condition) -> Tensor:
        """Drift at the given node positions; returns a tape node (n, 3)."""
        pts = points if isinstance(points, Tensor) else Tensor(
            np.atleast_2d(np.asarray(points, dtype=float)))
        n = pts.shape[0]
        pos = self._position_features(pts)
        temb = self._time_embedding(t)            # (1, width)
        cemb = self.cond_head(
            self._condition_vector(condition).reshape(1, -1))
        ones = Tensor(np.ones((n, 1)))
        feats = concat([pos, ones @ temb, ones @ cemb], axis=1)
        h = self.pre(feats)
        if self.rounds:
            if self.adjacency is None or len(self.adjacency) != n:
                raise ValueError(
                    "message passing requires evaluation on the template node set"
                )
            for net in self.rounds:
                h = net(concat([h, h.neighbor_mean(self.adjacency)], axis=1))
        return self.out(h)

    def __call__(self, points, t, condition) -> np.ndarray:
        return self.forward(points, t, condition).data

    # -- serialization --
    def state(self) -> dict:
        return {
            "config": {
                "n_cntrl": self.config.n_cntrl,
                "n_fourier": self.config.n_fourier,
                "head_hidden": self.config.head_hidden,
                "trunk_hidden": list(self.config.trunk_hidden),
                "message_passing_rounds": self.config.message_passing_rounds,
                "k_neighbors": self.config.k_neighbors,
                "d_cond": self.config.d_cond,
                "d_time": self.config.d_time,
            },
            "box_lo": self.box_lo.tolist(),
            "box_hi": self.box_hi.tolist(),
            "adjacency": None if self.adjacency is None
            else self.adjacency.tolist(),
            "time_head": self.time_head.state(),
            "cond_head": self.cond_head.state(),
            "pre": self.pre.state(),
            "rounds": [r.state() for r in self.rounds],
            "out": self.out.state(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "DriftNet":
        cfgd = dict(state["config"])
        cfgd["trunk_hidden"] = tuple(cfgd["trunk_hidden"])
        config = DriftNetConfig(**cfgd)
        net = cls.__new__(cls)
        net.config = config
        net.box_lo = np.asarray(state["box_lo"], dtype=float)
        net.box_hi = np.asarray(state["box_hi"], dtype=float)
        net.freqs = 2.0 ** np.arange(config.n_fourier)
        d = config.d_time
        i = np.arange(d // 2)
        net.omegas = np.exp(-np.log(10000.0) * 2.0 * i / d)
        net.width = 3 * config.n_fourier * 2
        net.time_head = MLP.from_state(state["time_head"])
        net.cond_head = MLP.from_state(state["cond_head"])
        net.pre = MLP.from_state(state["pre"])
        net.rounds = [MLP.from_state(s) for s in state["rounds"]]
        net.out = MLP.from_state(state["out"])
        net.adjacency = (None if state["adjacency"] is None
                         else np.asarray(state["adjacency"], dtype=np.int64))
        return net


# --- training -------------------------------------------------------------------

@dataclass
class TrainingConfig:
    epochs: int = 2750
    batch_size: int = 4
    lr: float = 1e-4
    plateau_patience: int = 100
    plateau_decay: float = 0.5
    finetune_epochs: int = 1750
    seed: int = 0
    schedule: SigmaSchedule = dataclass_field(default_factory=SigmaSchedule)

    def __post_init__(self):
        # lr == 0 is allowed so that a frozen fine-tune pass is expressible
        if min(self.epochs, self.batch_size, self.plateau_patience) < 1 \
                or self.lr < 0 or self.finetune_epochs < 0:
            raise ValueError("training configuration values must be positive")
        if not 0.0 < self.plateau_decay < 1.0:
            raise ValueError("plateau decay factor must lie in (0, 1)")


def conditional_drift_target(flow: TimeFlow, template_points, t: float,
                             noise, schedule: SigmaSchedule):
    """Regression target for the drift: flow velocity plus scheduled noise.

    Returns ``(target, intermediate)`` where ``intermediate`` is the flowed
    template point set at time ``t`` and ``target`` is the step velocity at
    those positions plus ``sigma(t)`` times the supplied standard-normal
    noise.
    """
    pts = np.atleast_2d(np.asarray(template_points, dtype=float))
    intermediate = flow_forward(flow, pts, t)
    velocity = step_velocity(flow, intermediate, t)
    target = velocity + sigma(schedule, t) * np.asarray(noise, dtype=float)
    return target, intermediate


def _resolve_flow(entry) -> tuple:
    flow, cond = entry
    if isinstance(flow, RegistrationResult):
        flow = flow.flow
    return flow, cond


def _training_loop(pairs, template_points, net: DriftNet, cfg: TrainingConfig,
                   epochs: int, rng) -> list:
    pts = np.atleast_2d(np.asarray(template_points, dtype=float))
    n_pairs = len(pairs)
    opt = Adam(net.parameters, lr=cfg.lr)
    best = np.inf
    since_best = 0
    trace = []
    for epoch in range(epochs):
        batch = rng.choice(n_pairs, size=min(cfg.batch_size, n_pairs),
                           replace=False)
        opt.zero_grad()
        total = None
        for i in batch:
            flow, cond = _resolve_flow(pairs[i])
            t = float(rng.uniform())
            eps = rng.standard_normal(pts.shape)
            target, intermediate = conditional_drift_target(
                flow, pts, t, eps, cfg.schedule)
            diff = net.forward(intermediate, t, cond) - target
            term = (diff * diff).sum()
            total = term if total is None else total + term
        loss = total * (1.0 / len(batch))
        value = loss.item()
        if not np.isfinite(value):
            raise RuntimeError(f"non-finite training loss at epoch {epoch}")
        loss.backward()
        opt.step()
        trace.append(value)
        if value < best:
            best = value
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.plateau_patience:
                opt.lr *= cfg.plateau_decay
                since_best = 0
    return trace


def train(pairs, template_points, net: DriftNet, cfg: TrainingConfig):
    """Minimize the batch interpolant loss over registered shape pairs.

    ``pairs`` is a list of ``(RegistrationResult | TimeFlow,
    CenterlineEncoding)``; every flow must originate from the template whose
    node set ``template_points`` is trained on.  One uniform time and one
    noise draw are taken per shape per epoch.  Returns ``(net, trace)``.
    """
    if not pairs:
        raise ValueError("training needs at least one registered pair")
    rng = np.random.default_rng(cfg.seed)
    trace = _training_loop(pairs, template_points, net, cfg, cfg.epochs, rng)
    return net, trace


def finetune(net: DriftNet, pairs_subset, cfg: TrainingConfig,
             template_points):
    """Continue training on a subset, starting from the current weights."""
    if cfg.finetune_epochs == 0:
        return net, []
    rng = np.random.default_rng(cfg.seed + 1)
    trace = _training_loop(pairs_subset, template_points, net, cfg,
                           cfg.finetune_epochs, rng)
    return net, trace


# --- sampling --------------------------------------------------------------------

def sample(net: DriftNet, template_points, condition, n_samples: int,
           time_grid, schedule: SigmaSchedule, seed: int = 0,
           noise_length_scale: float = 0.0):
    """Euler-Maruyama generation; returns ``(mean_endpoint, endpoints)``.

    Integrates ``I_{k+1} = I_k + b dt + sigma(t_k) sqrt(dt) xi`` per sample
    from the template configuration and averages the endpoint clouds (the
    Monte Carlo estimate of the expected generated shape).  By default the
    per-node noise is independent standard normal; a positive
    ``noise_length_scale`` correlates it across template nodes with a
    squared-exponential kernel (the trace-class covariance case), each
    spatial component drawn independently.
    """
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0 \
            or np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must increase strictly from 0 to 1")
    pts = np.atleast_2d(np.asarray(template_points, dtype=float))
    rng = np.random.default_rng(seed)
    chol = None
    if noise_length_scale > 0.0:
        diff = pts[:, None, :] - pts[None, :, :]
        cov = np.exp(-np.sum(diff * diff, axis=2)
                     / (2.0 * noise_length_scale ** 2))
        cov[np.diag_indices_from(cov)] += 1e-10
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "noise covariance not positive definite after jitter") from exc
    endpoints = np.empty((n_samples,) + pts.shape)
    for s in range(n_samples):
        state = pts.copy()
        for k in range(len(grid) - 1):
            dt = grid[k + 1] - grid[k]
            drift = net(state, float(grid[k]), condition)
            sig = sigma(schedule, float(grid[k]))
            state = state + drift * dt
            if sig > 0.0:
                xi = rng.standard_normal(pts.shape)
                if chol is not None:
                    xi = chol @ xi
                state = state + sig * np.sqrt(dt) * xi
        endpoints[s] = state
    return endpoints.mean(axis=0), endpoints


# --- condition manipulation --------------------------------------------------------

def perturb_condition(c: CenterlineEncoding, alpha_r: float,
                      gaussian_field=None) -> CenterlineEncoding:
    """Scale the radii and optionally displace the control points.

    ``gaussian_field = (length_scale, amplitude, seed)`` draws the
    displacement from a zero-mean Gaussian field with squared-exponential
    covariance ``a^2 exp(-|p_i - p_j|^2 / (2 l^2))`` evaluated on the
    control points (Cholesky with 1e-10 jitter; the three displacement
    components are independent draws).
    """
    if alpha_r <= 0:
        raise ValueError("radius factor must be positive")
    points = c.points
    if gaussian_field is not None:
        length, amplitude, seed = gaussian_field
        if amplitude != 0.0:
            if length <= 0:
                raise ValueError("length scale must be positive")
            diff = points[:, None, :] - points[None, :, :]
            d2 = np.sum(diff * diff, axis=2)
            cov = amplitude ** 2 * np.exp(-d2 / (2.0 * length ** 2))
            cov[np.diag_indices_from(cov)] += 1e-10
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    "covariance not positive definite after jitter") from exc
            z = np.random.default_rng(seed).standard_normal((len(points), 3))
            points = points + chol @ z
    return CenterlineEncoding(points, c.radii * alpha_r)


def convex_blend(conditions, weights) -> CenterlineEncoding:
    """Elementwise convex combination of centerline encodings."""
    w = np.asarray(weights, dtype=float).ravel()
    if len(w) != len(conditions) or len(conditions) == 0:
        raise ValueError("need one weight per condition")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    n = conditions[0].n_cntrl
    if any(c.n_cntrl != n for c in conditions):
        raise ValueError("conditions must share the same number of control points")
    points = sum(wi * c.points for wi, c in zip(w, conditions))
    radii = sum(wi * c.radii for wi, c in zip(w, conditions))
    return CenterlineEncoding(points, radii)


# --- checkpoints ---------------------------------------------------------------------

def save_driftnet(path, net: DriftNet, seed: int = 0, loss_trace=None) -> None:
    payload = {"schema": "driftnet-v1", "seed": seed,
               "loss_trace": list(map(float, loss_trace or []))}
    payload.update(net.state())
    save_json(path, payload)


def load_driftnet(path):
    payload = load_json(path, "driftnet-v1")
    net = DriftNet.from_state(payload)
    return net, payload.get("seed", 0), payload.get("loss_trace", [])
