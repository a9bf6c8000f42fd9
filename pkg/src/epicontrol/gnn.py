"""Bipartite individual-area message passing with actor and critic heads.

Individuals and areas are the two node sets; each layer turns one day of the
visit history into edge weights (a masked per-individual softmax over the
areas visited that day), pools visitor features into area features, and
pools visited-area features back into individual features.  The factoring
through areas means no individual-by-individual matrix is ever materialized.

Forward passes cache every intermediate needed for the exact analytic
backward pass; gradients are verified against central finite differences in
the test suite.  A per-individual two-layer perceptron trunk (no message
passing) is available for ablation runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, NumericError
from .risk import RiskVector
from .world import HOURS_PER_DAY, Observation

N_ACTIONS = 4
N_VISIBLE_HEALTH = 3
NODE_FEATURE_DIM = N_VISIBLE_HEALTH + N_ACTIONS + 1  # health one-hot, action one-hot, p_infe

TRUNK_GNN = "gnn"
TRUNK_MLP = "mlp"


@dataclass(frozen=True)
class GnnConfig:
    k_layers: int = 3
    d_hidden: int = 32
    d_in: int = NODE_FEATURE_DIM
    shared_weights: bool = False
    trunk: str = TRUNK_GNN

    def validate(self) -> None:
        if self.k_layers < 1:
            raise ConfigurationError(f"k_layers must be >= 1 (got {self.k_layers})")
        if self.d_hidden < 1:
            raise ConfigurationError(f"d_hidden must be >= 1 (got {self.d_hidden})")
        if self.trunk not in (TRUNK_GNN, TRUNK_MLP):
            raise ConfigurationError(f"unknown trunk {self.trunk!r}")
        if self.shared_weights and self.trunk != TRUNK_GNN:
            raise ConfigurationError("shared_weights only applies to the gnn trunk")


@dataclass(frozen=True)
class StateFeatures:
    """Per-individual node features plus one visit-history slice per layer."""

    node_features: np.ndarray  # M x d_in
    visit_slices: list  # k_layers arrays of M x N raw hour counts

    @property
    def population(self) -> int:
        return self.node_features.shape[0]


def build_state_features(
    obs: Observation, risk: RiskVector, k_layers: int
) -> StateFeatures:
    m = obs.population
    feats = np.zeros((m, NODE_FEATURE_DIM), dtype=np.float64)
    feats[np.arange(m), obs.visible_health] = 1.0
    feats[np.arange(m), N_VISIBLE_HEALTH + obs.current_action] = 1.0
    feats[:, N_VISIBLE_HEALTH + N_ACTIONS] = risk.p_infe
    slices = [np.asarray(s, dtype=np.float64) for s in obs.visit_slices(k_layers)]
    return StateFeatures(node_features=feats, visit_slices=slices)


def _layer_param_names(cfg: GnnConfig) -> list:
    """(area_w, area_b, ind_w, ind_b) names per layer; shared mode chains the
    individual step of layer k with the area step of layer k+1."""
    names = []
    for k in range(1, cfg.k_layers + 1):
        if cfg.shared_weights:
            names.append((f"w{k - 1}", f"b{k - 1}", f"w{k}", f"b{k}"))
        else:
            names.append((f"area_w{k}", f"area_b{k}", f"ind_w{k}", f"ind_b{k}"))
    return names


def init_params(cfg: GnnConfig, seed: int) -> dict:
    """Uniform init scaled by 1/sqrt(fan_in); deterministic per seed."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    params: dict = {}

    def add(name, shape, fan_in):
        if name in params:
            return
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        params[name] = rng.uniform(-bound, bound, size=shape)

    if cfg.trunk == TRUNK_MLP:
        add("mlp_w1", (cfg.d_in, cfg.d_hidden), cfg.d_in)
        add("mlp_b1", (cfg.d_hidden,), cfg.d_in)
        add("mlp_w2", (cfg.d_hidden, cfg.d_hidden), cfg.d_hidden)
        add("mlp_b2", (cfg.d_hidden,), cfg.d_hidden)
    else:
        for k, (wa, ba, wi, bi) in enumerate(_layer_param_names(cfg), start=1):
            d_prev = cfg.d_in if k == 1 else cfg.d_hidden
            add(wa, (d_prev, cfg.d_hidden), d_prev)
            add(ba, (cfg.d_hidden,), d_prev)
            add(wi, (cfg.d_hidden, cfg.d_hidden), cfg.d_hidden)
            add(bi, (cfg.d_hidden,), cfg.d_hidden)
    add("actor_w", (cfg.d_hidden, N_ACTIONS), cfg.d_hidden)
    add("actor_b", (N_ACTIONS,), cfg.d_hidden)
    add("critic_w", (cfg.d_hidden, 1), cfg.d_hidden)
    add("critic_b", (1,), cfg.d_hidden)
    return params


def zeros_like_params(params: dict) -> dict:
    return {name: np.zeros_like(arr) for name, arr in params.items()}


def _masked_row_softmax(weights: np.ndarray) -> np.ndarray:
    """Row softmax over strictly-positive entries; zero rows stay all-zero."""
    mask = weights > 0
    shifted = np.where(mask, weights, -np.inf)
    row_max = shifted.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    expd = np.where(mask, np.exp(shifted - row_max), 0.0)
    denom = expd.sum(axis=1, keepdims=True)
    return np.divide(expd, denom, out=np.zeros_like(expd), where=denom > 0)


@dataclass
class ForwardCache:
    cfg: GnnConfig
    population: int
    node_features: np.ndarray
    layers: list = field(default_factory=list)  # per-layer dict of intermediates
    embeddings: np.ndarray = None
    pooled: np.ndarray = None
    actor_out: np.ndarray = None
    value: float = 0.0


def _check_features(cfg: GnnConfig, feats: StateFeatures) -> None:
    if feats.node_features.ndim != 2 or feats.node_features.shape[1] != cfg.d_in:
        raise ContractError(
            f"node features must be M x {cfg.d_in}, got {feats.node_features.shape}"
        )
    if cfg.trunk == TRUNK_GNN:
        if len(feats.visit_slices) < cfg.k_layers:
            raise ContractError(
                f"need {cfg.k_layers} visit slices, got {len(feats.visit_slices)}"
            )
        m = feats.node_features.shape[0]
        for s in feats.visit_slices[: cfg.k_layers]:
            if s.shape[0] != m:
                raise ContractError("visit slice row count differs from population")
            if np.any(np.asarray(s) < 0):
                raise ContractError("visit slices must be non-negative")
    if not np.all(np.isfinite(feats.node_features)):
        raise NumericError("non-finite node features")


def gnn_forward(cfg: GnnConfig, params: dict, feats: StateFeatures) -> ForwardCache:
    """Run the trunk; returns final per-individual embeddings plus cached
    intermediates for the backward pass."""
    cfg.validate()
    _check_features(cfg, feats)
    cache = ForwardCache(cfg=cfg, population=feats.population, node_features=feats.node_features)
    h = feats.node_features

    if cfg.trunk == TRUNK_MLP:
        pre1 = h @ params["mlp_w1"] + params["mlp_b1"]
        act1 = np.maximum(pre1, 0.0)
        pre2 = act1 @ params["mlp_w2"] + params["mlp_b2"]
        act2 = np.maximum(pre2, 0.0)
        cache.layers.append({"h_in": h, "pre1": pre1, "act1": act1, "pre2": pre2})
        cache.embeddings = act2
        return cache

    for k, (wa, ba, wi, bi) in enumerate(_layer_param_names(cfg)):
        raw = np.asarray(feats.visit_slices[k], dtype=np.float64) / HOURS_PER_DAY
        edge = _masked_row_softmax(raw)  # M x N, rows sum to 1 or are zero
        col_mass = edge.sum(axis=0)
        edge_norm = np.divide(
            edge, col_mass[None, :], out=np.zeros_like(edge), where=col_mass > 0
        )  # visitor-weighted mean so duplicated individuals do not inflate areas
        gathered = edge_norm.T @ h  # N x d
        area_pre = gathered @ params[wa] + params[ba]
        area_act = np.maximum(area_pre, 0.0)
        spread = edge @ area_act  # M x d_hidden
        ind_pre = spread @ params[wi] + params[bi]
        h_next = np.maximum(ind_pre, 0.0)
        cache.layers.append(
            {
                "h_in": h,
                "edge": edge,
                "edge_norm": edge_norm,
                "gathered": gathered,
                "area_pre": area_pre,
                "area_act": area_act,
                "spread": spread,
                "ind_pre": ind_pre,
                "names": (wa, ba, wi, bi),
            }
        )
        h = h_next
    cache.embeddings = h
    return cache


def heads_forward(cfg: GnnConfig, params: dict, cache: ForwardCache) -> ForwardCache:
    cache.actor_out = cache.embeddings @ params["actor_w"] + params["actor_b"]
    cache.pooled = cache.embeddings.mean(axis=0)
    cache.value = float((cache.pooled @ params["critic_w"])[0] + params["critic_b"][0])
    if not np.all(np.isfinite(cache.actor_out)) or not np.isfinite(cache.value):
        raise NumericError("non-finite head output")
    return cache


def forward(cfg: GnnConfig, params: dict, feats: StateFeatures) -> ForwardCache:
    """Trunk plus both heads in one pass."""
    return heads_forward(cfg, params, gnn_forward(cfg, params, feats))


def actor_forward(cfg: GnnConfig, params: dict, feats: StateFeatures) -> np.ndarray:
    """Per-individual raw 4-vectors feeding the threshold constraint."""
    return forward(cfg, params, feats).actor_out


def critic_forward(cfg: GnnConfig, params: dict, feats: StateFeatures) -> float:
    """Scalar value estimate: mean-pooled embeddings through the critic head."""
    return forward(cfg, params, feats).value


def backward(
    cfg: GnnConfig,
    params: dict,
    cache: ForwardCache,
    d_actor: np.ndarray,
    d_value: float,
    grads: dict = None,
) -> dict:
    """Exact gradients of (d_actor . actor_out + d_value * value) w.r.t. every
    parameter, accumulated into ``grads`` if given.

    Visit slices enter as data only; no gradient flows into them.
    """
    if cache.actor_out is None:
        raise ContractError("cache missing head outputs; run forward() first")
    d_actor = np.asarray(d_actor, dtype=np.float64)
    if d_actor.shape != cache.actor_out.shape:
        raise ContractError(
            f"upstream actor grad shape {d_actor.shape} != {cache.actor_out.shape}"
        )
    if grads is None:
        grads = zeros_like_params(params)

    m = cache.population
    emb = cache.embeddings
    grads["actor_w"] += emb.T @ d_actor
    grads["actor_b"] += d_actor.sum(axis=0)
    d_emb = d_actor @ params["actor_w"].T

    grads["critic_w"] += d_value * cache.pooled[:, None]
    grads["critic_b"] += np.array([d_value])
    d_emb += (d_value / m) * np.broadcast_to(
        params["critic_w"][:, 0], (m, cfg.d_hidden)
    )

    if cfg.trunk == TRUNK_MLP:
        lay = cache.layers[0]
        d_pre2 = d_emb * (lay["pre2"] > 0)
        grads["mlp_w2"] += lay["act1"].T @ d_pre2
        grads["mlp_b2"] += d_pre2.sum(axis=0)
        d_act1 = d_pre2 @ params["mlp_w2"].T
        d_pre1 = d_act1 * (lay["pre1"] > 0)
        grads["mlp_w1"] += lay["h_in"].T @ d_pre1
        grads["mlp_b1"] += d_pre1.sum(axis=0)
        return grads

    d_h = d_emb
    for lay in reversed(cache.layers):
        wa, ba, wi, bi = lay["names"]
        d_ind_pre = d_h * (lay["ind_pre"] > 0)
        grads[wi] += lay["spread"].T @ d_ind_pre
        grads[bi] += d_ind_pre.sum(axis=0)
        d_area_act = lay["edge"].T @ (d_ind_pre @ params[wi].T)
        d_area_pre = d_area_act * (lay["area_pre"] > 0)
        grads[wa] += lay["gathered"].T @ d_area_pre
        grads[ba] += d_area_pre.sum(axis=0)
        d_h = lay["edge_norm"] @ (d_area_pre @ params[wa].T)
    return grads
