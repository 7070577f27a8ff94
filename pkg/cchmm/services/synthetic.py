"""Synthetic multimodal traffic scenarios driven by a known causal graph over the five concepts."""

import logging

import numpy as np

from cchmm.models.concepts import CONCEPTS
from cchmm.models.data import DatasetBundle, split_bounds
from cchmm.models.graph import normalize_adjacency
from cchmm.schemas.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

# slopes and offsets of the (inflow, outflow) channels on a flow concept
FLOW_LOADINGS = np.array([[1.0, 0.8], [0.5, 0.2]])
RAIN_START = 0.03
RAIN_STOP = 0.15


def grid_adjacency(config: ScenarioConfig) -> np.ndarray:
    """G_ij = exp(-dist²/σ²) between grid cells, thresholded, with a zero diagonal."""
    cells = np.array([(i // config.grid_cols, i % config.grid_cols) for i in range(config.n_regions)], dtype=float)
    dist2 = ((cells[:, None, :] - cells[None, :, :]) ** 2).sum(axis=-1)
    g = np.exp(-dist2 / config.graph_sigma**2)
    g[g < config.graph_threshold] = 0.0
    np.fill_diagonal(g, 0.0)
    return g


def smoothing_operator(g: np.ndarray) -> np.ndarray:
    """Row-normalized G_hat, so smoothing keeps flows non-negative and on their scale."""
    g_hat = normalize_adjacency(g)
    return g_hat / g_hat.sum(axis=1, keepdims=True)


def time_features(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(config.timesteps)
    day = 2 * np.pi * (t % config.steps_per_day) / config.steps_per_day
    week_len = 7 * config.steps_per_day
    week = 2 * np.pi * (t % week_len) / week_len
    return np.stack([np.sin(day), np.cos(day), np.sin(week), np.cos(week)], axis=-1), day


def weather_series(config: ScenarioConfig, day: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Temperature, humidity and precipitation: AR(1) with occasional rain bursts."""
    steps = config.timesteps
    shocks = rng.standard_normal((steps, 2))
    switches = rng.random(steps)
    intensity = rng.gamma(2.0, 0.5, size=steps)

    weather = np.zeros((steps, 3))
    temperature, humidity, raining = 0.0, 0.0, False
    for t in range(steps):
        raining = switches[t] >= RAIN_STOP if raining else switches[t] < RAIN_START
        precipitation = intensity[t] if raining else 0.0
        temperature = 0.9 * temperature + 0.1 * np.sin(day[t] - np.pi / 2) + 0.1 * shocks[t, 0]
        humidity = 0.95 * humidity + 0.05 * shocks[t, 1] + 0.1 * precipitation
        weather[t] = (temperature, humidity, precipitation)
    return weather


def propagate(innovations: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """h_j = u_j + Σ_i A_ij·h_i in concept order (A strictly upper triangular)."""
    h = np.array(innovations, dtype=float)
    for j in range(weights.shape[0]):
        for i in range(j):
            if weights[i, j] != 0.0:
                h[..., j] += weights[i, j] * h[..., i]
    return h


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def synth_generate(config: ScenarioConfig) -> DatasetBundle:
    rng = np.random.default_rng(config.seed)
    n, steps = config.n_regions, config.timesteps
    weights = np.array(config.causal_weights, dtype=float)

    g = grid_adjacency(config)
    smoother = smoothing_operator(g)

    poi = rng.gamma(2.0, 0.5, size=(n, config.poi_dim)) * (rng.random((n, config.poi_dim)) < 0.4)
    attraction = poi.sum(axis=1)
    attraction = (attraction - attraction.mean()) / max(attraction.std(), 1e-8)
    clock, day = time_features(config)
    weather = weather_series(config, day, rng)
    precipitation = weather[:, 2]

    activity = 0.5 * (1.0 - np.cos(day))
    drive = np.zeros((steps, n, len(CONCEPTS)))
    drive[..., 0] = config.attraction_weight * attraction[None, :] * activity[:, None]
    drive[..., 1] = (0.4 * np.sin(day) + config.weather_bike_weight * precipitation)[:, None]
    drive[..., 2] = (0.4 * np.cos(day) + config.weather_taxi_weight * precipitation)[:, None]
    drive[..., 3] = (0.4 * np.sin(day + 1.0) + 0.2 * clock[:, 2])[:, None]

    noise = rng.standard_normal((steps, n, len(CONCEPTS))) * config.latent_noise_std
    innovations = propagate(drive + noise, weights)
    latents = np.zeros_like(innovations)
    state = np.zeros((n, len(CONCEPTS)))
    for t in range(steps):
        state = config.persistence * state + (1.0 - config.persistence) * innovations[t]
        latents[t] = state

    observations = {}
    for index, modality in enumerate(("bike", "taxi", "bus"), start=1):
        z = latents[..., index][..., None]
        clean = config.flow_scale * softplus(FLOW_LOADINGS[0] * z + FLOW_LOADINGS[1])
        smoothed = np.einsum("ij,tjc->tic", smoother, clean)
        emitted = smoothed + config.emission_noise_std * rng.standard_normal(smoothed.shape)
        observations[modality] = np.maximum(emitted, 0.0)
    # z_v high means free-flowing traffic
    speed = np.einsum("ij,tjc->tic", smoother, config.base_speed + config.speed_gain * latents[..., 4:5])
    speed = speed + config.emission_noise_std * rng.standard_normal(speed.shape)
    observations["v"] = np.maximum(speed, 1.0)

    conditions = np.concatenate(
        [
            np.broadcast_to(poi, (steps, n, config.poi_dim)),
            np.broadcast_to(clock[:, None, :], (steps, n, config.time_dim)),
            np.broadcast_to(weather[:, None, :], (steps, n, config.weather_dim)),
        ],
        axis=-1,
    )
    logger.info("Generated scenario: %d regions, %d steps, seed %d", n, steps, config.seed)
    return DatasetBundle(
        conditions=np.ascontiguousarray(conditions),
        observations=observations,
        adjacency=g,
        splits=split_bounds(steps),
        steps_per_day=config.steps_per_day,
        ground_truth_a=weights,
    )
