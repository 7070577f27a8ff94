"""The CCHMM network: per-concept GraphGRUs, Gaussian heads, shared causal module, generator."""

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from cchmm.core.errors import ShapeMismatchError, ValidationError
from cchmm.diffcore import Tensor, ops
from cchmm.diffcore.ops import Operand
from cchmm.models.causal import attention_fuse, causal_adjacency, causal_propagate
from cchmm.models.concepts import MODALITIES, MODALITY_CHANNELS, ConceptSet, default_concepts, entangled_concepts
from cchmm.models.data import WindowBatch
from cchmm.models.gaussian import GaussianParams, clamp_logvar, sample
from cchmm.models.graph import graph_conv
from cchmm.models.params import Linear, ParameterStore, TwoLayer, glorot

Side = Literal["posterior", "prior"]
Role = Literal["eps", "z"]
Mode = Literal["train", "eval"]
StepNoise = tuple[np.ndarray, np.ndarray] | None

LOGVAR_INIT = -3.0


@dataclass(frozen=True)
class ModelSpec:
    """Structural description of one network; all switches on is the full model."""

    condition_dim: int
    n_regions: int
    latent_dim: int = 8
    alpha: float = 3.0
    entangle: bool = False
    use_scm: bool = True
    nonlinear_scm: bool = True
    use_prior: bool = True
    use_cond: bool = True
    use_gcn: bool = True
    use_gru: bool = True
    variant: str = "full"

    @property
    def concepts(self) -> ConceptSet:
        return entangled_concepts() if self.entangle else default_concepts()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelSpec":
        return cls(**payload)


@dataclass(frozen=True)
class LatentStep:
    eps_dist: GaussianParams
    z_dist: GaussianParams
    z: Tensor


@dataclass(frozen=True)
class StepOutput:
    posterior: LatentStep
    prior: LatentStep | None
    reconstruction: dict[str, Tensor]
    prediction: dict[str, Tensor]


@dataclass(frozen=True)
class RolloutOutput:
    steps: list[StepOutput]
    forecast_prior: LatentStep | None
    forecast: dict[str, Tensor]
    a_tilde: Tensor


class GraphGRU:
    """Gated recurrent cell whose gates are graph convolutions.

    With ``recurrent=False`` the cell collapses to tanh of one graph
    convolution of the current input.
    """

    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        in_dim: int,
        hidden: int,
        rng: np.random.Generator,
        recurrent: bool = True,
    ):
        self.store = store
        self.recurrent = recurrent
        gate_in = in_dim + hidden if recurrent else in_dim
        names = ("r", "u", "h") if recurrent else ("h",)
        self.weights = {}
        for gate in names:
            self.weights[gate] = (
                store.create(f"{prefix}.W_{gate}", glorot(rng, gate_in, hidden)),
                store.create(f"{prefix}.b_{gate}", np.zeros(hidden)),
            )

    def _conv(self, gate: str, g_hat: Operand, x: Tensor) -> Tensor:
        weight, bias = self.weights[gate]
        return graph_conv(g_hat, x, self.store[weight], self.store[bias])

    def __call__(self, s: Tensor, z_prev: Tensor, g_hat: Operand) -> Tensor:
        if not self.recurrent:
            return ops.tanh(self._conv("h", g_hat, s))
        joint = ops.concat([s, z_prev])
        reset = ops.sigmoid(self._conv("r", g_hat, joint))
        update = ops.sigmoid(self._conv("u", g_hat, joint))
        candidate = ops.tanh(self._conv("h", g_hat, ops.concat([s, ops.mul(reset, z_prev)])))
        return ops.add(ops.mul(update, z_prev), ops.mul(ops.sub(1.0, update), candidate))


class GaussianHead:
    """Mean and clamped log-variance from separate affine maps; variances start at exp(LOGVAR_INIT)."""

    def __init__(self, store: ParameterStore, prefix: str, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.mean = Linear(store, f"{prefix}.mean", in_dim, out_dim, rng)
        self.logvar = Linear(store, f"{prefix}.logvar", in_dim, out_dim, rng, bias_init=LOGVAR_INIT)

    def __call__(self, h: Operand) -> GaussianParams:
        return GaussianParams(mean=self.mean(h), logvar=clamp_logvar(self.logvar(h)))


class CCHMM:
    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.concepts = spec.concepts
        self.params = ParameterStore()
        rng = np.random.default_rng(seed)
        d = spec.latent_dim
        cond_dim = spec.condition_dim if spec.use_cond else 0

        sides: tuple[Side, ...] = ("posterior", "prior") if spec.use_prior else ("posterior",)
        self.inputs: dict[tuple[str, str], Linear] = {}
        self.grus: dict[tuple[str, str], GraphGRU] = {}
        self.heads: dict[tuple[str, str, str], GaussianHead] = {}
        for side in sides:
            for concept in self.concepts.concepts:
                obs_dim = self.concepts.observation_width(concept) if side == "posterior" else 0
                prefix = f"{side}.{concept}"
                self.inputs[side, concept] = Linear(self.params, f"{prefix}.input", cond_dim + obs_dim, d, rng)
                self.grus[side, concept] = GraphGRU(self.params, f"{prefix}.gru", d, d, rng, recurrent=spec.use_gru)
                for role in ("eps", "z"):
                    self.heads[side, concept, role] = GaussianHead(self.params, f"{prefix}.{role}_head", d, d, rng)

        self.w_a: str | None = None
        if spec.use_scm:
            k = self.concepts.size
            # upper triangle ~ |N(0, 1)| so every candidate edge starts active; diagonal and lower stay at zero in Ã
            init = np.full((k, k), -1.0)
            upper = np.triu_indices(k, 1)
            init[upper] = np.abs(rng.standard_normal(len(upper[0])))
            self.w_a = self.params.create("causal.W_A", init)

        self.transforms: dict[str, Linear | TwoLayer] = {}
        for concept in self.concepts.concepts:
            if spec.nonlinear_scm:
                self.transforms[concept] = TwoLayer(self.params, f"transform.{concept}", d, d, d, rng)
            else:
                self.transforms[concept] = Linear(self.params, f"transform.{concept}", d, d, rng)

        self.w_att: str | None = None
        self.predictor: Linear | None = None
        if spec.use_prior:
            # identity bilinear form: each concept starts by attending to the prior draw it resembles
            self.w_att = self.params.create("attention.W_att", np.eye(d))
        else:
            self.predictor = Linear(self.params, "predictor", d, d, rng)

        self.generator = {
            m: TwoLayer(self.params, f"generator.{m}", d, d, MODALITY_CHANNELS[m], rng) for m in MODALITIES
        }

    # building blocks

    def operator(self, g_hat: np.ndarray) -> np.ndarray:
        return g_hat if self.spec.use_gcn else np.eye(np.shape(g_hat)[0])

    def graphgru_step(
        self,
        concept: str,
        side: Side,
        conditions: Operand,
        observation: Operand | None,
        z_prev: Operand,
        g_hat: np.ndarray,
    ) -> Tensor:
        if (side, concept) not in self.grus:
            raise ValidationError(f"model has no {side} network for concept {concept!r}")
        conditions, z_prev = ops.as_tensor(conditions), ops.as_tensor(z_prev)
        parts: list[Tensor] = []
        if self.spec.use_cond:
            parts.append(conditions)
        if side == "posterior":
            if observation is None:
                raise ValidationError(f"posterior step for concept {concept!r} needs its observation")
            parts.append(ops.as_tensor(observation))
        if parts:
            stacked = ops.concat(parts) if len(parts) > 1 else parts[0]
        else:
            stacked = Tensor(np.zeros(conditions.shape[:-1] + (0,)))
        s = self.inputs[side, concept](stacked)
        if z_prev.shape != s.shape:
            raise ShapeMismatchError("graphgru_step", [s.shape, z_prev.shape])
        return self.grus[side, concept](s, z_prev, self.operator(g_hat))

    def gaussian_head(self, concept: str, role: Role, side: Side, h: Operand) -> GaussianParams:
        return self.heads[side, concept, role](h)

    def causal_adjacency(self) -> Tensor:
        k = self.concepts.size
        if self.w_a is None:
            return Tensor(np.zeros((k, k)))
        return causal_adjacency(self.params[self.w_a], self.spec.alpha)

    def causal_propagate(self, a_tilde: Operand, eps: Operand) -> Tensor:
        if not self.spec.use_scm:
            return ops.as_tensor(eps)
        return causal_propagate(a_tilde, eps)

    def concept_transform(self, h: Operand) -> Tensor:
        h = ops.as_tensor(h)
        slots = [self.transforms[c](ops.select(h, i, axis=-2)) for i, c in enumerate(self.concepts.concepts)]
        return ops.stack(slots, axis=-2)

    def attention_fuse(self, z_post_prev: Operand, z_prior: Operand) -> Tensor:
        if self.w_att is None:
            raise ValidationError("model was built without a prior network; there is nothing to fuse")
        return attention_fuse(z_post_prev, z_prior, self.params[self.w_att])

    def generate(self, z: Operand) -> dict[str, Tensor]:
        z = ops.as_tensor(z)
        return {m: self.generator[m](ops.select(z, self.concepts.head_slot(m), axis=-2)) for m in MODALITIES}

    # steps

    def _infer(
        self,
        side: Side,
        conditions: Operand,
        observations: dict[str, Operand] | None,
        z_prev: Operand,
        g_hat: np.ndarray,
        noise: StepNoise,
        a_tilde: Tensor | None,
    ) -> LatentStep:
        z_prev = ops.as_tensor(z_prev)
        eps_parts, heads = [], []
        for i, concept in enumerate(self.concepts.concepts):
            observation = None
            if side == "posterior":
                observation = self._observation_for(concept, observations)
            eps_i = self.graphgru_step(concept, side, conditions, observation, ops.select(z_prev, i, axis=-2), g_hat)
            heads.append(self.gaussian_head(concept, "eps", side, eps_i))
        eps_dist = GaussianParams.stack(heads)
        eps = sample(eps_dist, None if noise is None else noise[0])

        if a_tilde is None:
            a_tilde = self.causal_adjacency()
        h = self.concept_transform(self.causal_propagate(a_tilde, eps))
        z_heads = [
            self.gaussian_head(c, "z", side, ops.select(h, i, axis=-2)) for i, c in enumerate(self.concepts.concepts)
        ]
        z_dist = GaussianParams.stack(z_heads)
        return LatentStep(eps_dist=eps_dist, z_dist=z_dist, z=sample(z_dist, None if noise is None else noise[1]))

    def _observation_for(self, concept: str, observations: dict[str, Operand] | None) -> Tensor:
        wanted = self.concepts.observed[concept]
        if observations is None or any(m not in observations for m in wanted):
            raise ValidationError(f"posterior step for concept {concept!r} needs observations {list(wanted)}")
        parts = [ops.as_tensor(observations[m]) for m in wanted]
        return parts[0] if len(parts) == 1 else ops.concat(parts)

    def posterior_step(
        self,
        conditions: Operand,
        observations: dict[str, Operand],
        z_prev: Operand,
        g_hat: np.ndarray,
        noise: StepNoise = None,
        a_tilde: Tensor | None = None,
    ) -> LatentStep:
        return self._infer("posterior", conditions, observations, z_prev, g_hat, noise, a_tilde)

    def prior_step(
        self,
        conditions: Operand,
        z_prev: Operand,
        g_hat: np.ndarray,
        noise: StepNoise = None,
        a_tilde: Tensor | None = None,
    ) -> LatentStep:
        if not self.spec.use_prior:
            raise ValidationError("model was built without a prior network")
        return self._infer("prior", conditions, None, z_prev, g_hat, noise, a_tilde)

    def latent_shape(self, batch: int) -> tuple[int, ...]:
        return (batch, self.spec.n_regions, self.concepts.size, self.spec.latent_dim)

    def _predict(
        self,
        conditions: np.ndarray,
        z_post_prev: Tensor,
        g_hat: np.ndarray,
        noise: StepNoise,
        a_tilde: Tensor,
    ) -> tuple[LatentStep | None, dict[str, Tensor]]:
        if not self.spec.use_prior:
            return None, self.generate(self.predictor(z_post_prev))
        prior = self.prior_step(conditions, z_post_prev, g_hat, noise, a_tilde)
        return prior, self.generate(self.attention_fuse(z_post_prev, prior.z))

    def rollout(
        self,
        batch: WindowBatch,
        g_hat: np.ndarray,
        mode: Mode = "eval",
        rng: np.random.Generator | None = None,
    ) -> RolloutOutput:
        """Filter through the history window, then forecast one step ahead.

        Train mode draws reparameterization noise from ``rng`` in a fixed
        order (posterior ε, posterior z, prior ε, prior z per step); eval mode
        uses distribution means throughout.
        """
        if batch.history < 1:
            raise ValidationError("rollout needs at least one history step")
        if mode == "train" and rng is None:
            raise ValidationError("train-mode rollout needs a noise generator")
        shape = self.latent_shape(batch.size)
        if batch.conditions.shape[2] != self.spec.n_regions:
            raise ShapeMismatchError("rollout", [batch.conditions.shape, shape], "region count differs from model")

        def draw() -> StepNoise:
            if mode != "train":
                return None
            return rng.standard_normal(shape), rng.standard_normal(shape)

        a_tilde = self.causal_adjacency()
        z_post = Tensor(np.zeros(shape))
        steps: list[StepOutput] = []
        for t in range(batch.history):
            conditions = batch.step_conditions(t)
            observations = batch.step_observations(t)
            posterior = self.posterior_step(conditions, observations, z_post, g_hat, draw(), a_tilde)
            prior, prediction = self._predict(conditions, z_post, g_hat, draw(), a_tilde)
            steps.append(
                StepOutput(
                    posterior=posterior,
                    prior=prior,
                    reconstruction=self.generate(posterior.z),
                    prediction=prediction,
                )
            )
            z_post = posterior.z

        forecast_prior, forecast = self._predict(batch.next_conditions, z_post, g_hat, draw(), a_tilde)
        return RolloutOutput(steps=steps, forecast_prior=forecast_prior, forecast=forecast, a_tilde=a_tilde)
