from cchmm.models.network import ModelSpec
from cchmm.schemas.training import TrainConfig


def apply_variant(config: TrainConfig, condition_dim: int, n_regions: int) -> ModelSpec:
    """Translate the ablation flags of a training config into a network description.

    Without conditions the prior network has nothing to transition on, so
    ``no_cond`` also removes it and forecasts through the predictor head.
    """
    return ModelSpec(
        condition_dim=condition_dim,
        n_regions=n_regions,
        latent_dim=config.latent_dim,
        alpha=config.alpha,
        entangle=config.entangle,
        use_scm=not config.no_scm,
        nonlinear_scm=not config.linear_scm,
        use_prior=not (config.no_prior or config.no_cond),
        use_cond=not config.no_cond,
        use_gcn=not config.no_gcn,
        use_gru=not config.no_gru,
        variant=config.variant.value,
    )
