from pydantic import Field, model_validator

from cchmm.schemas.common import BaseSchema


def default_causal_weights() -> list[list[float]]:
    # concept order: poi, bike, taxi, bus, v
    return [
        [0.0, 0.8, 0.7, 0.9, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -0.9],
        [0.0, 0.0, 0.0, 0.0, -0.5],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]


class ScenarioConfig(BaseSchema):
    n_regions: int = Field(default=20, ge=1)
    grid_rows: int = Field(default=4, ge=1)
    grid_cols: int = Field(default=5, ge=1)
    timesteps: int = Field(default=2000, ge=2)
    steps_per_day: int = Field(default=48, ge=1)

    poi_dim: int = Field(default=8, ge=1)
    time_dim: int = 4
    weather_dim: int = 3

    causal_weights: list[list[float]] = Field(default_factory=default_causal_weights)
    persistence: float = Field(default=0.7, ge=0.0, lt=1.0)
    latent_noise_std: float = Field(default=0.3, ge=0.0)
    emission_noise_std: float = Field(default=4.0, ge=0.0)
    weather_bike_weight: float = -1.5
    weather_taxi_weight: float = 0.6
    attraction_weight: float = 1.5

    flow_scale: float = Field(default=20.0, gt=0.0)
    base_speed: float = Field(default=30.0, gt=0.0)
    speed_gain: float = Field(default=6.0, ge=0.0)

    graph_sigma: float = Field(default=1.0, gt=0.0)
    graph_threshold: float = Field(default=0.1, ge=0.0)
    seed: int = 7

    @model_validator(mode="after")
    def check_dims(self) -> "ScenarioConfig":
        if self.grid_rows * self.grid_cols != self.n_regions:
            raise ValueError(
                f"grid {self.grid_rows}x{self.grid_cols} does not hold n_regions={self.n_regions}"
            )
        if self.time_dim != 4:
            raise ValueError("time_dim must be 4 (sin/cos of day and week phase)")
        if self.weather_dim != 3:
            raise ValueError("weather_dim must be 3 (temperature, humidity, precipitation)")
        k = len(self.causal_weights)
        if k != 5 or any(len(row) != k for row in self.causal_weights):
            raise ValueError("causal_weights must be a 5x5 matrix in concept order")
        for i in range(k):
            for j in range(i + 1):
                if self.causal_weights[i][j] != 0.0:
                    raise ValueError(f"causal_weights must be strictly upper triangular, got [{i}][{j}]")
        return self

    @property
    def condition_dim(self) -> int:
        return self.poi_dim + self.time_dim + self.weather_dim
