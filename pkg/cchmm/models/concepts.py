from dataclasses import dataclass

MODALITIES: tuple[str, ...] = ("bike", "taxi", "bus", "v")
MODALITY_CHANNELS: dict[str, int] = {"bike": 2, "taxi": 2, "bus": 2, "v": 1}
CONCEPTS: tuple[str, ...] = ("poi", "bike", "taxi", "bus", "v")


@dataclass(frozen=True)
class ConceptSet:
    """Latent concepts in causal-graph order and how observations map onto them.

    ``observed`` lists, per concept, the modalities concatenated into that
    concept's posterior input; ``heads`` names the concept slot each
    generator head reads.
    """

    concepts: tuple[str, ...]
    observed: dict[str, tuple[str, ...]]
    heads: dict[str, str]

    @property
    def size(self) -> int:
        return len(self.concepts)

    def index(self, concept: str) -> int:
        return self.concepts.index(concept)

    def head_slot(self, modality: str) -> int:
        return self.index(self.heads[modality])

    def observation_width(self, concept: str) -> int:
        return sum(MODALITY_CHANNELS[m] for m in self.observed[concept])


def default_concepts() -> ConceptSet:
    # the attraction factor has no observation of its own; it reads all modalities
    return ConceptSet(
        concepts=CONCEPTS,
        observed={"poi": MODALITIES, "bike": ("bike",), "taxi": ("taxi",), "bus": ("bus",), "v": ("v",)},
        heads={m: m for m in MODALITIES},
    )


def entangled_concepts() -> ConceptSet:
    return ConceptSet(
        concepts=("joint",),
        observed={"joint": MODALITIES},
        heads={m: "joint" for m in MODALITIES},
    )
