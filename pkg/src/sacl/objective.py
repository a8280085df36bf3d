"""Training objective: classifier head, class-weighted cross entropy, supervised
contrastive loss, their weighted combination, and the gradient-sign-free
adversarial perturbation applied to embedding matrices.

Conventions used throughout:

* logits z have one column per polarity in the fixed order positive, negative,
  neutral;
* pair similarity for the contrastive term is the unnormalized dot product on
  z, scaled by a temperature;
* ``reduction="sum"`` is the plain batch sum; ``"mean"`` divides the same sum
  by the batch size (also for weighted cross entropy).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .data import POLARITIES, LabelWeights

REDUCTIONS = ("sum", "mean")
POSITIVES_MODES = ("gold", "predicted")

LABEL_TO_INDEX = {label: i for i, label in enumerate(POLARITIES)}


def encode_labels(labels) -> torch.Tensor:
    """Polarity strings to a LongTensor of class indices."""
    try:
        return torch.tensor([LABEL_TO_INDEX[label] for label in labels], dtype=torch.long)
    except KeyError as err:
        raise ValueError(f"unknown label {err.args[0]!r}; expected one of {POLARITIES}") from None


def weights_tensor(weights: LabelWeights | None, dtype: torch.dtype) -> torch.Tensor | None:
    if weights is None:
        return None
    return torch.tensor(weights.as_list(), dtype=dtype)


@dataclass
class LossConfig:
    """Everything the composite objective needs beyond the batch itself."""

    scl_weight: float = 0.1
    temperature: float = 0.1
    adv_scl_weight: float = 0.1
    adv_temperature: float = 0.1
    fgm_radius: float = 5.0
    fgm_rate: float = 1.0
    reduction: str = "sum"
    positives_from: str = "gold"
    label_weights: LabelWeights | None = None

    def __post_init__(self):
        if self.temperature <= 0 or self.adv_temperature <= 0:
            raise ValueError("temperatures must be > 0")
        if self.fgm_radius < 0:
            raise ValueError("perturbation radius must be >= 0")
        if not 0.0 <= self.fgm_rate <= 1.0:
            raise ValueError("perturbation rate must be in [0, 1]")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}")
        if self.positives_from not in POSITIVES_MODES:
            raise ValueError(f"positives_from must be one of {POSITIVES_MODES}")


class ClassifierHead(nn.Module):
    """Linear sentiment head producing one logit per polarity."""

    def __init__(self, hidden_size: int, num_labels: int = len(POLARITIES), seed: int = 0):
        super().__init__()
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.linear = nn.Linear(hidden_size, num_labels)

    @property
    def hidden_size(self) -> int:
        return self.linear.in_features

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        return self.linear(pooled)


def classifier_logits(pooled: torch.Tensor, head: ClassifierHead) -> torch.Tensor:
    if pooled.shape[-1] != head.hidden_size:
        raise ValueError(
            f"pooled dimension {pooled.shape[-1]} does not match head input {head.hidden_size}"
        )
    return head(pooled)


def _check_reduction(reduction: str) -> None:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}")


def ce_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    weights: torch.Tensor | None = None,
    reduction: str = "sum",
) -> torch.Tensor:
    """Cross entropy, each sample's term scaled by the weight of its gold class.

    With unit weights and sum reduction this is the plain negative
    log-likelihood summed over the batch; the mean variant divides by the
    batch size regardless of the weights.
    """
    _check_reduction(reduction)
    if not torch.isfinite(logits).all():
        raise ValueError("non-finite logits")
    per_sample = -F.log_softmax(logits, dim=-1).gather(1, targets.view(-1, 1)).squeeze(1)
    if weights is not None:
        per_sample = per_sample * weights.to(logits.dtype)[targets]
    total = per_sample.sum()
    return total / logits.shape[0] if reduction == "mean" else total


def scl_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    temperature: float,
    reduction: str = "sum",
    positives_from: str = "gold",
) -> torch.Tensor:
    """Supervised contrastive loss over batch logits.

    For each anchor i the positives are the other samples sharing its label
    (gold by default, predicted as an option) and the denominator runs over
    every other sample. Anchors without positives contribute zero.
    """
    _check_reduction(reduction)
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    if positives_from not in POSITIVES_MODES:
        raise ValueError(f"positives_from must be one of {POSITIVES_MODES}")
    batch = logits.shape[0]
    if batch < 2:
        return logits.new_zeros(())

    membership = targets if positives_from == "gold" else logits.argmax(dim=-1)
    sims = (logits @ logits.T) / temperature
    off_diagonal = ~torch.eye(batch, dtype=torch.bool)
    log_denom = torch.logsumexp(
        sims.masked_fill(~off_diagonal, float("-inf")), dim=1
    )
    positives = (membership.view(-1, 1) == membership.view(1, -1)) & off_diagonal
    n_positives = positives.sum(dim=1)
    log_prob = sims - log_denom.unsqueeze(1)
    per_anchor = -(log_prob * positives).sum(dim=1) / n_positives.clamp(min=1)
    per_anchor = torch.where(n_positives > 0, per_anchor, per_anchor.new_zeros(()))
    total = per_anchor.sum()
    return total / batch if reduction == "mean" else total


def soft_scl_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    *,
    weights: torch.Tensor | None = None,
    scl_weight: float,
    temperature: float,
    reduction: str = "sum",
    positives_from: str = "gold",
) -> torch.Tensor:
    """Weighted CE plus ``scl_weight`` times the contrastive loss.

    A zero trade-off weight short-circuits to the cross entropy alone, so the
    contrastive machinery is bit-for-bit absent from that configuration.
    """
    ce = ce_loss(logits, targets, weights=weights, reduction=reduction)
    if scl_weight == 0:
        return ce
    return ce + scl_weight * scl_loss(
        logits, targets, temperature, reduction=reduction, positives_from=positives_from
    )


def fgm_perturbation(grad: torch.Tensor, radius: float) -> torch.Tensor:
    """Gradient-direction perturbation of an embedding matrix.

    ``r = radius * g / ||g||`` with the norm taken over each sample's whole
    embedding matrix (the leading axis of a 3-d gradient indexes samples). A
    zero gradient maps to an exactly zero perturbation.
    """
    if not torch.isfinite(grad).all():
        raise ValueError("non-finite gradient")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if grad.dim() == 2:
        norm = grad.norm()
        if norm == 0:
            return torch.zeros_like(grad)
        return radius * grad / norm
    norms = grad.flatten(1).norm(dim=1).view(-1, *([1] * (grad.dim() - 1)))
    safe_norms = torch.where(norms > 0, norms, torch.ones_like(norms))
    return torch.where(norms > 0, radius * grad / safe_norms, torch.zeros_like(grad))


def sacl_loss(
    clean_branch: torch.Tensor, adv_branch: torch.Tensor | None = None
) -> torch.Tensor:
    """Total objective: clean branch plus, when executed, the adversarial branch."""
    if adv_branch is None:
        return clean_branch
    return clean_branch + adv_branch


def predict(logits) -> list[str]:
    """Argmax polarities; ties break toward the lowest class index."""
    array = logits.detach().cpu().numpy() if torch.is_tensor(logits) else np.asarray(logits)
    if array.ndim == 1:
        array = array[None, :]
    return [POLARITIES[i] for i in array.argmax(axis=1)]
