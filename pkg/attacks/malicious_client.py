"""Local training of the attacker for one injection round.

Every attack runs the same SGD loop as a benign client on the poisoned shard.
They differ only in how each gradient is rewritten before the step:

- baseline: unchanged;
- neurotoxin: zeroed where the previous global update moved most;
- sdba: restricted to the target layers, then the largest k% of each target
  layer's coordinates are zeroed.

With PGD on, the final delta (and optionally every intermediate one) is
projected onto the norm ball the server's clipping defense uses.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

from attacks.masking import GradientMask, layer_wise_mask, neurotoxin_keep_mask, topk_mask
from attacks.plan import AttackPlan
from attacks.projection import pgd_project
from corpus.config import ClientShard
from federation.updates import ClientUpdate
from nn_core.params import ParamVector
from nn_core.training import VectorHook, sgd_epochs
from utils import ConfigurationError


logger = logging.getLogger(__name__)


def sdba_gradient_transform(plan: AttackPlan) -> VectorHook:
    """Layer-wise masking followed by top-k% masking inside the target layers."""

    per_layer = {layer: k for layer, k in plan.topk_by_layer.items() if k > 0}
    shared_scope = sorted(plan.target_layers - set(plan.topk_by_layer))

    def transform(gradient: ParamVector) -> ParamVector:
        masked = layer_wise_mask(gradient, sorted(plan.target_layers))
        for layer, k in sorted(per_layer.items()):
            masked = topk_mask(masked, k, [layer])
        if shared_scope and plan.topk_percent > 0:
            masked = topk_mask(masked, plan.topk_percent, shared_scope)
        return masked

    return transform


def gradient_transform_for(kind: str, plan: AttackPlan, benign_direction: ParamVector) -> VectorHook | None:
    if kind == "baseline":
        return None
    if kind == "neurotoxin":
        mask: GradientMask = neurotoxin_keep_mask(benign_direction, plan.neurotoxin_mask_percent)
        return mask.apply
    if kind == "sdba":
        return sdba_gradient_transform(plan)
    raise ConfigurationError(f"No attacker behaviour for attack kind '{kind}'")


def run_attack(
    kind: str,
    global_params: ParamVector,
    poisoned_shard: ClientShard,
    plan: AttackPlan,
    benign_direction: ParamVector | None,
    *,
    lr: float,
    epochs: int,
    batch_order: Sequence[int] | None = None,
    client_id: int = 0,
) -> ClientUpdate:
    """Train on the poisoned shard and return the attacker's update.

    `benign_direction` is the previous round's global update (G^t - G^{t-1});
    None means no history yet and is treated as all zeros.
    """

    if kind == "none":
        raise ConfigurationError("run_attack needs an attack kind other than 'none'")
    plan.check_schema(global_params.schema)
    direction = benign_direction if benign_direction is not None else global_params.zeros_like()
    global_params.check_compatible(direction)

    after_step = None
    if plan.pgd_enabled and plan.pgd_per_step:

        def after_step(params: ParamVector) -> ParamVector:
            return global_params + pgd_project(params - global_params, plan.pgd_delta)

    batches = poisoned_shard.batches
    ordered = [batches[index] for index in batch_order] if batch_order is not None else list(batches)
    local = sgd_epochs(
        global_params,
        ordered,
        lr,
        epochs,
        gradient_transform=gradient_transform_for(kind, plan, direction),
        after_step=after_step,
    )
    delta = local - global_params
    if plan.pgd_enabled:
        delta = pgd_project(delta, plan.pgd_delta)
    logger.debug("%s attacker delta norm %.4f", kind, delta.norm())
    return ClientUpdate(client_id, delta, poisoned_shard.num_samples, malicious=True)
