"""Attacker behaviours: baseline poisoning, Neurotoxin, and SDBA."""

from attacks.malicious_client import run_attack, sdba_gradient_transform
from attacks.masking import GradientMask, layer_wise_mask, neurotoxin_mask, topk_mask
from attacks.plan import ATTACK_KINDS, AttackPlan
from attacks.projection import pgd_project

__all__ = [
    "ATTACK_KINDS",
    "AttackPlan",
    "GradientMask",
    "layer_wise_mask",
    "neurotoxin_mask",
    "pgd_project",
    "run_attack",
    "sdba_gradient_transform",
    "topk_mask",
]
