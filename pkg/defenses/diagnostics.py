"""What a defense did to the round's updates."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from federation.updates import SubmittedUpdate


FILTERED_ALL = "filtered_all"


@dataclass(frozen=True)
class DefenseDiagnostics:
    """Admitted and filtered client ids plus clipping/noise bookkeeping."""

    admitted_ids: frozenset[int] = frozenset()
    filtered_ids: frozenset[int] = frozenset()
    clip_count: int = 0
    noise_sigma_applied: float = 0.0
    notes: tuple[str, ...] = ()

    @classmethod
    def passthrough(cls, updates: Sequence[SubmittedUpdate], **kwargs) -> DefenseDiagnostics:
        return cls(admitted_ids=frozenset(update.client_id for update in updates), **kwargs)

    @classmethod
    def selection(
        cls, updates: Sequence[SubmittedUpdate], survivors: Iterable[SubmittedUpdate], **kwargs
    ) -> DefenseDiagnostics:
        everyone = frozenset(update.client_id for update in updates)
        admitted = frozenset(update.client_id for update in survivors)
        return cls(admitted_ids=admitted, filtered_ids=everyone - admitted, **kwargs)

    @property
    def filtered_all(self) -> bool:
        return FILTERED_ALL in self.notes

    def then(self, later: DefenseDiagnostics) -> DefenseDiagnostics:
        """Merge with the diagnostics of the next stage in a pipeline."""

        everyone = self.admitted_ids | self.filtered_ids
        return DefenseDiagnostics(
            admitted_ids=later.admitted_ids,
            filtered_ids=everyone - later.admitted_ids,
            clip_count=self.clip_count + later.clip_count,
            noise_sigma_applied=max(self.noise_sigma_applied, later.noise_sigma_applied),
            notes=self.notes + later.notes,
        )
