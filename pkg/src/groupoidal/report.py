"""Validation reports: named checks with witnesses, plus numeric residuals."""

from __future__ import annotations

from dataclasses import dataclass, field


class InvalidStructureError(ValueError):
    """A precondition or structural axiom failed; the message names a witness."""


class NonFreeActionError(InvalidStructureError):
    """A construction that requires a free action was given a non-free one."""


class InternalConsistencyError(RuntimeError):
    """A uniqueness guarantee backed by a pre-checked hypothesis was violated."""


@dataclass
class CheckResult:
    name: str
    ok: bool
    witness: str | None = None

    def line(self) -> str:
        status = "pass" if self.ok else "FAIL"
        tail = f"  [{self.witness}]" if self.witness else ""
        return f"{status}  {self.name}{tail}"


@dataclass
class ValidationReport:
    """Outcome of an exhaustive verification.

    ``checks`` holds one entry per named check; failing entries carry the
    offending tuple in ``witness``.  ``metrics`` records numeric residuals
    (maximum absolute deviations) keyed by check name.
    """

    subject: str = ""
    checks: list[CheckResult] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.ok]

    def add(self, name: str, ok: bool, witness: str | None = None) -> None:
        self.checks.append(CheckResult(name, bool(ok), witness))

    def note(self, text: str) -> None:
        self.notes.append(text)

    def record_metric(self, name: str, value: float) -> None:
        self.metrics[name] = float(value)

    def merge(self, other: "ValidationReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(CheckResult(prefix + c.name, c.ok, c.witness))
        for n in other.notes:
            self.notes.append(prefix + n)
        for k, v in other.metrics.items():
            self.metrics[prefix + k] = v

    def require(self, context: str = "") -> "ValidationReport":
        """Raise :class:`InvalidStructureError` on the first failure."""
        bad = self.failures()
        if bad:
            where = context or self.subject
            raise InvalidStructureError(
                f"{where}: {bad[0].name} failed"
                + (f" [{bad[0].witness}]" if bad[0].witness else "")
            )
        return self

    def __str__(self) -> str:
        lines = [f"== {self.subject} =="] if self.subject else []
        lines += [c.line() for c in self.checks]
        lines += [f"note  {n}" for n in self.notes]
        lines += [f"residual  {k} = {v:.3e}" for k, v in sorted(self.metrics.items())]
        return "\n".join(lines)
