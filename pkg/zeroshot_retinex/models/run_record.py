"""Per-image run records and the line-oriented report they are written to.

A report is a sequence of records separated by blank lines; every line of a
record is ``key=value``. Floats are written with ``repr`` so they parse back
to the identical value.
"""

from dataclasses import dataclass, field

from .results import LOSS_TERMS

NOISE_VISUALIZATION = '(N+1)/2'


@dataclass
class RunRecord:
    input_path: str
    output_path: str = ''
    state: str = 'pending'  # pending | success | error
    height: int = 0
    width: int = 0
    started: float = 0.0
    ended: float = 0.0
    seed: int = 0
    loss_initial: dict = field(default_factory=dict)
    loss_final: dict = field(default_factory=dict)
    mean_luminance_before: float = 0.0
    mean_luminance_after: float = 0.0
    intermediates: list = field(default_factory=list)
    error_message: str = ''
    config: dict = field(default_factory=dict)

    @property
    def duration(self):
        if self.started and self.ended:
            return self.ended - self.started
        return 0.0

    def to_lines(self):
        lines = [
            f"input={self.input_path}",
            f"output={self.output_path}",
            f"status={self.state}",
            f"height={self.height}",
            f"width={self.width}",
            f"wall_time={self.duration!r}",
            f"seed={self.seed}",
        ]
        for term in LOSS_TERMS:
            if term in self.loss_initial:
                lines.append(f"loss_initial.{term}={self.loss_initial[term]!r}")
        for term in LOSS_TERMS:
            if term in self.loss_final:
                lines.append(f"loss_final.{term}={self.loss_final[term]!r}")
        lines.append(f"mean_luminance_before={self.mean_luminance_before!r}")
        lines.append(f"mean_luminance_after={self.mean_luminance_after!r}")
        if self.intermediates:
            lines.append(f"intermediates={','.join(self.intermediates)}")
            lines.append(f"noise_visualization={NOISE_VISUALIZATION}")
        if self.error_message:
            # Keep the record line-oriented.
            lines.append(f"error={' '.join(self.error_message.split())}")
        for key in sorted(self.config):
            lines.append(f"config.{key}={self.config[key]}")
        return lines


def format_report(records):
    return '\n\n'.join('\n'.join(r.to_lines()) for r in records) + '\n'


def parse_report(text):
    """Parse a report back into a list of {key: value string} dicts"""
    records = []
    current = {}
    for line in text.splitlines():
        if not line.strip():
            if current:
                records.append(current)
                current = {}
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise ValueError(f"Malformed report line: {line!r}")
        current[key] = value
    if current:
        records.append(current)
    return records


def config_from_record(record):
    """Extract the flat configuration echoed in a parsed record"""
    prefix = 'config.'
    return {k[len(prefix):]: v for k, v in record.items() if k.startswith(prefix)}
