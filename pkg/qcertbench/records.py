"""JSON-lines experiment records: a meta header line, then one shot batch per line."""

import json
import logging
from pathlib import Path

from .devicesim import ExperimentRecord, Setting, ShotBatch
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def batch_to_dict(batch):
    row = {
        "setting_id": batch.setting_id,
        "setting": batch.setting.to_dict(),
        "first_shot": batch.first_shot,
        "counts": dict(sorted(batch.counts.items())),
    }
    if batch.outcomes is not None:
        row["outcomes"] = list(batch.outcomes)
    return row


def batch_from_dict(row):
    try:
        counts = {str(k): int(v) for k, v in row["counts"].items()}
        outcomes = row.get("outcomes")
        batch = ShotBatch(
            str(row["setting_id"]),
            Setting.from_dict(row["setting"]),
            int(row["first_shot"]),
            counts,
            tuple(str(o) for o in outcomes) if outcomes is not None else None,
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise InvalidInputError(f"malformed shot batch: {exc}") from exc
    if any(v < 0 for v in counts.values()):
        raise InvalidInputError("shot counts must be non-negative")
    if batch.outcomes is not None and len(batch.outcomes) != batch.shots:
        raise InvalidInputError(f"batch {batch.setting_id!r}: {len(batch.outcomes)} outcomes for {batch.shots} shots")
    return batch


def dump_lines(record, meta=None):
    head = {"version": FORMAT_VERSION, "seed": record.seed, "n_qubits": record.n_qubits}
    head.update(record.meta)
    head.update(meta or {})
    lines = [json.dumps({"meta": head}, sort_keys=True)]
    lines.extend(json.dumps(batch_to_dict(b), sort_keys=True) for b in record.batches)
    return "\n".join(lines) + "\n"


def write_record(record, path, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_lines(record, meta), encoding="utf-8")
    logger.info("wrote %d batches to %s", len(record.batches), path)
    return path


def read_record(path):
    """Parses a record file; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"record file {path} does not exist")
    meta = None
    batches = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(row, dict):
                raise InvalidInputError(f"{path}:{lineno}: expected a JSON object")
            if meta is None:
                if "meta" not in row or not isinstance(row["meta"], dict):
                    raise InvalidInputError(f"{path}:{lineno}: first line must be a meta header")
                meta = row["meta"]
                continue
            try:
                batch = batch_from_dict(row)
            except InvalidInputError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
            if batch.setting_id in seen:
                raise InvalidInputError(f"{path}:{lineno}: duplicate setting id {batch.setting_id!r}")
            seen.add(batch.setting_id)
            batches.append(batch)
    if meta is None:
        raise InvalidInputError(f"{path}: empty record")
    try:
        seed = int(meta.get("seed", 0))
        n_qubits = int(meta["n_qubits"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}:1: meta header needs an integer n_qubits") from exc
    extra = {k: v for k, v in meta.items() if k not in ("seed", "n_qubits", "version")}
    return ExperimentRecord(tuple(batches), seed, n_qubits, extra)
