# ============================================================================
# FILE: storage/result_store.py
# ============================================================================

import json
import logging
import os
import tempfile

import numpy as np

from config.config import OUTPUT_CONFIG

logger = logging.getLogger(__name__)


def _plain(value):
    """numpy scalars/arrays -> JSON-native values; NaN/inf -> None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


class ResultStore:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        # Create output directory if it doesn't exist
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def _write_atomic(self, name, text):
        """Write to a temp file in the same directory, then rename over the target."""
        target = self.path(name)
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        logger.info("wrote %s", target)
        return target

    def write_json(self, name, payload):
        text = json.dumps(_plain(payload), indent=OUTPUT_CONFIG["json_indent"], sort_keys=True)
        return self._write_atomic(name, text + "\n")

    def write_frame(self, name, frame):
        text = frame.to_csv(index=False, float_format=OUTPUT_CONFIG["float_format"],
                            lineterminator="\n")
        return self._write_atomic(name, text)

    def write_rate_file(self, name, x, y, header=None):
        """Two whitespace-separated columns, one point per line."""
        lines = [] if header is None else [f"# {header}"]
        fmt = OUTPUT_CONFIG["float_format"]
        lines.extend(f"{fmt % a} {fmt % b}" for a, b in zip(x, y))
        if not name.endswith(OUTPUT_CONFIG["rate_file_suffix"]):
            name += OUTPUT_CONFIG["rate_file_suffix"]
        return self._write_atomic(name, "\n".join(lines) + "\n")

    def read_json(self, name):
        with open(self.path(name), "r", encoding="utf-8") as fh:
            return json.load(fh)
