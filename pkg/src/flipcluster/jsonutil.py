"""Canonical JSON emission: byte-identical output for identical data.

Dicts are serialized in insertion order, so builders are responsible for
inserting keys deterministically (numeric keys in numeric order).  A
trailing newline is always present.
"""

import json


def dumps_canonical(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
