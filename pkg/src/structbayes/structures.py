"""Discrete structure payloads and their JSON round-trip.

A :class:`Structure` is one element of a structure space: a label vector,
a support set, a sign matrix, a cell set or a prefix length, together with
its model index ``tau``.  Payloads are stored as nested tuples so that
structures are hashable (chains memoize on them) and order-canonical.
"""

from dataclasses import dataclass

from .errors import ConfigError

__all__ = ["Structure", "structure_to_json", "structure_from_json"]


@dataclass(frozen=True)
class Structure:
    """One discrete structure, tagged with its family kind and model index.

    ``payload`` layout by kind (all indices 0-based):

    - ``sbm`` / ``multi_task``: tuple of labels in ``range(k)``
    - ``biclustering``: ``(row_labels, col_labels)`` tuple pair
    - ``sparse_regression`` / ``group_sparsity`` / ``aggregation_regression``
      / ``besov_level``: sorted tuple of support indices
    - ``dictionary``: tuple of ``p`` rows, each a tuple of ``d`` values in
      ``{-1, 0, 1}``
    - ``group_two_level``: sorted tuple of ``(row, col)`` cells
    - ``sobolev_sequence``: prefix length ``k`` (an int)
    """

    kind: str
    tau: object
    payload: object

    def key(self):
        """Hashable identity used for chain-side memoization."""
        return (self.kind, self.tau, self.payload)


_LABEL_KINDS = ("sbm", "multi_task")
_SUPPORT_KINDS = (
    "sparse_regression",
    "group_sparsity",
    "aggregation_regression",
    "besov_level",
)


def structure_to_json(structure):
    """Serialize a structure to a JSON-compatible dict."""
    kind, payload = structure.kind, structure.payload
    out = {"family": kind, "tau": _tau_to_json(structure.tau)}
    if kind in _LABEL_KINDS:
        out["labels"] = list(payload)
    elif kind in _SUPPORT_KINDS:
        out["support"] = list(payload)
    elif kind == "biclustering":
        out["row_labels"] = list(payload[0])
        out["col_labels"] = list(payload[1])
    elif kind == "dictionary":
        out["signs"] = [list(row) for row in payload]
    elif kind == "group_two_level":
        out["cells"] = [list(cell) for cell in payload]
    elif kind == "sobolev_sequence":
        out["prefix"] = int(payload)
    else:
        raise ConfigError(f"unknown structure kind {kind!r}")
    return out


def structure_from_json(data):
    """Rebuild a structure from :func:`structure_to_json` output."""
    kind = data["family"]
    tau = _tau_from_json(data["tau"])
    if kind in _LABEL_KINDS:
        payload = tuple(int(v) for v in data["labels"])
    elif kind in _SUPPORT_KINDS:
        payload = tuple(sorted(int(v) for v in data["support"]))
    elif kind == "biclustering":
        payload = (
            tuple(int(v) for v in data["row_labels"]),
            tuple(int(v) for v in data["col_labels"]),
        )
    elif kind == "dictionary":
        payload = tuple(tuple(int(v) for v in row) for row in data["signs"])
    elif kind == "group_two_level":
        payload = tuple(sorted((int(i), int(j)) for i, j in data["cells"]))
    elif kind == "sobolev_sequence":
        payload = int(data["prefix"])
    else:
        raise ConfigError(f"unknown structure kind {kind!r}")
    return Structure(kind=kind, tau=tau, payload=payload)


def _tau_to_json(tau):
    if isinstance(tau, tuple):
        return [int(v) for v in tau]
    return int(tau)


def _tau_from_json(tau):
    if isinstance(tau, list):
        return tuple(int(v) for v in tau)
    return int(tau)
