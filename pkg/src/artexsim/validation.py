"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import os
from typing import Any

from .ledger import LedgerTransaction, load_dump


def check_view(X: Any):
    """Coerce ``X`` into a :class:`PublicView`.

    A view passes through unchanged. Anything else is read as a dump, either
    from a path or from an iterable of lines, transactions or dicts.
    """
    from .adversary.view import PublicView

    if isinstance(X, PublicView):
        return X
    if isinstance(X, (str, os.PathLike)):
        if not os.path.exists(X):
            raise FileNotFoundError(X)
        return PublicView(load_dump(os.fspath(X)))
    items = list(X)
    if not items:
        return PublicView([])
    if all(isinstance(i, LedgerTransaction) for i in items):
        return PublicView(items)
    if all(isinstance(i, dict) for i in items):
        return PublicView(LedgerTransaction.from_dict(d) for d in items)
    if all(isinstance(i, str) for i in items):
        return PublicView(load_dump(items))
    raise TypeError(f"cannot build a public view from {type(X).__name__}")


def check_positive_int(value: Any, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_ground_truth(truth: Any) -> list[dict]:
    if isinstance(truth, (str, os.PathLike)):
        import json

        with open(truth, encoding="utf-8") as fh:
            truth = json.load(fh)
    truth = list(truth)
    for entry in truth:
        for key in ("token", "seller_wallets", "buyer_wallets", "status"):
            if key not in entry:
                raise ValueError(f"ground truth entry missing {key!r}")
    return truth
