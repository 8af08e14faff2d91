"""Versioned on-disk model format.

A model file is an uncompressed ``.npz`` archive.  The ``header`` entry is a
JSON document holding the format version, algorithm tag, hyperparameters and
the user/item id maps; every other entry is a learned array.
"""
import json

import numpy as np

from ..exceptions import ModelFormatError

FORMAT_VERSION = 1


def save_model(model, path):
    from . import ALGORITHMS

    if model.algorithm not in ALGORITHMS:
        raise ModelFormatError(f"unregistered algorithm {model.algorithm!r}")
    from .. import __version__

    header = {
        "format": "recokit-model",
        "format_version": FORMAT_VERSION,
        "toolkit_version": __version__,
        "algorithm": model.algorithm,
        "params": model.get_params(),
        "user_ids": list(model.user_ids_),
        "item_ids": list(model.item_ids_),
    }
    seen = model.seen_
    arrays = {f"state_{k}": np.asarray(v) for k, v in model._get_state().items()}
    arrays["seen_indptr"] = seen.indptr
    arrays["seen_indices"] = seen.indices
    # file handle keeps numpy from appending ".npz" to the path
    with open(path, "wb") as f:
        np.savez(f, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_model(path):
    import scipy.sparse as sp

    from . import ALGORITHMS

    with np.load(path, allow_pickle=False) as npz:
        try:
            header = json.loads(str(npz["header"]))
        except KeyError:
            raise ModelFormatError(f"{path}: missing header") from None
        if header.get("format") != "recokit-model":
            raise ModelFormatError(f"{path}: not a recokit model file")
        if header.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(
                f"{path}: unsupported format version {header.get('format_version')}")
        arrays = {k: npz[k] for k in npz.files if k != "header"}
    cls = ALGORITHMS.get(header["algorithm"])
    if cls is None:
        raise ModelFormatError(f"{path}: unknown algorithm {header['algorithm']!r}")
    model = cls(**header["params"])
    model.user_ids_ = tuple(header["user_ids"])
    model.item_ids_ = tuple(header["item_ids"])
    model.user_index_ = {u: k for k, u in enumerate(model.user_ids_)}
    model.item_index_ = {i: k for k, i in enumerate(model.item_ids_)}
    model.n_users_ = len(model.user_ids_)
    model.n_items_ = len(model.item_ids_)
    indptr, indices = arrays.pop("seen_indptr"), arrays.pop("seen_indices")
    model.seen_ = sp.csr_matrix((np.ones(len(indices)), indices, indptr),
                                shape=(model.n_users_, model.n_items_))
    model._set_state({k[len("state_"):]: v for k, v in arrays.items()})
    return model
