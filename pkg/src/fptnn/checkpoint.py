"""Versioned checkpoints for both model families, with exact round-trips.

Checkpoints are .npz archives: raw parameter arrays are stored verbatim
(bit-exact), plus the domain, the family tag, shape metadata and, when a
training run saves them, the optimizer state needed to resume.
"""

import numpy as np

from .geometry import Domain
from .optim import AdamState, LionState, SgdState
from .tffn import TffnModel
from .trbfn import RbfKind, TrbfnModel

_FORMAT_VERSION = 1


def _state_arrays(name, state):
    prefix = f"opt_{name}_"
    out = {prefix + "kind": np.array(type(state).__name__)}
    for attr, val in vars(state).items():
        out[prefix + attr] = np.asarray(val)
    return out


def _load_state(payload, name):
    prefix = f"opt_{name}_"
    kind = str(payload[prefix + "kind"])
    fields = {
        key[len(prefix):]: payload[key]
        for key in payload.files
        if key.startswith(prefix) and not key.endswith("kind")
    }
    cls = {"LionState": LionState, "AdamState": AdamState, "SgdState": SgdState}[kind]
    kwargs = {}
    for attr, val in fields.items():
        kwargs[attr] = val if val.ndim else val.item()
    return cls(**kwargs)


def save_checkpoint(path, model, epoch=0, optimizer_states=None):
    data = {
        "format_version": np.array(_FORMAT_VERSION),
        "epoch": np.array(int(epoch)),
        "domain_center": model.domain.center,
        "domain_r": model.domain.r,
    }
    if isinstance(model, TrbfnModel):
        data["family"] = np.array("trbfn")
        data["kinds"] = np.array([k.value for k in model.kinds])
        data["raw_c"] = model.raw_c
        data["raw_alpha"] = model.raw_alpha
        data["shifts"] = model.shifts
        data["raw_log_h"] = model.raw_log_h
    elif isinstance(model, TffnModel):
        data["family"] = np.array("tffn")
        data["widths"] = np.array(model.widths)
        data["quad_panels"] = np.array(model.quad_panels)
        data["quad_points"] = np.array(model.quad_points)
        for li, (w, b) in enumerate(zip(model.weights, model.biases)):
            data[f"weight_{li}"] = w
            data[f"bias_{li}"] = b
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    if optimizer_states:
        data["opt_names"] = np.array(sorted(optimizer_states))
        for name in sorted(optimizer_states):
            data.update(_state_arrays(name, optimizer_states[name]))
    np.savez(path, **data)


def load_checkpoint(path):
    """Returns (model, epoch, optimizer_states)."""
    payload = np.load(path, allow_pickle=False)
    version = int(payload["format_version"])
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version}")
    domain = Domain(payload["domain_center"], payload["domain_r"])
    family = str(payload["family"])
    if family == "trbfn":
        model = TrbfnModel(
            domain,
            kinds=[RbfKind(k) for k in payload["kinds"]],
            raw_c=payload["raw_c"],
            raw_alpha=payload["raw_alpha"],
            shifts=payload["shifts"],
            raw_log_h=payload["raw_log_h"],
        )
    elif family == "tffn":
        widths = tuple(int(w) for w in payload["widths"])
        n_layers = len(widths) - 1
        weights = [payload[f"weight_{li}"] for li in range(n_layers)]
        biases = [payload[f"bias_{li}"] for li in range(n_layers)]
        model = TffnModel(
            domain,
            widths,
            weights,
            biases,
            quad_panels=int(payload["quad_panels"]),
            quad_points=int(payload["quad_points"]),
        )
    else:
        raise ValueError(f"unknown model family {family!r} in checkpoint")
    states = {}
    if "opt_names" in payload.files:
        for name in payload["opt_names"]:
            states[str(name)] = _load_state(payload, str(name))
    return model, int(payload["epoch"]), states
