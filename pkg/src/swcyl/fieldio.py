"""File formats: binary field container, canonical JSON reports, digests.

Field container layout: a global JSON header line, then per record one JSON
header line followed by a raw little-endian float64 payload.  Payload order
is x fastest, then y, then (for slice stacks) t.  Complex fields are stored
as two records with suffixes _re/_im.  Reports are canonical JSON (sorted
keys, two-space indent, no timestamps) so byte identity across reruns is
meaningful; wall-clock data lives only in the run manifest.
"""

import hashlib
import json

import numpy as np

from .harmonic import CylinderGeometry
from .lattice import GaugeField, MatterField, TorusGeometry

MAGIC = "swcyl-fields"
VERSION = 1


def _to_bytes(arr):
    a = np.asarray(arr, dtype="<f8")
    if a.ndim == 2:
        a = a.T
    elif a.ndim == 3:
        a = a.transpose(0, 2, 1)  # (t, y, x): C order makes x fastest
    else:
        raise ValueError("only 2d/3d fields are stored")
    return np.ascontiguousarray(a).tobytes()


def _from_bytes(buf, shape):
    a = np.frombuffer(buf, dtype="<f8")
    if len(shape) == 2:
        return a.reshape(shape[1], shape[0]).T.copy()
    if len(shape) == 3:
        return a.reshape(shape[0], shape[2], shape[1]).transpose(0, 2, 1).copy()
    raise ValueError("only 2d/3d fields are stored")


def write_field_file(path, meta, records):
    """records: iterable of (record_meta, array); complex arrays are split."""
    flat = []
    for rmeta, arr in records:
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            flat.append(({**rmeta, "kind": rmeta["kind"] + "_re"}, arr.real))
            flat.append(({**rmeta, "kind": rmeta["kind"] + "_im"}, arr.imag))
        else:
            flat.append((rmeta, arr.astype(float)))
    with open(path, "wb") as fh:
        head = {"format": MAGIC, "version": VERSION, "records": len(flat), **meta}
        fh.write((json.dumps(head, sort_keys=True) + "\n").encode())
        for rmeta, arr in flat:
            rec = {**rmeta, "shape": list(arr.shape), "dtype": "float64"}
            fh.write((json.dumps(rec, sort_keys=True) + "\n").encode())
            fh.write(_to_bytes(arr))


def read_field_file(path):
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode())
        if head.get("format") != MAGIC:
            raise ValueError(f"{path} is not a field container")
        records = []
        for _ in range(head["records"]):
            rmeta = json.loads(fh.readline().decode())
            shape = tuple(rmeta["shape"])
            n = int(np.prod(shape))
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError("truncated payload")
            records.append((rmeta, _from_bytes(buf, shape)))
    return head, records


def _merge_complex(records):
    """Re-join _re/_im pairs into complex arrays keyed by base kind."""
    by_kind = {m["kind"]: a for m, a in records}
    out = {}
    for kind, arr in by_kind.items():
        if kind.endswith("_re"):
            base = kind[:-3]
            out[base] = arr + 1j * by_kind[base + "_im"]
        elif not kind.endswith("_im"):
            out[kind] = arr
    return out


# ------------------------------------------------------------ vortex storage

def save_vortex_solution(path, sol, extra_meta=None):
    p = sol.problem
    g = p.geom
    meta = {
        "content": "vortex", "grid": [g.N1, g.N2], "L1": g.L1, "L2": g.L2,
        "degree": p.degree, "r": p.r, "tol": p.tol, "seed": p.seed,
        "converged": bool(sol.converged), "iterations": int(sol.iterations),
        "final_residual": float(sol.final_residual), "message": sol.message,
        **(extra_meta or {}),
    }
    base = {"grid": [g.N1, g.N2], "degree": p.degree}
    write_field_file(path, meta, [
        ({**base, "kind": "theta_x"}, sol.gauge.theta_x),
        ({**base, "kind": "theta_y"}, sol.gauge.theta_y),
        ({**base, "kind": "alpha"}, sol.alpha.values),
    ])


def load_vortex_solution(path):
    """Returns (meta, GaugeField, MatterField)."""
    meta, records = read_field_file(path)
    if meta.get("content") != "vortex":
        raise ValueError(f"{path} does not hold a vortex solution")
    g = TorusGeometry(meta["L1"], meta["L2"], *meta["grid"])
    d = int(meta["degree"])
    fields = _merge_complex(records)
    gauge = GaugeField(g, d, fields["theta_x"], fields["theta_y"])
    return meta, gauge, MatterField(g, d, fields["alpha"])


# ---------------------------------------------------------- cylinder storage

def save_sw_state(path, state, extra_meta=None):
    cyl = state.cyl
    g = cyl.torus
    meta = {
        "content": "sw-cylinder", "grid": [g.N1, g.N2], "L1": g.L1, "L2": g.L2,
        "Nt": cyl.Nt, "T": cyl.T, "degree": state.degree, "r": state.r,
        **(extra_meta or {}),
    }
    base = {"grid": [g.N1, g.N2], "degree": state.degree}
    write_field_file(path, meta, [
        ({**base, "kind": "theta_x"}, state.theta_x),
        ({**base, "kind": "theta_y"}, state.theta_y),
        ({**base, "kind": "alpha"}, state.alpha),
        ({**base, "kind": "beta"}, state.beta),
        ({**base, "kind": "w_bar"}, state.w_bar),
    ])


def load_sw_state(path):
    from .cylinder import SWCylinderState

    meta, records = read_field_file(path)
    if meta.get("content") != "sw-cylinder":
        raise ValueError(f"{path} does not hold a cylinder state")
    g = TorusGeometry(meta["L1"], meta["L2"], *meta["grid"])
    cyl = CylinderGeometry(torus=g, T=meta["T"], Nt=int(meta["Nt"]))
    fields = _merge_complex(records)
    state = SWCylinderState(
        cyl=cyl, degree=int(meta["degree"]), r=float(meta["r"]),
        theta_x=fields["theta_x"], theta_y=fields["theta_y"],
        alpha=fields["alpha"], beta=fields["beta"], w_bar=fields["w_bar"],
    )
    return meta, state


# ------------------------------------------------------------------- reports

def _json_safe(obj):
    """Plain types only; non-finite floats become strings ("inf", "nan")."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    return obj


def dump_json(path, obj):
    """Canonical JSON: sorted keys, stable float repr, trailing newline."""
    with open(path, "w") as fh:
        json.dump(_json_safe(obj), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def write_decay_csv(path, t, beta_sq, grad_beta_sq, config_hash=None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("t,sup_beta_sq,sup_grad_beta_sq\n")
        for tv, b, gb in zip(t, beta_sq, grad_beta_sq):
            fh.write(f"{float(tv)!r},{float(b)!r},{float(gb)!r}\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg_dict):
    return hashlib.sha256(
        json.dumps(cfg_dict, sort_keys=True).encode()
    ).hexdigest()
