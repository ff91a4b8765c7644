"""Plain-text container for trained models and canonical dataset dumps.

Every trained model is stored as a line-oriented key/value block: scalars as
``<type> <name> <value>`` lines, vectors and matrices as a header line
followed by rows of space-separated decimals.  Floats are written with
``repr`` so a save/load round trip is bitwise exact.
"""

from __future__ import annotations

import numpy as np

from sensorcal.errors import ParseError

MAGIC = "sensorcal-container v1"

# Fields that count as stored model parameters for footprint accounting.
# Everything else in the container (dimensions, hyperparameters, seeds) is
# metadata that an on-board implementation would hard-code or re-derive.
PARAMETER_FIELDS = {
    "mlr": ("beta", "intercept"),
    "mlp": ("w1", "b1", "w2", "b2"),
    "svr": ("support_vectors", "dual_coef", "bias"),
    "gpr": ("x_train", "alpha", "basis_coef", "sigma_f", "sigma_l", "noise_std"),
    "esn": ("w_in", "w", "w_out"),
}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_fields(path, fields: dict) -> None:
    """Write an ordered mapping of name -> scalar / 1-D / 2-D array."""
    lines = [MAGIC]
    for name, value in fields.items():
        if isinstance(value, str):
            lines.append(f"str {name} {value}")
        elif isinstance(value, (bool, np.bool_)):
            lines.append(f"int {name} {int(value)}")
        elif isinstance(value, (int, np.integer)):
            lines.append(f"int {name} {int(value)}")
        elif isinstance(value, (float, np.floating)):
            lines.append(f"float {name} {_fmt(value)}")
        elif isinstance(value, np.ndarray) and value.ndim == 1:
            lines.append(f"vec {name} {value.shape[0]}")
            lines.append(" ".join(_fmt(v) for v in value))
        elif isinstance(value, np.ndarray) and value.ndim == 2:
            lines.append(f"mat {name} {value.shape[0]} {value.shape[1]}")
            for row in value:
                lines.append(" ".join(_fmt(v) for v in row))
        else:
            raise TypeError(f"unsupported field type for {name!r}: {type(value)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_fields(path) -> dict:
    """Read a container file back into a mapping (inverse of write_fields)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ParseError(f"{path}: not a sensorcal container", line=1)
    fields: dict = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        parts = line.split(None, 2)
        tag = parts[0]
        try:
            if tag == "str":
                fields[parts[1]] = parts[2] if len(parts) > 2 else ""
            elif tag == "int":
                fields[parts[1]] = int(parts[2])
            elif tag == "float":
                fields[parts[1]] = float(parts[2])
            elif tag == "vec":
                name, n = parts[1], int(parts[2])
                i += 1
                vals = np.array([float(v) for v in lines[i].split()], dtype=float)
                if vals.shape[0] != n:
                    raise ParseError(f"vector {name}: expected {n} values", line=i + 1)
                fields[name] = vals
            elif tag == "mat":
                name = parts[1]
                r, c = (int(v) for v in parts[2].split())
                rows = []
                for k in range(r):
                    i += 1
                    row = np.array([float(v) for v in lines[i].split()], dtype=float)
                    if row.shape[0] != c:
                        raise ParseError(
                            f"matrix {name} row {k}: expected {c} values", line=i + 1
                        )
                    rows.append(row)
                fields[name] = (
                    np.vstack(rows) if rows else np.zeros((0, c), dtype=float)
                )
            else:
                raise ParseError(f"unknown field tag {tag!r}", line=i + 1)
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: {exc}", line=i + 1) from exc
        i += 1
    return fields


def save_model(model, path) -> None:
    """Serialize any trained model into the common text container."""
    from sensorcal import kernel_models, linear_models, neural_models

    if isinstance(model, linear_models.MlrModel):
        fields = linear_models.mlr_to_fields(model)
    elif isinstance(model, neural_models.MlpModel):
        fields = neural_models.mlp_to_fields(model)
    elif isinstance(model, neural_models.EsnModel):
        fields = neural_models.esn_to_fields(model)
    elif isinstance(model, kernel_models.SvrModel):
        fields = kernel_models.svr_to_fields(model)
    elif isinstance(model, kernel_models.GprModel):
        fields = kernel_models.gpr_to_fields(model)
    else:
        raise TypeError(f"cannot serialize {type(model)}")
    write_fields(path, fields)


def load_model(path):
    """Load a model previously written by save_model."""
    from sensorcal import kernel_models, linear_models, neural_models

    fields = read_fields(path)
    kind = fields.get("kind")
    loaders = {
        "mlr": linear_models.mlr_from_fields,
        "mlp": neural_models.mlp_from_fields,
        "esn": neural_models.esn_from_fields,
        "svr": kernel_models.svr_from_fields,
        "gpr": kernel_models.gpr_from_fields,
    }
    if kind not in loaders:
        raise ParseError(f"{path}: unknown model kind {kind!r}")
    return loaders[kind](fields)
