"""Pencil documents and JSON/CSV serialization.

Matrices travel as nested [re, im] pairs (row-major), which round-trips
doubles exactly through the standard json module; CSV floats are printed
with 17 significant digits for the same reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .matcore import hermitian_defect
from .pencil import Classification, HermitianPencil, ShrunkWitness, make_pencil
from .scaling import CapacityResult, ScalingCertificate, SinkhornResult
from .spectra import DensityTable

HERMITIAN_DOC_TOL = 1e-10


def matrix_to_pairs(m) -> list:
    a = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def pairs_to_matrix(data) -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    if a.ndim != 3 or a.shape[2] != 2:
        raise SchemaError(f"matrix must be rows x cols x [re, im], got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


@dataclass(frozen=True)
class PencilDocument:
    """On-disk form of a pencil: validated shape, not yet a HermitianPencil."""

    n: int
    r: int
    hermitian: bool
    matrices: np.ndarray  # (r, n, n) complex
    name: str | None = None

    def to_pencil(self) -> HermitianPencil:
        if not self.hermitian:
            raise SchemaError("document is not flagged Hermitian; the pipeline "
                              "requires Hermitian pencils")
        return make_pencil(list(self.matrices))


def parse_pencil_document(doc: dict) -> PencilDocument:
    if not isinstance(doc, dict):
        raise SchemaError("pencil document must be a JSON object")
    try:
        n = int(doc["n"])
        r = int(doc["r"])
        hermitian = bool(doc["hermitian"])
        matrices = doc["matrices"]
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scalar field: {exc}") from exc
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("name must be a string")
    if n < 1 or r < 1:
        raise SchemaError("n and r must be at least 1")
    if not isinstance(matrices, list) or len(matrices) != r:
        raise SchemaError(f"expected {r} matrices")
    mats = []
    for i, m in enumerate(matrices):
        a = pairs_to_matrix(m)
        if a.shape != (n, n):
            raise SchemaError(f"matrix {i} has shape {a.shape}, expected ({n}, {n})")
        if hermitian:
            scale = max(1.0, float(np.linalg.norm(a)))
            if hermitian_defect(a) > HERMITIAN_DOC_TOL * scale:
                raise SchemaError(f"matrix {i} is not Hermitian within {HERMITIAN_DOC_TOL}")
        mats.append(a)
    return PencilDocument(n=n, r=r, hermitian=hermitian,
                          matrices=np.array(mats), name=name)


def load_pencil_document(path) -> PencilDocument:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read pencil document {path}: {exc}") from exc
    return parse_pencil_document(doc)


def dump_pencil_document(doc: PencilDocument) -> dict:
    out = {
        "n": doc.n,
        "r": doc.r,
        "hermitian": doc.hermitian,
        "matrices": [matrix_to_pairs(m) for m in doc.matrices],
    }
    if doc.name is not None:
        out["name"] = doc.name
    return out


# ---------------------------------------------------------------------------
# Result serialization


def _opt_matrix(m):
    return None if m is None else matrix_to_pairs(m)


def sinkhorn_to_jsonable(sk: SinkhornResult | None) -> dict | None:
    if sk is None:
        return None
    return {
        "status": sk.status,
        "iterations": sk.iterations,
        "final_ds": float(sk.final_ds),
        "divergence_reason": sk.divergence_reason,
    }


def witness_to_jsonable(w: ShrunkWitness | None) -> dict | None:
    if w is None:
        return None
    return {
        "row_space": matrix_to_pairs(w.row_space),
        "image_space": matrix_to_pairs(w.image_space),
        "row_dim": int(w.row_space.shape[1]),
        "image_dim": int(w.image_space.shape[1]),
        "residual": float(w.residual),
    }


def classification_to_jsonable(c: Classification) -> dict:
    return {
        "verdict": c.verdict,
        "block_sizes": None if c.block_sizes is None else [int(s) for s in c.block_sizes],
        "left_transform": _opt_matrix(c.left_transform),
        "right_transform": _opt_matrix(c.right_transform),
        "off_block_residual": None if c.off_block_residual is None else float(c.off_block_residual),
        "witness": witness_to_jsonable(c.witness),
        "sinkhorn": sinkhorn_to_jsonable(c.sinkhorn),
        "capacity_estimate": None if c.capacity_estimate is None else float(c.capacity_estimate),
    }


def certificate_to_jsonable(cert: ScalingCertificate) -> dict:
    jac_eigs = (np.linalg.eigvalsh(cert.jacobian).tolist()
                if cert.jacobian.size else [])
    return {
        "status": cert.status,
        "c": matrix_to_pairs(cert.c),
        "residual": float(cert.residual),
        "trace_minimal": bool(cert.trace_minimal),
        "foc_residual": float(cert.foc_residual),
        "kernel_dim": int(cert.kernel.dim),
        "kernel_basis": [matrix_to_pairs(y) for y in cert.kernel.basis],
        "kernel_spectral_gap": float(cert.kernel.spectral_gap),
        "jacobian": [list(map(float, row)) for row in np.atleast_2d(cert.jacobian)]
        if cert.jacobian.size else [],
        "jacobian_eigenvalues": [float(v) for v in jac_eigs],
    }


def capacity_to_jsonable(res: CapacityResult) -> dict:
    return {
        "value": float(res.value),
        "minimizer": _opt_matrix(res.minimizer),
        "method": res.method,
        "foc_residual": float(res.residual),
        "solver_agreement": None if res.solver_agreement is None else float(res.solver_agreement),
    }


def table_to_jsonable(table: DensityTable) -> dict:
    return {
        "xs": [float(x) for x in table.xs],
        "fs": [float(f) for f in table.fs],
        "statuses": list(table.statuses),
        "eps_path": [float(e) for e in table.eps_path],
        "extrapolation_order": int(table.extrapolation_order),
    }


def table_to_csv(table: DensityTable) -> str:
    lines = ["x,f,status"]
    for x, f, s in zip(table.xs, table.fs, table.statuses):
        lines.append(f"{x:.17g},{f:.17g},{s}")
    return "\n".join(lines) + "\n"


def to_json(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"
