"""Versioned model archives (npz): everything the online solver needs.

An archive stores the mesh/degree pair (the benchmark problem is
rebuilt deterministically from it), the reduced basis, all reduced
blocks and traces, both interpolation bases, a config fingerprint, and
any per-stage checkpoint models recorded during the build.  A loaded
model reproduces online outputs bit for bit; it cannot be extended
further (the full-order weighted operators are not stored).
"""

import json

import numpy as np

from .benchmark import benchmark_problem
from .eim import EimBasis
from .rb import RbSpace, ReducedBlocks, ReducedModel
from .ser import BuildReport, BuildResult

FORMAT_VERSION = 1


def _model_arrays(model, prefix=""):
    d = {
        prefix + "xi": model.rb.basis_matrix(),
        prefix + "snapshot_mus": np.asarray(model.rb.mus, dtype=float),
        prefix + "A_aff": model.blocks.A_aff,
        prefix + "F_aff": model.blocks.F_aff,
        prefix + "Aq": model.blocks.Aq,
        prefix + "Rq": model.blocks.Rq,
        prefix + "Tj": model.blocks.Tj,
        prefix + "Tr": model.blocks.Tr,
        prefix + "avg": model.blocks.avg,
    }
    d.update(model.eim_g.to_arrays(prefix + "eimg_"))
    d.update(model.eim_dg.to_arrays(prefix + "eimdg_"))
    return d


def _model_from_arrays(problem, data, label, prefix=""):
    rb = RbSpace.from_basis(problem.space, np.array(data[prefix + "xi"]),
                            [tuple(r) for r in np.atleast_2d(data[prefix + "snapshot_mus"])])
    blocks = ReducedBlocks(problem)
    blocks.A_aff = np.array(data[prefix + "A_aff"])
    blocks.F_aff = np.array(data[prefix + "F_aff"])
    blocks.Aq = np.array(data[prefix + "Aq"])
    blocks.Rq = np.array(data[prefix + "Rq"])
    blocks.Tj = np.array(data[prefix + "Tj"])
    blocks.Tr = np.array(data[prefix + "Tr"])
    blocks.avg = np.array(data[prefix + "avg"])
    blocks._weighted_ops = None
    blocks._mass_qs = None
    blocks._nbasis = rb.N
    eim_g = EimBasis.from_arrays(problem.space, data, prefix + "eimg_")
    eim_dg = EimBasis.from_arrays(problem.space, data, prefix + "eimdg_")
    return ReducedModel(problem, rb, blocks, eim_g, eim_dg, label=label)


def save_model(path, result, fingerprint=""):
    """Write a BuildResult (or bare model) to an npz archive."""
    model = result.model if isinstance(result, BuildResult) else result
    checkpoints = result.checkpoints if isinstance(result, BuildResult) else {}
    report = result.report if isinstance(result, BuildResult) else None
    space = model.problem.space
    data = {
        "format_version": np.int64(FORMAT_VERSION),
        "mesh_n": np.int64(space.mesh.n_cells_per_side),
        "degree": np.int64(space.degree),
        "label": np.str_(model.label),
        "fingerprint": np.str_(fingerprint),
        "fe_solve_count": np.int64(report.fe_solve_count if report else 0),
        "checkpoint_keys": np.asarray(sorted(checkpoints), dtype=np.int64).reshape(-1, 2),
    }
    data.update(_model_arrays(model))
    for i, key in enumerate(sorted(checkpoints)):
        data.update(_model_arrays(checkpoints[key], f"cp{i}_"))
    np.savez(path, **data)
    return path


def load_model(path):
    """Load an archive back into a BuildResult (report holds only the count)."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported archive format version {version}")
        problem = benchmark_problem(int(data["mesh_n"]), int(data["degree"]))
        label = str(data["label"])
        model = _model_from_arrays(problem, data, label)
        checkpoints = {}
        for i, key in enumerate(np.atleast_2d(data["checkpoint_keys"])):
            if len(key) == 0:
                continue
            checkpoints[(int(key[0]), int(key[1]))] = _model_from_arrays(
                problem, data, label, f"cp{i}_")
        report = BuildReport(variant=label,
                             fe_solve_count=int(data["fe_solve_count"]))
        fingerprint = str(data["fingerprint"])
    result = BuildResult(model=model, report=report, checkpoints=checkpoints)
    result.fingerprint = fingerprint
    return result


def fingerprint_json(settings_dict):
    return json.dumps(settings_dict, sort_keys=True)
