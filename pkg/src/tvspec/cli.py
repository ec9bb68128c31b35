"""Command-line pipeline: decompose, filter, transfer, flow, stylize, denoise, serve.

Exit codes: 0 success, 1 finished with solver convergence warnings,
2 usage or validation error, 3 I/O or parse failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from . import flow as flow_mod
from . import shapes
from .errors import DigestError, ParseError, TvspecError
from .filters import CorrespondenceMap, FilterSpec, apply_filter, detail_transfer
from .mesh import (
    Signal,
    TriangleMesh,
    load_mesh,
    read_scalar_file,
    tvsm_bytes,
    write_mesh,
    write_scalar_file,
)
from .ops import build_operators
from .solver import default_config
from .spectral import (
    ScheduleConfig,
    decompose_forward,
    decompose_inverse,
    estimate_alpha_max,
    load_decomposition,
    reconstruct,
    save_decomposition,
    spectrum,
    spectrum_peaks,
    write_spectrum_csv,
)

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _require_file(path):
    if path is None or not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")


class UsageError(Exception):
    pass


def _load_signal(mesh, source, path=None):
    if source == "coordinates":
        return Signal("vertices", mesh.vertices.copy())
    if source == "faceNormals":
        return Signal("faces", mesh.face_normals.copy())
    if source == "scalarFile":
        _require_file(path)
        return Signal("vertices", read_scalar_file(path, channels=1))
    if source == "colorFile":
        _require_file(path)
        return Signal("vertices", read_scalar_file(path, channels=3))
    raise UsageError(f"unknown signal source {source!r}")


def _schedule_from(args):
    return ScheduleConfig(
        alpha_max=args.alpha_max,
        decay=args.decay,
        n_steps=args.steps,
    )


def _solver_cfg(ops, domain, channels, args):
    cfg = default_config(ops, domain, channels=channels, step_rule=args.step_rule)
    if args.gap_tol is not None:
        cfg.gap_tol = args.gap_tol
    if args.max_iter is not None:
        cfg.max_iter = args.max_iter
    if args.theta is not None:
        if not 0.0 <= args.theta <= 1.0:
            raise UsageError("theta must lie in [0, 1]")
        cfg.theta = args.theta
    return cfg


def _domain_for_source(source):
    return "faces" if source == "faceNormals" else "vertices"


_TV_KINDS = {"iso": "isotropic", "aniso": "anisotropic"}


def _print_peaks(dec, threshold):
    times, s = spectrum(dec)
    peaks = spectrum_peaks(s, threshold)
    if peaks:
        print("spectrum peaks (t, s):")
        for k in peaks:
            print(f"  {times[k]:.6g}  {s[k]:.6g}")
    else:
        print("spectrum peaks: none above threshold")


def cmd_decompose(args):
    _require_file(args.input)
    mesh = load_mesh(args.input)
    signal = _load_signal(mesh, args.signal, args.signal_file)
    domain = signal.domain
    ops = build_operators(mesh)
    cfg = _solver_cfg(ops, domain, signal.channels, args)

    schedule = _schedule_from(args)
    if schedule.alpha_max is None:
        schedule.alpha_max = estimate_alpha_max(signal.values, ops, domain, cfg)
    t0 = time.time()
    decompose = decompose_inverse if args.scheme == "inverse" else decompose_forward
    dec = decompose(signal.values, schedule, ops, domain,
                    solver_cfg=cfg, source_digest=mesh.digest())
    elapsed = time.time() - t0

    save_decomposition(args.output, dec)
    if args.emit_spectrum:
        write_spectrum_csv(args.emit_spectrum, dec)
    print(f"N={dec.n_components} alphaMax={schedule.alpha_max:.6g} "
          f"domain={domain} channels={dec.channels} time={elapsed:.2f}s")
    iters = getattr(dec, "step_iterations", [])
    if iters:
        print("per-step solver iterations:", " ".join(str(i) for i in iters))
    if dec.warnings:
        print(f"warning: {len(dec.warnings)} step(s) hit the iteration cap")
    _print_peaks(dec, args.peak_threshold)
    return EXIT_WARNINGS if dec.warnings else EXIT_OK


def _load_filter(args):
    try:
        if args.filter:
            _require_file(args.filter)
            with open(args.filter) as fh:
                text = fh.read()
            spec = FilterSpec.from_json(
                text, mask_loader=lambda p: read_scalar_file(p, channels=1).ravel()
            )
        else:
            spec = FilterSpec()
        if args.mask:
            _require_file(args.mask)
            mask = read_scalar_file(args.mask, channels=1).ravel()
            spec = FilterSpec([{"a": a, "b": b, "gain": g} for a, b, g in spec.bands], mask)
    except ParseError as exc:
        # a bad filter spec is a validation problem, not an I/O failure
        raise UsageError(str(exc)) from exc
    return spec


def _verify_digest(dec, mesh):
    if dec.source_digest and dec.source_digest != mesh.digest():
        raise DigestError("decomposition was not computed on the supplied mesh")


def _filtered_output(dec, mesh, spec, epsilon):
    """Apply a filter; for face-normal decompositions re-integrate the mesh."""
    if spec.is_all_pass():
        values = reconstruct(dec, None)
    else:
        values = apply_filter(dec, spec)
    if dec.domain == "faces" and dec.channels == 3:
        if spec.is_all_pass():
            return mesh, None
        norms = np.linalg.norm(values, axis=1)
        norms[norms < 1e-12] = 1.0
        verts = flow_mod.recover_vertices(mesh, values / norms[:, None], epsilon=epsilon)
        return mesh.with_vertices(verts), None
    return None, values


def cmd_filter(args):
    _require_file(args.decomposition)
    _require_file(args.input)
    dec = load_decomposition(args.decomposition)
    mesh = load_mesh(args.input)
    _verify_digest(dec, mesh)
    spec = _load_filter(args)

    out_mesh, values = _filtered_output(dec, mesh, spec, args.epsilon)
    if out_mesh is not None:
        write_mesh(args.output, out_mesh)
        print(f"wrote mesh {args.output} "
              f"digest={hashlib.sha256(tvsm_bytes(out_mesh)).hexdigest()[:16]}")
    else:
        write_scalar_file(args.output, values)
        print(f"wrote signal {args.output}")
    return EXIT_OK


def cmd_transfer(args):
    _require_file(args.source)
    _require_file(args.target)
    src = load_decomposition(args.source)
    tgt = load_decomposition(args.target)
    if args.map:
        _require_file(args.map)
        mapping = CorrespondenceMap.from_file(args.map)
    else:
        mapping = CorrespondenceMap.identity(tgt.n_elements)
    band = (args.band_low, args.band_high)
    values = detail_transfer(src, tgt, band, mapping)
    if args.input:
        _require_file(args.input)
        mesh = load_mesh(args.input)
        _verify_digest(tgt, mesh)
        if tgt.domain == "faces" and tgt.channels == 3:
            norms = np.linalg.norm(values, axis=1)
            norms[norms < 1e-12] = 1.0
            verts = flow_mod.recover_vertices(mesh, values / norms[:, None], epsilon=args.epsilon)
            write_mesh(args.output, mesh.with_vertices(verts))
            print(f"wrote mesh {args.output}")
            return EXIT_OK
    write_scalar_file(args.output, values)
    print(f"wrote signal {args.output}")
    return EXIT_OK


def cmd_flow(args):
    _require_file(args.input)
    mesh = load_mesh(args.input)
    state = flow_mod.FlowState.from_mesh(mesh)
    ops = state.face_ops()
    cfg = _solver_cfg(ops, "faces", 3, args)
    dt = args.dt
    if dt is None:
        alpha = estimate_alpha_max(state.normals.values, ops, "faces", cfg)
        dt = alpha / 20.0
    base, ext = os.path.splitext(args.output)
    trace = []
    warned = False
    for k in range(args.flow_steps):
        state = flow_mod.normal_tv_step(state, dt, tv_kind=_TV_KINDS[args.tv], solver_cfg=cfg)
        verts = flow_mod.recover_vertices(mesh, state.normals, epsilon=args.epsilon)
        snapshot = mesh.with_vertices(verts)
        path = f"{base}_{k:03d}{ext or '.obj'}"
        write_mesh(path, snapshot)
        energy = flow_mod.tv_normal_energy(mesh, state.normals)
        trace.append((state.time, energy, snapshot.volume()))
        print(f"step {k}: t={state.time:.4g} energy={energy:.6g} -> {path}")
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("t,tv_energy,volume\n")
            for row in trace:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return EXIT_WARNINGS if warned else EXIT_OK


def cmd_stylize(args):
    _require_file(args.input)
    mesh = load_mesh(args.input)
    out, field = flow_mod.stylize_cubic(
        mesh, mode=args.mode, tv_kind=_TV_KINDS[args.tv], steps=args.flow_steps,
        dt=args.dt, epsilon=args.epsilon, with_field=True,
    )
    write_mesh(args.output, out)
    normals = field.values if field is not None else out.face_normals
    conc = flow_mod.axis_concentration(normals, mesh.face_areas)
    print(f"axis concentration: {conc:.4f}")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_denoise(args):
    _require_file(args.input)
    mesh = load_mesh(args.input)
    ops = build_operators(mesh)
    cfg = _solver_cfg(ops, "faces", 3, args)
    normals = mesh.face_normals.copy()

    schedule = _schedule_from(args)
    if schedule.alpha_max is None:
        schedule.alpha_max = estimate_alpha_max(normals, ops, "faces", cfg)
    decompose = decompose_inverse if args.scheme == "inverse" else decompose_forward
    dec = decompose(normals, schedule, ops, "faces",
                    solver_cfg=cfg, source_digest=mesh.digest())

    cutoff = args.cutoff if args.cutoff is not None \
        else args.cutoff_frac * float(dec.times[-1])
    spec = FilterSpec([{"a": 0.0, "b": cutoff, "gain": 0.0}])
    values = apply_filter(dec, spec)
    norms = np.linalg.norm(values, axis=1)
    norms[norms < 1e-12] = 1.0
    verts = flow_mod.recover_vertices(mesh, values / norms[:, None],
                                      epsilon=args.epsilon, ops=ops)
    out = mesh.with_vertices(verts)
    write_mesh(args.output, out)

    e_in = flow_mod.tv_normal_energy(mesh, mesh.face_normals)
    e_out = flow_mod.tv_normal_energy(out, out.face_normals)
    print(f"tv normal energy: input={e_in:.6g} output={e_out:.6g}")
    print(f"wrote {args.output}")
    return EXIT_WARNINGS if dec.warnings else EXIT_OK


def cmd_serve(args):
    from . import service

    _require_file(args.input)
    _require_file(args.decomposition)
    session = service.SessionState.load(args.input, args.decomposition,
                                        epsilon=args.epsilon)
    service.run(session, host=args.host, port=args.port)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tvspec",
        description="Multiscale spectral TV decomposition and filtering "
                    "for triangle meshes and point clouds",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized internals")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--input", help="mesh file (OBJ/OFF/PLY/TVSM)")
        if output:
            p.add_argument("--output", required=True)
        p.add_argument("--gap-tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--step-rule", choices=["edge", "norm"], default="edge")
        p.add_argument("--tv", choices=["iso", "aniso"], default="iso")
        p.add_argument("--epsilon", type=float, default=1e-4)

    def schedule_args(p):
        p.add_argument("--scheme", choices=["forward", "inverse"], default="inverse")
        p.add_argument("--decay", type=float, default=0.7)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--alpha-max", type=float, default=None)

    p = sub.add_parser("decompose", help="spectral decomposition of a mesh signal")
    common(p)
    schedule_args(p)
    p.add_argument("--signal", default="coordinates",
                   choices=["coordinates", "faceNormals", "scalarFile", "colorFile"])
    p.add_argument("--signal-file")
    p.add_argument("--emit-spectrum", metavar="CSV")
    p.add_argument("--peak-threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("filter", help="apply a band filter to a decomposition")
    common(p)
    p.add_argument("--decomposition", required=True)
    p.add_argument("--filter", help="filter spec JSON")
    p.add_argument("--mask", help="per-element mask file")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("transfer", help="transfer a spectral band between shapes")
    common(p)
    p.add_argument("--source", required=True, help="source decomposition")
    p.add_argument("--target", required=True, help="target decomposition")
    p.add_argument("--map", help="target-to-source index map file")
    p.add_argument("--band-low", type=float, required=True)
    p.add_argument("--band-high", type=float, required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("flow", help="normal TV flow with checkpoints")
    common(p)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--flow-steps", type=int, default=5)
    p.add_argument("--trace", metavar="CSV")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("stylize", help="cubic stylization")
    common(p)
    p.set_defaults(tv="aniso")
    p.add_argument("--mode", choices=["coordinates", "normals"], default="normals")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--flow-steps", type=int, default=1)
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser("denoise", help="low-pass spectral denoising of the normal field")
    common(p)
    schedule_args(p)
    p.add_argument("--cutoff", type=float, default=None,
                   help="zero all components below this time")
    p.add_argument("--cutoff-frac", type=float, default=0.05,
                   help="cutoff as a fraction of the largest time when --cutoff is absent")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("serve", help="serve a decomposition for interactive filtering")
    common(p, output=False)
    p.add_argument("--decomposition", required=True)
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TvspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
