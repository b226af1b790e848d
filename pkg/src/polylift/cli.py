"""Command-line entry point.

stdout carries one JSON document per run; the run manifest (argv, config
echo, versions, wall clock) goes to ``--manifest`` or to stderr.  Exit
codes: 0 success, 2 validation, 3 construction failed, 4 numeric regime.
"""

from __future__ import annotations

import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import __version__
from .algebra import MatrixBouquet, MatrixPolynomial
from .builder import PipelineConfig, explicit_good_lift
from .catalog import get_entry, list_entries
from .csp import ATOMS, CSPInstance, Layout, brute_force_opt, eig_bound, instance_graph, random_regular_instance
from .errors import ConstructionFailed, NumericRegimeError, SingularityError, SizeGuardError, UnsupportedInputError, ValidationError
from .graphview import (
    acyclic_ball_vertex,
    bicycle_free_radius,
    check_tree_decomposition,
    extend,
    lift_graph,
    local_cover_check,
    random_walk_connectivity,
    tree_decomposition_ball,
)
from .lifting import Lift, Signing, random_lift
from .limitspec import estimate_spectrum_general, infinite_spectrum_scan
from .spectra import SpectrumSet, adjacency_matrix, hausdorff_distance, restrict_nontrivial, spectrum

SCHEMA_VERSION = 1
EXIT_VALIDATION, EXIT_CONSTRUCTION, EXIT_NUMERIC = 2, 3, 4


def _versions() -> dict:
    out = {"polylift": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "networkx", "click"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _fail(ctx: click.Context, exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    diag = getattr(exc, "diagnostics", None)
    if diag:
        click.echo(json.dumps({"diagnostics": diag}, default=str), err=True)
    ctx.exit(code)


class _Group(click.Group):
    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except ConstructionFailed as exc:
            _fail(ctx, exc, EXIT_CONSTRUCTION)
        except (NumericRegimeError, SingularityError) as exc:
            _fail(ctx, exc, EXIT_NUMERIC)
        except (ValidationError, SizeGuardError, OSError, json.JSONDecodeError) as exc:
            _fail(ctx, exc, EXIT_VALIDATION)


def _emit(ctx: click.Context, result, seeds=None) -> None:
    root = ctx.find_root()
    command = " ".join(ctx.command_path.split()[1:])
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "result": result}
    click.echo(json.dumps(doc, sort_keys=True, default=_jsonable))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "argv": root.obj["argv"],
        "params": {k: v for k, v in ctx.params.items()},
        "seeds": seeds,
        "versions": _versions(),
        "wall_clock": round(time.perf_counter() - root.obj["start"], 6),
    }
    text = json.dumps(manifest, sort_keys=True, default=_jsonable)
    if root.obj.get("manifest"):
        Path(root.obj["manifest"]).write_text(text + "\n")
    else:
        click.echo(f"manifest: {text}", err=True)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _read(path: str):
    return json.loads(Path(path).read_text())


def _unwrap(data, *keys):
    if isinstance(data, dict) and "result" in data and "schema_version" in data:
        data = data["result"]
    for k in keys:
        if isinstance(data, dict) and k in data:
            data = data[k]
    return data


def load_polynomial(path: str) -> MatrixPolynomial:
    return MatrixPolynomial.from_json(_unwrap(_read(path), "polynomial"))


def load_lift(path: str) -> Lift:
    return Lift.from_json(_unwrap(_read(path), "lift"))


def load_spectrum(path: str) -> SpectrumSet:
    data = _unwrap(_read(path))
    if isinstance(data, dict) and "spectrum" in data:
        data = data["spectrum"]
    return SpectrumSet.from_json(data)


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"seeds must be comma-separated integers: {text!r}") from exc


@click.group(cls=_Group)
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1), help="Worker cap for parallel seed trials.")
@click.option("--manifest", type=click.Path(dir_okay=False), default=None, help="Write the run manifest here instead of stderr.")
@click.version_option(__version__, prog_name="polylift")
@click.pass_context
def main(ctx: click.Context, jobs: int, manifest: str | None) -> None:
    """Matrix-polynomial lifts: spectra, infinite spectra and certified constructions."""
    ctx.ensure_object(dict)
    ctx.obj.update(jobs=jobs, manifest=manifest, start=time.perf_counter(), argv=ctx.obj.get("argv", sys.argv[1:]))


@main.command("spectrum")
@click.argument("poly", type=click.Path(exists=True, dir_okay=False))
@click.option("--lift", "lift_path", type=click.Path(exists=True, dir_okay=False), help="Lift JSON file.")
@click.option("--random", "random_n", type=int, help="Use a uniformly random lift of this size.")
@click.option("--seed", default=0, show_default=True, help="Seed for --random.")
@click.option("--signed", "signed_seed", type=int, default=None, help="Apply a random signing with this seed.")
@click.option("--all-plus", is_flag=True, help="Apply the all-plus signing.")
@click.option("--perp", is_flag=True, help="Drop one copy of the trivial eigenvalues.")
@click.pass_context
def cmd_spectrum(ctx, poly, lift_path, random_n, seed, signed_seed, all_plus, perp):
    """Sorted spectrum of A_n; with no lift given, the 1-lift p(1, ..., 1)."""
    p = load_polynomial(poly)
    if lift_path and random_n is not None:
        raise ValidationError("use either --lift or --random")
    if not lift_path and random_n is None:
        if perp or signed_seed is not None or all_plus:
            raise ValidationError("the 1-lift takes no signing and has no nontrivial part")
        spec = spectrum(p.evaluate_at_ones())
        _emit(ctx, {"n": 1, "r": p.r, "perp": False, "spectrum": spec.to_json()})
        return
    lift = load_lift(lift_path) if lift_path else random_lift(p.index_set, random_n, seed)
    chi = None
    if signed_seed is not None and all_plus:
        raise ValidationError("use either --signed or --all-plus")
    if signed_seed is not None:
        chi = Signing.random(lift, signed_seed)
    elif all_plus:
        chi = Signing.ones(lift)
    A = adjacency_matrix(lift, p, chi)
    if perp:
        A = restrict_nontrivial(A, lift.n, p.r)
    spec = spectrum(A)
    _emit(ctx, {"n": lift.n, "r": p.r, "perp": perp, "spectrum": spec.to_json()}, seeds={"lift": seed, "signing": signed_seed})


@main.command("infinite")
@click.argument("poly", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["resolvent", "lift"]), default="resolvent", show_default=True)
@click.option("--lo", type=float, default=None)
@click.option("--hi", type=float, default=None)
@click.option("--step", type=float, default=0.05, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True, help="Bisection tolerance on edges.")
@click.option("--N", "N", type=int, default=2000, show_default=True, help="Lift size for --method lift.")
@click.option("--seeds", default="0", show_default=True, help="Comma-separated seeds for --method lift.")
@click.pass_context
def cmd_infinite(ctx, poly, method, lo, hi, step, tol, N, seeds):
    """Spectrum of the infinite lift as a union of intervals and points."""
    p = load_polynomial(poly)
    seed_list = _seed_list(seeds)
    if method == "resolvent":
        if not p.is_linear():
            raise UnsupportedInputError("the resolvent method needs a linear polynomial")
        S = infinite_spectrum_scan(MatrixBouquet.from_polynomial(p), lo, hi, step, tol)
        seed_list = None
    else:
        if N % 2 and p.index_set.d:
            raise ValidationError("N must be even when there are matching colors")
        S = estimate_spectrum_general(p, N, seed_list)
    _emit(ctx, S.to_json(), seeds=seed_list)


@main.command("construct")
@click.option("--d", default=3, show_default=True)
@click.option("--e", default=0, show_default=True)
@click.option("--r", default=1, show_default=True)
@click.option("--R", "R", default=1.0, show_default=True)
@click.option("--eps", default=0.3, show_default=True)
@click.option("--N", "N", default=64, show_default=True)
@click.option("--grid-delta", default=0.25, show_default=True)
@click.option("--n0", type=int, default=None)
@click.option("--power", type=int, default=None)
@click.option("--lam", type=int, default=None)
@click.option("--budget", default=256, show_default=True, help="Seed budget for the base lift.")
@click.option("--stage-budget", default=256, show_default=True, help="Seed budget per doubling stage.")
@click.option("--seed-offset", default=0, show_default=True)
@click.option("--no-structure", is_flag=True, help="Skip the bicycle-free and acyclic-ball checks.")
@click.option("--out-lift", type=click.Path(dir_okay=False), default=None)
@click.option("--out-cert", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def cmd_construct(ctx, d, e, r, R, eps, N, grid_delta, n0, power, lam, budget, stage_budget, seed_offset, no_structure, out_lift, out_cert):
    """Certified explicit lift by certify-and-double."""
    cfg = PipelineConfig(
        N=N,
        d=d,
        e=e,
        r=r,
        R=R,
        eps=eps,
        grid_delta=grid_delta,
        n0=n0,
        power=power,
        lam=lam,
        stage0_budget=budget,
        stage_budget=stage_budget,
        seed_offset=seed_offset,
        check_structure=not no_structure,
        jobs=ctx.find_root().obj["jobs"],
    )
    lift, cert = explicit_good_lift(None, cfg)
    cert_json = cert.to_json()
    config_json = {k: v for k, v in cfg.to_json().items() if k != "jobs"}
    if out_lift:
        Path(out_lift).write_text(json.dumps(lift.to_json()) + "\n")
    if out_cert:
        Path(out_cert).write_text(json.dumps({"config": config_json, "certificate": cert_json}, sort_keys=True) + "\n")
    _emit(ctx, {"config": config_json, "lift": lift.to_json(), "certificate": cert_json}, seeds=[s.seed for s in cert.stages])


@main.command("hausdorff")
@click.argument("first", type=click.Path(exists=True, dir_okay=False))
@click.argument("second", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cmd_hausdorff(ctx, first, second):
    """Hausdorff distance between two spectrum files."""
    _emit(ctx, {"hausdorff": hausdorff_distance(load_spectrum(first), load_spectrum(second))})


@main.group("catalog", cls=_Group)
def cmd_catalog():
    """Named polynomials for classical infinite graphs."""


@cmd_catalog.command("list")
@click.pass_context
def cmd_catalog_list(ctx):
    out = []
    for name in list_entries():
        entry = get_entry(name)
        out.append({"name": name, "note": entry.note, "r": entry.polynomial.r, "known_spectrum": entry.known_spectrum is not None})
    _emit(ctx, out)


@cmd_catalog.command("emit")
@click.argument("name")
@click.pass_context
def cmd_catalog_emit(ctx, name):
    _emit(ctx, get_entry(name).polynomial.to_json())


@main.group("csp", cls=_Group)
def cmd_csp():
    """Degree-2 CSP instances from signed lifts."""


@cmd_csp.command("gen")
@click.option("--atom", type=click.Choice(sorted(ATOMS)), default="nae3", show_default=True)
@click.option("--c", "c", default=4, show_default=True, help="Constraints in the base layout, all on the same scope.")
@click.option("--n", "n", default=100, show_default=True, help="Lift size.")
@click.option("--seed", default=0, show_default=True)
@click.option("--unsigned", is_flag=True, help="Use the all-plus signing.")
@click.pass_context
def cmd_csp_gen(ctx, atom, c, n, seed, unsigned):
    t = ATOMS[atom]
    layout = Layout(t.arity, tuple((t, tuple(range(t.arity))) for _ in range(c)))
    inst, _, _ = random_regular_instance(layout, n, seed, signed=not unsigned)
    _emit(ctx, inst.to_json(), seeds=[seed])


@cmd_csp.command("eig")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--brute", is_flag=True, help="Also compute the exact optimum (at most 20 variables).")
@click.pass_context
def cmd_csp_eig(ctx, path, brute):
    inst = CSPInstance.from_json(_unwrap(_read(path)))
    bound = eig_bound(inst)
    out = {
        "n": inst.n,
        "constraints": len(inst.constraints),
        "eig_bound": bound,
        "lambda_max": bound / inst.n if inst.n else 0.0,
        "constant_offset": inst.constant_offset,
    }
    if brute:
        out["opt"] = brute_force_opt(inst)
    if inst.n and not np.isfinite(instance_graph(inst)).all():
        raise NumericRegimeError("instance graph has non-finite entries")
    _emit(ctx, out)


@main.command("check")
@click.argument("lift_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("poly", type=click.Path(exists=True, dir_okay=False))
@click.option("--radius", default=2, show_default=True, help="Radius for cover and bicycle checks.")
@click.option("--depth", default=2, show_default=True, help="Ball depth for the tree decomposition.")
@click.pass_context
def cmd_check(ctx, lift_path, poly, radius, depth):
    """Structural report: connectivity, local cover, bicycle-free radius, treewidth."""
    lift = load_lift(lift_path)
    p = load_polynomial(poly)
    connected, gap = random_walk_connectivity(extend(lift, p))
    G = lift_graph(lift)
    td = tree_decomposition_ball(p, depth)
    m = sum(max(len(w), 1) for w in p.terms)
    report = {
        "connected": connected,
        "spectral_gap": gap,
        "local_cover": local_cover_check(lift, p, radius),
        "bicycle_free_radius": bicycle_free_radius(G, radius),
        "acyclic_ball_vertex": acyclic_ball_vertex(G, radius),
        "treewidth": {"width": td.width, "bound": (m + 1) * p.r - 1, "violations": check_tree_decomposition(td)},
    }
    _emit(ctx, report)


@main.command("replay")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cmd_replay(ctx, manifest_path):
    """Re-run the command recorded in a manifest file."""
    argv = _read(manifest_path).get("argv")
    if not isinstance(argv, list) or (argv and argv[0] == "replay"):
        raise ValidationError("manifest has no replayable argv")
    main.main(args=[str(a) for a in argv], prog_name="polylift", standalone_mode=False, obj={"argv": argv})


def run() -> None:
    main(obj={"argv": sys.argv[1:]})


if __name__ == "__main__":
    run()
