"""``tvbar`` command line.

Exit codes: 0 success, 1 domain error, 2 I/O error, 64 usage error.
"""
from __future__ import annotations

import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import __version__
from .barcode import BarCode, GeneratorConfig, generate
from .certify import certify as certify_params
from .convolve import (
    GridSignal,
    GridSpec,
    appendix_A_closed_forms,
    grid_convolve,
    hat_convolve,
    quadrature_oracle,
    sample,
    signal_from_csv,
    signal_from_json,
    signal_to_csv,
    signal_to_json,
)
from .energy import EnergyParams, dual_norm, evaluate, trivial_thresholds
from .exceptions import TVBarError
from .kernel import Kernel, check_class_K, check_condition_J
from .oracle import SearchSpace, minimize
from .piecewise import PiecewisePoly
from .solver import NoiseConfig, SolverConfig, add_noise, deblur as run_solver

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64


class InputError(Exception):
    """Unreadable or malformed input file."""


@dataclass
class RunManifest:
    command: str
    parameters: dict
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: Optional[int] = None
    argv: list = field(default_factory=list)
    tool_version: str = __version__
    python: str = platform.python_version()
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, default=str)


class _Ctx:
    def __init__(self, command: str, params: dict, seed: Optional[int] = None):
        self.manifest = RunManifest(command, {k: v for k, v in params.items()}, seed=seed,
                                    argv=list(sys.argv[1:]))
        self.t0 = time.perf_counter()
        self.manifest_path = params.get("manifest")

    def read(self, path: str) -> str:
        self.manifest.inputs.append(path)
        try:
            if path == "-":
                return sys.stdin.read()
            return Path(path).read_text()
        except OSError as exc:
            raise InputError(str(exc)) from exc

    def write(self, path: Optional[str], text: str) -> None:
        if path is None or path == "-":
            click.echo(text, nl=not text.endswith("\n"))
            self.manifest.outputs.append("-")
            return
        try:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        except OSError as exc:
            raise InputError(str(exc)) from exc
        self.manifest.outputs.append(path)

    def finish(self) -> None:
        self.manifest.wall_time = time.perf_counter() - self.t0
        target = self.manifest_path
        if target is None:
            files = [o for o in self.manifest.outputs if o != "-"]
            if not files:
                return
            target = files[0] + ".manifest.json"
        try:
            Path(target).write_text(self.manifest.to_json())
        except OSError as exc:
            raise InputError(str(exc)) from exc


def _seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("TVBAR_SEED")
    return int(env) if env else 0


def _parse_input(text: str):
    """A bar code, or a signal in JSON or CSV."""
    stripped = text.lstrip()
    try:
        if stripped.startswith("{"):
            data = json.loads(stripped)
            if "interfaces" in data:
                return BarCode.from_dict(data), data
            if data.get("representation") == "grid":
                return GridSignal.from_dict(data), data
            return PiecewisePoly.from_dict(data), data
        return signal_from_csv(text), {}
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        if isinstance(exc, TVBarError):
            raise
        raise InputError(f"cannot parse input: {exc}") from exc


def _kernel(kind: str, size: float) -> Kernel:
    return Kernel.hat(size) if kind == "hat" else Kernel.gaussian(size)


def _endpoints(text: Optional[str]):
    if not text:
        return None
    i, j = (int(v) for v in text.split(","))
    return (i, j)


def _strict_gate(strict: bool, functional: str, omega, sigma, lam, rho):
    if omega is None:
        return
    cert = certify_params(functional, omega, sigma, lam, rho)
    if cert.verdict:
        return
    msg = "parameters are outside the proven regime:\n" + cert.table()
    if strict:
        raise TVBarError(msg)
    click.echo("warning: " + msg, err=True)


MANIFEST = click.option("--manifest", type=click.Path(dir_okay=False), default=None,
                        help="Where to write the run manifest (default: next to the first output file).")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="tvbar")
def main():
    """Blur and deblur 1D bar codes by total-variation minimisation."""


@main.command()
@click.option("--omega", type=float, required=True, help="X-dimension (minimum bar/space width).")
@click.option("--max-bars", type=int, default=40, show_default=True)
@click.option("--endpoints", default=None, help="Endpoint constraint 'i,j' with i, j in {0,1}.")
@click.option("--seed", type=int, default=None, help="RNG seed (default TVBAR_SEED or 0).")
@click.option("--out", "-o", default=None, help="Output JSON path (default stdout).")
@MANIFEST
def synth(omega, max_bars, endpoints, seed, out, manifest):
    """Generate a random bar code with the given X-dimension."""
    seed = _seed(seed)
    ctx = _Ctx("synth", dict(omega=omega, max_bars=max_bars, endpoints=endpoints, manifest=manifest), seed)
    code = generate(GeneratorConfig(omega, max_bars, _endpoints(endpoints), seed))
    d = code.to_dict()
    d["omega"] = omega
    ctx.write(out, json.dumps(d))
    ctx.finish()


@main.command()
@click.option("--input", "-i", "inp", default="-", help="Bar code JSON (default stdin).")
@click.option("--kernel", type=click.Choice(["hat", "gaussian"]), default="hat", show_default=True)
@click.option("--sigma", type=float, required=True)
@click.option("--omega", type=float, default=None, help="Grid spacing omega/400 (default: from the input code).")
@click.option("--h", type=float, default=None, help="Explicit grid spacing.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "poly"]), default="csv", show_default=True,
              help="csv/json: sampled grid; poly: exact piecewise polynomial (hat only).")
@click.option("--out", "-o", default=None)
@MANIFEST
def blur(inp, kernel, sigma, omega, h, fmt, out, manifest):
    """Convolve a bar code with a blurring kernel."""
    ctx = _Ctx("blur", dict(input=inp, kernel=kernel, sigma=sigma, omega=omega, h=h, format=fmt, manifest=manifest))
    code, meta = _parse_input(ctx.read(inp))
    if not isinstance(code, BarCode):
        raise InputError("blur expects a bar code JSON")
    omega = omega or meta.get("omega")
    k = _kernel(kernel, sigma)
    if fmt == "poly":
        if kernel != "hat":
            raise TVBarError("exact piecewise output is only available for the hat kernel")
        ctx.write(out, signal_to_json(hat_convolve(code, sigma)))
    else:
        spec = None
        if h is not None:
            lo = (code.interfaces[0] if code.interfaces else 0.0) - k.support_radius
            hi = (code.interfaces[-1] if code.interfaces else 1.0) + k.support_radius
            spec = GridSpec.covering(lo, hi, h)
        sig = grid_convolve(code, k, spec, omega=omega)
        sig.meta.update({"omega": omega, "truth": list(code.interfaces), "kernel": k.to_dict()})
        ctx.write(out, signal_to_json(sig) if fmt == "json" else signal_to_csv(sig))
    ctx.finish()


@main.command()
@click.option("--input", "-i", "inp", default="-", help="Signal CSV/JSON (default stdin).")
@click.option("--amplitude", "-a", type=float, default=0.1, show_default=True)
@click.option("--omega", type=float, default=None, help="X-dimension fixing the noise blocks.")
@click.option("--seed", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", "-o", default=None)
@MANIFEST
def noise(inp, amplitude, omega, seed, fmt, out, manifest):
    """Add block-constant uniform noise (16 blocks per omega)."""
    seed = _seed(seed)
    ctx = _Ctx("noise", dict(input=inp, amplitude=amplitude, omega=omega, format=fmt, manifest=manifest), seed)
    sig, meta = _parse_input(ctx.read(inp))
    if isinstance(sig, BarCode):
        raise InputError("noise expects a signal")
    omega = omega or (sig.meta.get("omega") if isinstance(sig, GridSignal) else None)
    if omega is None:
        raise TVBarError("noise needs --omega (the noise blocks are defined per omega)")
    noisy = add_noise(sig, NoiseConfig(amplitude, seed), omega)
    noisy.meta["omega"] = omega
    ctx.write(out, signal_to_json(noisy) if fmt == "json" else signal_to_csv(noisy))
    ctx.finish()


@main.command()
@click.option("--input", "-i", "inp", default="-", help="Observed signal CSV/JSON (default stdin).")
@click.option("--functional", type=click.Choice(["F1", "F2", "F3"]), default="F2", show_default=True)
@click.option("--sigma", type=float, default=None, help="Blur size (F2 deblurs with it).")
@click.option("--rho", type=float, default=None, help="Deblur size (F3).")
@click.option("--kernel", type=click.Choice(["hat", "gaussian"]), default="hat", show_default=True,
              help="Deblurring kernel family.")
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--epsilon", type=float, default=4e-4, show_default=True)
@click.option("--omega", type=float, default=None, help="Grid h = omega/400 and certificate check.")
@click.option("--h", type=float, default=None)
@click.option("--init", type=click.Choice(["zero", "half"]), default="zero", show_default=True)
@click.option("--max-steps", type=int, default=400_000, show_default=True)
@click.option("--steady-tol", type=float, default=1e-8, show_default=True)
@click.option("--truth", default=None, help="Generating code JSON for the plot.")
@click.option("--out-dir", default=None, help="Write field.csv, code.json, plot.svg and a manifest here.")
@click.option("--seed", type=int, default=None, help="Recorded in the manifest (the flow is deterministic).")
@click.option("--strict", is_flag=True, help="Refuse parameters outside the proven regime.")
@MANIFEST
def deblur(inp, functional, sigma, rho, kernel, lam, epsilon, omega, h, init, max_steps, steady_tol,
           truth, out_dir, seed, strict, manifest):
    """Run the phase-field flow and threshold the steady state."""
    seed = _seed(seed)
    params = dict(input=inp, functional=functional, sigma=sigma, rho=rho, kernel=kernel, lam=lam,
                  epsilon=epsilon, omega=omega, h=h, init=init, max_steps=max_steps,
                  steady_tol=steady_tol, truth=truth, out_dir=out_dir, strict=strict, manifest=manifest)
    ctx = _Ctx("deblur", params, seed)
    sig, meta = _parse_input(ctx.read(inp))
    if isinstance(sig, BarCode):
        raise InputError("deblur expects a signal, not a bar code")
    gmeta = sig.meta if isinstance(sig, GridSignal) else {}
    omega = omega or gmeta.get("omega")
    if sigma is None and "kernel" in gmeta:
        sigma = gmeta["kernel"]["size"]
    if functional == "F2" and sigma is None:
        raise TVBarError("F2 needs --sigma")
    if functional == "F3" and rho is None:
        raise TVBarError("F3 needs --rho")
    if sigma is not None:
        _strict_gate(strict, functional, omega, sigma, lam, rho)
    deblur_k = None
    if functional == "F2":
        deblur_k = _kernel(kernel, sigma)
    elif functional == "F3":
        deblur_k = _kernel(kernel, rho)
    cfg = SolverConfig(lam=lam, epsilon=epsilon, kernel_blur=_kernel(kernel, sigma) if sigma else None,
                       kernel_deblur=deblur_k, max_steps=max_steps, steady_tol=steady_tol, init=init,
                       h=h, omega=omega)
    res = run_solver(sig, cfg)
    if not res.converged:
        click.echo(f"warning: not converged after {res.steps} steps", err=True)
    code_json = json.dumps(dict(res.code.to_dict(), solver=res.summary()))
    if out_dir is None:
        ctx.write(None, code_json)
    else:
        d = Path(out_dir)
        ctx.write(str(d / "code.json"), code_json)
        ctx.write(str(d / "field.csv"), signal_to_csv(res.u_field))
        truth_code = None
        if truth is not None:
            truth_code, _ = _parse_input(ctx.read(truth))
        elif "truth" in gmeta:
            truth_code = BarCode(tuple(gmeta["truth"]))
        from .plot import overlay_svg
        obs = sig if isinstance(sig, GridSignal) else sample(sig, res.u_field.spec)
        ctx.write(str(d / "plot.svg"), overlay_svg(obs, res.u_field, res.code, truth_code,
                                                    f"{functional}, lambda={lam:g}"))
        if manifest is None:
            ctx.manifest_path = str(d / "manifest.json")
    ctx.finish()


@main.command()
@click.option("--functional", type=click.Choice(["F1", "F2", "F3"]), required=True)
@click.option("--omega", type=float, required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--rho", type=float, default=None)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table", show_default=True)
@click.option("--strict", is_flag=True, help="Exit 1 when the verdict is false.")
@click.option("--out", "-o", default=None)
@MANIFEST
def certify(functional, omega, sigma, rho, lam, fmt, strict, out, manifest):
    """Evaluate the sufficient conditions for exact recovery."""
    ctx = _Ctx("certify", dict(functional=functional, omega=omega, sigma=sigma, rho=rho, lam=lam,
                               format=fmt, strict=strict, manifest=manifest))
    cert = certify_params(functional, omega, sigma, lam, rho)
    ctx.write(out, cert.to_json() if fmt == "json" else cert.table())
    ctx.finish()
    if strict and not cert.verdict:
        raise TVBarError("outside proven regime")


def _observation(obj, sigma):
    if isinstance(obj, BarCode):
        if sigma is None:
            raise TVBarError("--sigma is needed to blur a bar code input")
        return hat_convolve(obj, sigma), obj
    return obj, None


@main.command()
@click.option("--input", "-i", "inp", default="-", help="Generating code JSON (blurred exactly) or a signal.")
@click.option("--functional", type=click.Choice(["F1", "F2", "F3"]), default="F2", show_default=True)
@click.option("--sigma", type=float, required=True)
@click.option("--rho", type=float, default=None)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--grid-points", "-m", type=int, default=21, show_default=True)
@click.option("--max-interfaces", type=int, default=6, show_default=True)
@click.option("--endpoints", default=None)
@click.option("--extra", multiple=True, help="Extra candidate code JSON files.")
@click.option("--budget", type=int, default=5_000_000, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--omega", type=float, default=None, help="Certificate check for --strict.")
@click.option("--strict", is_flag=True)
@click.option("--out", "-o", default=None)
@MANIFEST
def oracle(inp, functional, sigma, rho, lam, grid_points, max_interfaces, endpoints, extra, budget, jobs,
           omega, strict, out, manifest):
    """Exhaustive minimisation over grid-interface bar codes."""
    ctx = _Ctx("oracle", dict(input=inp, functional=functional, sigma=sigma, rho=rho, lam=lam,
                              grid_points=grid_points, max_interfaces=max_interfaces, endpoints=endpoints,
                              extra=list(extra), budget=budget, jobs=jobs, omega=omega, strict=strict,
                              manifest=manifest))
    obj, _ = _parse_input(ctx.read(inp))
    f, z = _observation(obj, sigma)
    _strict_gate(strict, functional, omega, sigma, lam, rho)
    extras = []
    for path in extra:
        c, _ = _parse_input(ctx.read(path))
        extras.append(c)
    if z is not None:
        extras.insert(0, z)
    space = SearchSpace(grid_points, max_interfaces, _endpoints(endpoints), tuple(extras))
    res = minimize(space, f, EnergyParams(functional, lam, sigma, rho), budget=budget, jobs=jobs)
    d = res.to_dict()
    if z is not None:
        d["generating_code_recovered"] = bool(
            len(res.minimizer) == len(z)
            and np.allclose(res.minimizer.interfaces, z.interfaces, rtol=0, atol=1e-12)
        )
        d["generating_code_report"] = evaluate(z, f, EnergyParams(functional, lam, sigma, rho)).to_dict()
    ctx.write(out, json.dumps(d, indent=2))
    ctx.finish()


@main.command()
@click.option("--input", "-i", "inp", default="-", help="Bar code JSON or signal.")
@click.option("--sigma", type=float, default=None, help="Blur a bar code input with the hat kernel.")
@click.option("--rho", type=float, default=0.0, show_default=True, help="Extra hat convolution before the norm.")
@click.option("--out", "-o", default=None)
@MANIFEST
def dualnorm(inp, sigma, rho, out, manifest):
    """Dual norm of phi_rho * f and the empty-code thresholds."""
    ctx = _Ctx("dualnorm", dict(input=inp, sigma=sigma, rho=rho, manifest=manifest))
    obj, _ = _parse_input(ctx.read(inp))
    f, z = _observation(obj, sigma)
    g = f
    if rho:
        g = f.convolve_hat(rho) if isinstance(f, PiecewisePoly) else grid_convolve(f, Kernel.hat(rho), f.spec)
    d = {"dual_norm": dual_norm(g), "rho": rho}
    if z is not None and not z.is_empty():
        functional = "F1" if not rho else ("F2" if rho == sigma else "F3")
        th = trivial_thresholds(z, EnergyParams(functional, 1.0, sigma, rho if functional == "F3" else None))
        d.update(lambda_star=th.lambda_star, lambda_0=th.lambda_0, functional=functional)
    ctx.write(out, json.dumps(d, indent=2))
    ctx.finish()


@main.command("kernel-check")
@click.option("--kernel", type=click.Choice(["hat", "gaussian", "box", "tabulated"]), default="hat", show_default=True)
@click.option("--sigma", type=float, default=0.1, show_default=True)
@click.option("--profile", default=None, help="Tabulated profile JSON {\"x\": [...], \"p\": [...]}.")
@click.option("--full-grid", is_flag=True, help="Evaluate every (tau, c, x) sample, no shortcuts.")
@click.option("--out", "-o", default=None)
@MANIFEST
def kernel_check(kernel, sigma, profile, full_grid, out, manifest):
    """Class membership and the double-convolution condition J <= 0."""
    ctx = _Ctx("kernel-check", dict(kernel=kernel, sigma=sigma, profile=profile, full_grid=full_grid,
                                    manifest=manifest))
    if kernel == "hat":
        k = Kernel.hat(sigma)
    elif kernel == "gaussian":
        k = Kernel.gaussian(sigma)
    elif kernel == "box":
        k = Kernel.tabulated([0.0, 1.0], [1.0, 1.0], size=sigma)
    else:
        if profile is None:
            raise TVBarError("--profile is required for a tabulated kernel")
        d = json.loads(ctx.read(profile))
        k = Kernel.tabulated(d["x"], d["p"], size=sigma)
    rep = check_condition_J(k, use_shortcuts=not full_grid)
    ctx.write(out, json.dumps(dict(kernel=k.to_dict(), class_K=check_class_K(k), **rep.to_dict()), indent=2))
    ctx.finish()


def paper_check_battery(n_sets: int = 4, seed: int = 0) -> list[dict]:
    """Closed forms against quadrature plus the hat-kernel J check."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_sets):
        big, small = sorted(rng.uniform(0.01, 0.05, size=2), reverse=True)
        N = rng.uniform(2 * big, 0.4)
        a = rng.uniform(big + small, 1 - N - big - small)
        for case, kw in (
            ("Ia", dict(rho=big, sigma=small)),
            ("Ib", dict(rho=small, sigma=big)),
            ("II_first", dict(rho=big)),
            ("IIa", dict(rho=big, sigma=small)),
            ("IIb", dict(rho=small, sigma=big)),
        ):
            closed = appendix_A_closed_forms(case, N=N, a=a, **kw)
            quad = quadrature_oracle(case, N=N, a=a, **kw)
            rows.append(dict(check=case, params=dict(N=N, a=a, **kw), closed=closed, quadrature=quad,
                             passed=bool(abs(closed - quad) < 1e-6)))
        lo = rng.uniform(0.0, 0.4)
        b = lo + rng.uniform(0.1, 0.6)
        s = rng.uniform(0.001, (b - lo) / 2)
        closed = appendix_A_closed_forms("fsigma_sq", a=lo, b=b, sigma=s)
        quad = quadrature_oracle("fsigma_sq", a=lo, b=b, sigma=s)
        rows.append(dict(check="fsigma_sq", params=dict(a=lo, b=b, sigma=s), closed=closed,
                         quadrature=quad, passed=bool(abs(closed - quad) < 1e-6)))
    hat = Kernel.hat(0.1)
    rep = check_condition_J(hat)
    rows.append(dict(check="hat in class K", passed=bool(check_class_K(hat))))
    rows.append(dict(check="hat J condition", worst_J=rep.worst_J, passed=rep.in_K3))
    return rows


@main.command("paper-check")
@click.option("--sets", type=int, default=4, show_default=True, help="Random parameter sets per case.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "-o", default=None)
@MANIFEST
def paper_check(sets, seed, out, manifest):
    """Closed-form integrals vs quadrature and the hat-kernel admissibility."""
    seed = _seed(seed)
    ctx = _Ctx("paper-check", dict(sets=sets, manifest=manifest), seed)
    rows = paper_check_battery(sets, seed)
    ok = all(r["passed"] for r in rows)
    ctx.write(out, json.dumps({"passed": ok, "checks": rows}, indent=2))
    ctx.finish()
    if not ok:
        raise TVBarError("paper-check failed")


def run(argv=None) -> int:
    """Entry point returning an exit code instead of exiting."""
    try:
        main.main(args=list(argv) if argv is not None else None, prog_name="tvbar", standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help() if exc.ctx else str(exc), err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return EXIT_DOMAIN
    except (InputError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    except (TVBarError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DOMAIN
    return EXIT_OK


def entry() -> None:
    sys.exit(run())
