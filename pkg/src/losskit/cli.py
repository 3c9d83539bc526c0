"""Reproducible command-line experiments with CSV/JSON output.

Each subcommand loads a flat ``key = value`` config file, applies flag
overrides, runs a seeded simulation, and writes rows in one fixed schema:

    experiment, input, code_n, code_m, lost, branch, alpha,
    fidelity, sigma, settings, shots, seed

Non-applicable cells are left empty.  CSV output starts with ``#``-prefixed
lines echoing the fully resolved configuration, so every file is
self-describing; the data section uses RFC-4180 quoting.  Identical config
plus seed yields byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from io import StringIO
from itertools import product
from pathlib import Path
from typing import Sequence

import click
import numpy as np

from .codes import CodeParams, LogicalInput, PRESETS, encode
from .cluster import LOSS_CASES, loss_tolerant_rotation, phi5
from .qsim import DensityMatrix, NoiseSpec, Seed, apply_channel, fidelity_pure
from .recovery import LossPattern, erase, execute_recovery, plan_recovery
from .tomography import decompose_projector, estimate_fidelity, group_settings, simulate_counts

EXPERIMENTS = ("encode", "recover", "cluster-fidelity", "oneway")
CSV_COLUMNS = ("experiment", "input", "code_n", "code_m", "lost", "branch",
               "alpha", "fidelity", "sigma", "settings", "shots", "seed")


class ConfigError(click.UsageError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"config field '{field_name}': {message}")
        self.field_name = field_name


class NumericalFailure(click.ClickException):
    exit_code = 3


@dataclass
class ExperimentConfig:
    experiment: str = ""
    inputs: tuple[str, ...] = ("V", "PLUS", "R")
    code_n: int = 2
    code_m: int = 2
    noise_v: float = 1.0
    noise_d: float = 0.0
    noise_visibility: float = 1.0
    dephase_pairs: str = ""
    shots: int = 10000
    seed: int = 1
    format: str = "csv"
    out: str = ""
    alphas: tuple[float, ...] = (0.0, -math.pi / 2, -math.pi / 3)
    lost: str = "all"
    force_branch: str = ""

    def echo_items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            if f.name == "out":  # the file should not echo its own location
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(_fmt_number(v) if isinstance(v, float) else str(v)
                                 for v in value)
            out.append((f.name, str(value)))
        return sorted(out)


def _fmt_number(x: float) -> str:
    return format(x, ".9f")


def _parse_angle(token: str, key: str) -> float:
    text = token.strip().lower().replace(" ", "")
    sign = 1.0
    if text.startswith(("-", "+")):
        if text[0] == "-":
            sign = -1.0
        text = text[1:]
    if "pi" in text:
        left, _, right = text.partition("pi")
        try:
            factor = float(left) if left else 1.0
            if right.startswith("/"):
                factor /= float(right[1:])
            elif right:
                raise ValueError
        except ValueError:
            raise ConfigError(key, f"cannot parse angle {token!r}") from None
        return sign * factor * math.pi
    try:
        return sign * float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse angle {token!r}") from None


def _parse_pairs(text: str, key: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(key, f"pair {chunk!r} must look like i:j")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(key, f"pair {chunk!r} must be integer indices") from None
    return tuple(pairs)


_INT_KEYS = {"code_n", "code_m", "shots", "seed"}
_FLOAT_KEYS = {"noise_v", "noise_d", "noise_visibility"}
_STR_KEYS = {"experiment", "dephase_pairs", "format", "out", "lost", "force_branch"}


def parse_config(path: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _INT_KEYS:
            try:
                setattr(cfg, key, int(value))
            except ValueError:
                raise ConfigError(key, f"expected an integer, got {value!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(value))
            except ValueError:
                raise ConfigError(key, f"expected a number, got {value!r}") from None
        elif key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key == "inputs":
            cfg.inputs = tuple(tok.strip() for tok in value.split(",") if tok.strip())
        elif key == "alphas":
            cfg.alphas = tuple(_parse_angle(tok, "alphas")
                               for tok in value.split(",") if tok.strip())
        else:
            raise ConfigError(key, "unknown configuration key")
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.code_n < 2:
        raise ConfigError("code_n", f"block size must be >= 2, got {cfg.code_n}")
    if cfg.code_m < 1:
        raise ConfigError("code_m", f"block count must be >= 1, got {cfg.code_m}")
    for name in cfg.inputs:
        if name not in PRESETS:
            raise ConfigError("inputs", f"unknown input preset {name!r}")
    for key, value in (("noise_v", cfg.noise_v), ("noise_d", cfg.noise_d),
                       ("noise_visibility", cfg.noise_visibility)):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(key, f"must lie in [0, 1], got {value}")
    if cfg.shots < 1:
        raise ConfigError("shots", "must be >= 1")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format", f"must be csv or json, got {cfg.format!r}")
    total = cfg.code_n * cfg.code_m
    if cfg.experiment == "encode" and total > 6:
        raise ConfigError("code_n", "encode tomography supports at most 6 physical qubits")
    if cfg.experiment in ("encode", "recover") and total > 12:
        raise ConfigError("code_n", "codes are limited to 12 physical qubits")
    if cfg.dephase_pairs not in ("", "auto"):
        pairs = _parse_pairs(cfg.dephase_pairs, "dephase_pairs")
        limit = total if cfg.experiment in ("encode", "recover") else 5
        for i, j in pairs:
            if not (0 <= i < limit and 0 <= j < limit) or i == j:
                raise ConfigError("dephase_pairs", f"pair ({i}, {j}) out of range")
    if cfg.experiment == "oneway":
        for case in _oneway_cases(cfg):
            if case not in LOSS_CASES:
                raise ConfigError("lost", f"unsupported loss case {case!r}; "
                                          f"expected photon2/photon4")
    if cfg.force_branch:
        bits = _branch_bits(cfg.force_branch)
        if bits is None:
            raise ConfigError("force_branch", f"expected outcome bits, got {cfg.force_branch!r}")


def _branch_bits(text: str) -> tuple[int, ...] | None:
    cleaned = text.replace(",", "").replace(" ", "")
    if not cleaned or any(c not in "01" for c in cleaned):
        return None
    return tuple(int(c) for c in cleaned)


def _oneway_cases(cfg: ExperimentConfig) -> tuple[str, ...]:
    if cfg.lost in ("all", "both", ""):
        return tuple(sorted(LOSS_CASES))
    return tuple(tok.strip() for tok in cfg.lost.split(",") if tok.strip())


def _noise(cfg: ExperimentConfig) -> NoiseSpec:
    return NoiseSpec(white_noise_v=cfg.noise_v, pair_dephasing_d=cfg.noise_d,
                     epr_visibility=cfg.noise_visibility)


def _noise_pairs(cfg: ExperimentConfig, input_name: str,
                 params: CodeParams | None) -> tuple[tuple[int, int], ...]:
    """Interfering-pair placement for the noise channel.

    ``auto`` mirrors the lab layout: for the (2, 2) code the V input
    interferes on two beam-splitter pairs and the other inputs on three;
    for the cluster experiments the imperfect pair source sits on photons
    1 and 2.  Explicit placements are taken verbatim.
    """
    if cfg.dephase_pairs == "":
        return ()
    if cfg.dephase_pairs != "auto":
        return _parse_pairs(cfg.dephase_pairs, "dephase_pairs")
    if params is None:
        return ((0, 1),)
    chain = tuple((q, q + 1) for q in range(params.total - 1))
    if (params.n, params.m) == (2, 2) and input_name == "V":
        return chain[1:]
    return chain


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    input: str = ""
    code_n: int | None = None
    code_m: int | None = None
    lost: str = ""
    branch: str = ""
    alpha: float | None = None
    fidelity: float | None = None
    sigma: float | None = None
    settings: int | None = None
    shots: int | None = None
    seed: int | None = None

    def as_strings(self) -> list[str]:
        def fmt(value, number=False):
            if value is None:
                return ""
            if number:
                return _fmt_number(value)
            return str(value)

        return [self.experiment, self.input, fmt(self.code_n), fmt(self.code_m),
                self.lost, self.branch, fmt(self.alpha, True),
                fmt(self.fidelity, True), fmt(self.sigma, True),
                fmt(self.settings), fmt(self.shots), fmt(self.seed)]

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment, "input": self.input,
            "code_n": self.code_n, "code_m": self.code_m, "lost": self.lost,
            "branch": self.branch,
            "alpha": None if self.alpha is None else round(self.alpha, 9),
            "fidelity": None if self.fidelity is None else round(self.fidelity, 9),
            "sigma": None if self.sigma is None else round(self.sigma, 9),
            "settings": self.settings, "shots": self.shots, "seed": self.seed,
        }


def _csv_quote(cell: str) -> str:
    if any(c in cell for c in ',"\n'):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def render_output(cfg: ExperimentConfig, rows: Sequence[ResultRow]) -> str:
    if cfg.format == "json":
        doc = {"config": dict(cfg.echo_items()),
               "rows": [row.as_dict() for row in rows]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = StringIO()
    for key, value in cfg.echo_items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_csv_quote(cell) for cell in row.as_strings()) + "\n")
    return buf.getvalue()


def _tomography_row(cfg: ExperimentConfig, name: str, psi, rho,
                    stream_key: int) -> ResultRow:
    decomp = decompose_projector(psi)
    settings = group_settings(decomp)
    master = Seed(cfg.seed)
    tables = [
        simulate_counts(rho, setting, cfg.shots, master.stream(stream_key, i))
        for i, setting in enumerate(settings)
    ]
    fid, sigma = estimate_fidelity(tables, decomp)
    return ResultRow(experiment=cfg.experiment, input=name, fidelity=fid,
                     sigma=sigma, settings=len(settings), shots=cfg.shots,
                     seed=cfg.seed)


def run_encode(cfg: ExperimentConfig) -> list[ResultRow]:
    params = CodeParams(cfg.code_n, cfg.code_m)
    noise = _noise(cfg)
    rows = []
    for i, name in enumerate(cfg.inputs):
        psi = encode(PRESETS[name], params)
        rho = psi.density()
        if not noise.is_noiseless():
            rho = apply_channel(rho, noise, ideal=psi,
                                interfering_pairs=_noise_pairs(cfg, name, params))
        row = _tomography_row(cfg, name, psi, rho, i)
        rows.append(replace(row, code_n=cfg.code_n, code_m=cfg.code_m))
    return rows


def run_cluster_fidelity(cfg: ExperimentConfig) -> list[ResultRow]:
    psi = phi5()
    rho = psi.density()
    noise = _noise(cfg)
    if not noise.is_noiseless():
        rho = apply_channel(rho, noise, ideal=psi,
                            interfering_pairs=_noise_pairs(cfg, "phi5", None))
    return [_tomography_row(cfg, "phi5", psi, rho, 0)]


def _branch_sigma(fid: float, shots: int) -> float:
    f = min(max(fid, 0.0), 1.0)
    if f < 1e-9 or f > 1.0 - 1e-9:  # suppress roundoff residue at the endpoints
        return 0.0
    return math.sqrt(f * (1.0 - f) / shots)


def run_recover(cfg: ExperimentConfig) -> list[ResultRow]:
    params = CodeParams(cfg.code_n, cfg.code_m)
    noise = _noise(cfg)
    if cfg.lost in ("all", ""):
        losses = list(range(params.total))
    else:
        try:
            losses = [int(tok) for tok in cfg.lost.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError("lost", f"expected qubit indices, got {cfg.lost!r}") from None
    forced = _branch_bits(cfg.force_branch) if cfg.force_branch else None
    rows = []
    for name in cfg.inputs:
        inp = PRESETS[name]
        psi = encode(inp, params)
        rho = psi.density()
        if not noise.is_noiseless():
            rho = apply_channel(rho, noise, ideal=psi,
                                interfering_pairs=_noise_pairs(cfg, name, params))
        averages = []
        for lost_q in losses:
            pattern = LossPattern({lost_q})
            try:
                plan = plan_recovery(params, pattern)
            except ValueError as exc:
                raise NumericalFailure(str(exc)) from exc
            reduced = erase(rho, pattern)
            n_meas = len(plan.measurement_order)
            branches = [forced] if forced is not None else list(product((0, 1), repeat=n_meas))
            weighted = 0.0
            var = 0.0
            for bits in branches:
                if len(bits) != n_meas:
                    raise ConfigError("force_branch",
                                      f"expected {n_meas} outcome bits, got {len(bits)}")
                try:
                    rec = execute_recovery(reduced, plan, reference=inp, forced=bits)
                except ValueError:
                    continue  # zero-probability branch
                sigma = _branch_sigma(rec.fidelity_vs_input, cfg.shots)
                rows.append(ResultRow(
                    experiment="recover", input=name, code_n=cfg.code_n,
                    code_m=cfg.code_m, lost=str(lost_q),
                    branch="".join(str(b) for b in bits),
                    fidelity=rec.fidelity_vs_input, sigma=sigma,
                    shots=cfg.shots, seed=cfg.seed))
                weighted += rec.probability * rec.fidelity_vs_input
                var += (rec.probability * sigma) ** 2
            if forced is None:
                averages.append((weighted, var))
        if forced is None and averages:
            mean = sum(w for w, _ in averages) / len(averages)
            sig = math.sqrt(sum(v for _, v in averages)) / len(averages)
            rows.append(ResultRow(
                experiment="recover", input=name, code_n=cfg.code_n,
                code_m=cfg.code_m, branch="avg", fidelity=mean, sigma=sig,
                shots=cfg.shots, seed=cfg.seed))
    return rows


def run_oneway(cfg: ExperimentConfig) -> list[ResultRow]:
    noise = _noise(cfg)
    pairs = _noise_pairs(cfg, "phi5", None)
    forced = _branch_bits(cfg.force_branch) if cfg.force_branch else None
    if forced is not None and len(forced) != 3:
        raise ConfigError("force_branch", "oneway branches use 3 outcome bits")
    rows = []
    for case in _oneway_cases(cfg):
        for alpha in cfg.alphas:
            branches = [forced] if forced is not None else list(product((0, 1), repeat=3))
            for bits in branches:
                try:
                    result = loss_tolerant_rotation(
                        case, alpha, noise if not noise.is_noiseless() else None,
                        interfering_pairs=pairs, forced=bits)
                except ValueError as exc:
                    if "zero probability" in str(exc):
                        continue
                    raise NumericalFailure(str(exc)) from exc
                rows.append(ResultRow(
                    experiment="oneway", input="phi5", lost=case,
                    branch="".join(str(b) for b in bits), alpha=alpha,
                    fidelity=result.fidelity,
                    sigma=_branch_sigma(result.fidelity, cfg.shots),
                    shots=cfg.shots, seed=cfg.seed))
    return rows


RUNNERS = {
    "encode": run_encode,
    "recover": run_recover,
    "cluster-fidelity": run_cluster_fidelity,
    "oneway": run_oneway,
}


def _execute(experiment: str, config_path: str, overrides: dict) -> None:
    cfg = parse_config(config_path)
    cfg.experiment = experiment
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    validate_config(cfg)
    try:
        rows = RUNNERS[experiment](cfg)
    except click.ClickException:
        raise
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(str(exc)) from exc
    text = render_output(cfg, rows)
    if cfg.out:
        Path(cfg.out).write_bytes(text.encode())
    else:
        click.echo(text, nl=False)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="Flat key=value config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override master seed.")(fn)
    fn = click.option("--shots", type=int, default=None, help="Override shot count.")(fn)
    fn = click.option("--noise-v", "noise_v", type=float, default=None,
                      help="Override white-noise weight v.")(fn)
    fn = click.option("--out", "out", type=click.Path(), default=None,
                      help="Output file path (default: stdout).")(fn)
    fn = click.option("--format", "format_", type=click.Choice(["csv", "json"]),
                      default=None, help="Output format.")(fn)
    fn = click.option("--force-branch", "force_branch", default=None,
                      help="Restrict to one forced outcome branch (bit string).")(fn)
    return fn


@click.group()
@click.version_option(package_name="losskit")
def main() -> None:
    """Loss-tolerant code experiments with seeded, reproducible output."""


def _make_command(experiment: str, help_text: str):
    @main.command(name=experiment, help=help_text)
    @_common_options
    def _cmd(config_path, seed, shots, noise_v, out, format_, force_branch):
        _execute(experiment, config_path, {
            "seed": seed, "shots": shots, "noise_v": noise_v,
            "out": out, "format": format_, "force_branch": force_branch,
        })

    return _cmd


_make_command("encode", "Codeword preparation fidelity via simulated tomography.")
_make_command("recover", "Loss-and-recovery sweep over inputs, losses and branches.")
_make_command("cluster-fidelity", "Five-photon cluster-state fidelity estimate.")
_make_command("oneway", "One-way rotation under photon loss, all forced branches.")


if __name__ == "__main__":
    main()
