"""Command-line front end.

The CLI is a thin client of the HTTP service: it loads input files, builds a
request, posts it (to an in-process service instance by default, or to
``--server URL``), and writes the response to disk. Every output embeds the
run's effective configuration and seeds, and reruns with identical
configuration produce byte-identical files.

Exit codes: 0 success, 1 I/O error, 2 validation error, 3 training error.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import httpx

from . import __version__
from .errors import TrainingError, ValidationError
from .io import load_pointcloud
from .pipeline import derive_seeds
from .scan import ScanOrder

FORMAT_ALIASES = {"xyz": "xyz_text", "ply": "ply_ascii", "bin": "f32le_bin"}
FORMAT_EXTENSIONS = {"xyz": ".xyz", "ply": ".ply", "bin": ".bin"}
CURVE_CHOICES = ("zigzag", "hilbert", "trans_hilbert", "z_order", "trans_z_order", "random", "all")
ALL_CURVES = ("zigzag", "hilbert", "trans_hilbert", "z_order", "trans_z_order", "random")


class ServiceClient:
    """POSTs JSON to the service, in-process unless a server URL is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # deprecation chatter on import
                from fastapi.testclient import TestClient

            from .service.app import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise OSError(f"service request failed: {exc}") from exc
        if resp.status_code == 200:
            return resp.json()
        detail = {}
        try:
            detail = resp.json().get("detail", {})
        except ValueError:
            pass
        if isinstance(detail, dict) and detail.get("type") == "training_error":
            raise TrainingError(detail.get("message", "training failed"))
        if resp.status_code in (400, 422):
            raise ValidationError(f"service rejected request: {detail or resp.text}")
        raise OSError(f"service error {resp.status_code}: {detail or resp.text}")


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except TrainingError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return doc


class Resolver:
    """Applies the precedence: CLI flag > config file > built-in default."""

    def __init__(self, config: dict):
        self.config = config

    def __call__(self, name: str, cli_value, default):
        if cli_value is not None and cli_value != ():
            return cli_value
        if name in self.config:
            return self.config[name]
        return default


def common_options(fn):
    options = [
        click.option("--server", default=None, help="Service URL; default runs in-process."),
        click.option("--out-dir", default=None, help="Output directory [default: out]."),
        click.option("--seed", type=int, default=None, help="Master seed [default: 0]."),
        click.option(
            "--config",
            "config_path",
            default=None,
            help="JSON config file; flags override its values.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(canonical_json(obj), encoding="utf-8")
    click.echo(f"wrote {path}")


def write_csv(path: Path, header: list[str], rows: list[list], effective: dict) -> None:
    comment = "# config: " + json.dumps(effective, sort_keys=True, separators=(",", ":"))
    lines = [comment, ",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {path}")


def load_points(path: str, fmt: str) -> list[list[float]]:
    cloud = load_pointcloud(path, FORMAT_ALIASES[fmt])
    return cloud.points.tolist()


def load_cloud_set(path: str, fmt: str) -> list[list[list[float]]]:
    """Load one file, or every matching file of a directory (sorted by name)."""
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.iterdir() if f.suffix == FORMAT_EXTENSIONS[fmt])
        if not files:
            raise ValidationError(f"no *{FORMAT_EXTENSIONS[fmt]} files in {path}")
        return [load_points(str(f), fmt) for f in files]
    return [load_points(path, fmt)]


def prepare_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def scan_section(resolve: Resolver, layer_budget, segment_size, max_segments) -> dict:
    return {
        "layer_budget": resolve("layer_budget", layer_budget, 12),
        "segment_size": resolve("segment_size", segment_size, 16),
        "max_segments": resolve("max_segments", max_segments, 64),
    }


def expand_curves(curves: tuple[str, ...], plane: str) -> list[dict]:
    names: list[str] = []
    for c in curves:
        names.extend(ALL_CURVES if c == "all" else [c])
    seen = []
    for name in names:
        if name not in seen:
            seen.append(name)
    return [{"curve": name, "plane": plane} for name in seen]


@click.group()
@click.version_option(version=__version__)
def main():
    """Point-cloud serialization scans, token masking, and reconstruction runs."""


@main.command()
@click.option("--input", "input_path", required=True, help="Point-cloud file.")
@click.option("--format", "fmt", type=click.Choice(sorted(FORMAT_ALIASES)), default="xyz")
@click.option("--curve", "curves", multiple=True, type=click.Choice(CURVE_CHOICES))
@click.option("--plane", type=click.Choice(["xy", "xz", "yz", "random"]), default=None)
@click.option("--on", "on_", type=click.Choice(["points", "centers"]), default=None,
              help="Scan raw points or FPS centers [default: centers].")
@click.option("--n-centers", type=int, default=None)
@click.option("--layer-budget", type=int, default=None)
@click.option("--segment-size", type=int, default=None)
@click.option("--max-segments", type=int, default=None)
@click.option("--bits", type=int, default=None, help="Quantization bits for hilbert/z_order.")
@click.option("--normalize/--no-normalize", default=None)
@common_options
@handle_errors
def serialize(input_path, fmt, curves, plane, on_, n_centers, layer_budget, segment_size,
              max_segments, bits, normalize, server, out_dir, seed, config_path):
    """Emit scan orders (JSON + binary) and locality metrics for each curve."""
    resolve = Resolver(load_config_file(config_path))
    payload = {
        "points": load_points(input_path, fmt),
        "curves": expand_curves(resolve("curve", curves, ("zigzag",)), resolve("plane", plane, "xy")),
        "normalize": resolve("normalize", normalize, True),
        "on": resolve("on", on_, "centers"),
        "n_centers": resolve("n_centers", n_centers, 64),
        "scan": scan_section(resolve, layer_budget, segment_size, max_segments),
        "quantization_bits": resolve("bits", bits, 10),
        "seed": resolve("seed", seed, 0),
    }
    result = ServiceClient(resolve("server", server, None)).post("/v1/serialize", payload)
    out = prepare_out_dir(resolve("out_dir", out_dir, "out"))
    effective = result["effective"] | {"input": os.path.basename(input_path), "format": fmt}
    for entry in result["orders"]:
        tag = entry["curve_tag"]
        write_json(out / f"order_{tag}.json", {
            "curve_tag": tag,
            "n": entry["n"],
            "permutation": entry["permutation"],
            "config": effective,
        })
        blob = ScanOrder.from_json_dict(entry).to_bytes()
        (out / f"order_{tag}.bin").write_bytes(blob)
        click.echo(f"wrote {out / f'order_{tag}.bin'}")
        write_json(out / f"metrics_{tag}.json", {
            "curve_tag": tag,
            "metrics": entry["metrics"],
            "config": effective,
        })


@main.command()
@click.option("--input", "input_path", required=True, help="Point-cloud file.")
@click.option("--format", "fmt", type=click.Choice(sorted(FORMAT_ALIASES)), default="xyz")
@click.option("--n-centers", type=int, default=None)
@click.option("--knn", type=int, default=None)
@click.option("--encoder-hidden", type=int, default=None)
@click.option("--channels", type=int, default=None)
@click.option("--t-semantic", type=float, default=None)
@click.option("--r-random", type=float, default=None)
@click.option("--normalize/--no-normalize", default=None)
@common_options
@handle_errors
def mask(input_path, fmt, n_centers, knn, encoder_hidden, channels, t_semantic, r_random,
         normalize, server, out_dir, seed, config_path):
    """Tokenize a cloud, build its mask plan, and report the counts."""
    resolve = Resolver(load_config_file(config_path))
    payload = {
        "points": load_points(input_path, fmt),
        "normalize": resolve("normalize", normalize, True),
        "n_centers": resolve("n_centers", n_centers, 64),
        "knn": resolve("knn", knn, 32),
        "encoder_hidden": resolve("encoder_hidden", encoder_hidden, 32),
        "encoder_channels": resolve("channels", channels, 16),
        "t_semantic": resolve("t_semantic", t_semantic, 0.8),
        "r_random": resolve("r_random", r_random, 0.6),
        "seed": resolve("seed", seed, 0),
    }
    result = ServiceClient(resolve("server", server, None)).post("/v1/mask", payload)
    out = prepare_out_dir(resolve("out_dir", out_dir, "out"))
    effective = result["effective"] | {"input": os.path.basename(input_path), "format": fmt}
    write_json(out / "mask_plan.json", result["plan"] | {"config": effective})
    counts = result["counts"]
    click.echo(
        f"tokens={counts['tokens']} semantic_masked={counts['semantic_masked']} "
        f"random_masked={counts['random_masked']} final_masked={counts['final_masked']} "
        f"retained={counts['retained']}"
    )


@main.command()
@click.option("--input", "input_path", required=True, help="Point-cloud file the order was computed on.")
@click.option("--format", "fmt", type=click.Choice(sorted(FORMAT_ALIASES)), default="xyz")
@click.option("--order", "order_path", required=True,
              help="Saved scan order (.json, or .bin from the serialize command).")
@click.option("--normalize/--no-normalize", default=None,
              help="Apply unit-sphere normalization before measuring [default: off].")
@common_options
@handle_errors
def metrics(input_path, fmt, order_path, normalize, server, out_dir, seed, config_path):
    """Locality metrics of a saved scan order over a cloud."""
    resolve = Resolver(load_config_file(config_path))
    if order_path.endswith(".bin"):
        # the binary form carries no tag; recover it from the file name
        tag = Path(order_path).stem.removeprefix("order_")
        with open(order_path, "rb") as fh:
            order = ScanOrder.from_bytes(fh.read(), curve_tag=tag)
    else:
        with open(order_path, "r", encoding="utf-8") as fh:
            try:
                order = ScanOrder.from_json_dict(json.load(fh))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"order file {order_path} is malformed: {exc}") from exc
    payload = {
        "points": load_points(input_path, fmt),
        "order": order.to_json_dict(),
        "normalize": resolve("normalize", normalize, False),
    }
    result = ServiceClient(resolve("server", server, None)).post("/v1/metrics", payload)
    out = prepare_out_dir(resolve("out_dir", out_dir, "out"))
    effective = result["effective"] | {
        "input": os.path.basename(input_path),
        "format": fmt,
        "order_file": os.path.basename(order_path),
    }
    write_json(out / f"metrics_{result['curve_tag']}.json", {
        "curve_tag": result["curve_tag"],
        "metrics": result["metrics"],
        "config": effective,
    })
    m = result["metrics"]
    click.echo(
        f"curve={result['curve_tag']} mean_step={m['mean_step']:.6g} "
        f"max_step={m['max_step']:.6g} total={m['total_path_length']:.6g}"
    )


@main.command()
@click.option("--input", "input_path", default=None, help="Cloud file or directory of clouds.")
@click.option("--format", "fmt", type=click.Choice(sorted(FORMAT_ALIASES)), default="xyz")
@click.option("--kind", type=click.Choice(["cube", "sphere", "blobs"]), default=None,
              help="Synthetic cloud kind when no --input is given.")
@click.option("--clouds", "n_clouds", type=int, default=None, help="Synthetic cloud count.")
@click.option("--cloud-size", type=int, default=None, help="Points per synthetic cloud.")
@click.option("--curve", "curves", multiple=True, type=click.Choice(CURVE_CHOICES))
@click.option("--plane", type=click.Choice(["xy", "xz", "yz", "random"]), default=None)
@click.option("--on", "on_", type=click.Choice(["points", "centers"]), default=None)
@click.option("--n-centers", type=int, default=None)
@click.option("--layer-budget", type=int, default=None)
@click.option("--segment-size", type=int, default=None)
@click.option("--max-segments", type=int, default=None)
@click.option("--bits", type=int, default=None)
@click.option("--normalize/--no-normalize", default=None)
@common_options
@handle_errors
def compare(input_path, fmt, kind, n_clouds, cloud_size, curves, plane, on_, n_centers,
            layer_budget, segment_size, max_segments, bits, normalize, server, out_dir,
            seed, config_path):
    """Tabulate locality metrics per curve over a set of clouds (CSV)."""
    resolve = Resolver(load_config_file(config_path))
    master_seed = resolve("seed", seed, 0)
    input_path = resolve("input", input_path, None)
    if input_path is not None:
        source = {"clouds": load_cloud_set(input_path, fmt)}
    else:
        source = {"synthetic": {
            "kind": resolve("kind", kind, "cube"),
            "n": resolve("cloud_size", cloud_size, 1024),
            "count": resolve("clouds", n_clouds, 200),
            "seed": derive_seeds(master_seed)["synth"],
        }}
    payload = {
        "source": source,
        "curves": expand_curves(resolve("curve", curves, ("all",)), resolve("plane", plane, "xy")),
        "normalize": resolve("normalize", normalize, True),
        "on": resolve("on", on_, "points"),
        "n_centers": resolve("n_centers", n_centers, 64),
        "scan": scan_section(resolve, layer_budget, segment_size, max_segments),
        "quantization_bits": resolve("bits", bits, 10),
        "seed": master_seed,
    }
    result = ServiceClient(resolve("server", server, None)).post("/v1/compare", payload)
    out = prepare_out_dir(resolve("out_dir", out_dir, "out"))
    header = ["curve", "mean_step", "max_step", "total_path_length", "win_rate_vs_random"]
    rows = [[r["curve"], r["mean_step"], r["max_step"], r["total_path_length"], r["win_rate_vs_random"]]
            for r in result["rows"]]
    write_csv(out / "compare.csv", header, rows, result["effective"])
    if result["win_rates"]:
        for label, rate in sorted(result["win_rates"].items()):
            click.echo(f"win rate vs random ({label}): {rate:.3f}")


@main.command()
@click.option("--input", "input_path", default=None, help="Cloud file or directory of clouds.")
@click.option("--format", "fmt", type=click.Choice(sorted(FORMAT_ALIASES)), default="xyz")
@click.option("--kind", type=click.Choice(["cube", "sphere", "blobs"]), default=None)
@click.option("--clouds", "n_clouds", type=int, default=None)
@click.option("--cloud-size", type=int, default=None)
@click.option("--mask-strategy", type=click.Choice(["sms", "random-only", "both"]), default=None)
@click.option("--mask-plan", "mask_plan_path", default=None,
              help="Reuse a saved mask plan (JSON from the mask command) instead of drawing one.")
@click.option("--n-centers", type=int, default=None)
@click.option("--knn", type=int, default=None)
@click.option("--encoder-hidden", type=int, default=None)
@click.option("--channels", type=int, default=None)
@click.option("--plane", type=click.Choice(["xy", "xz", "yz", "random"]), default=None)
@click.option("--layer-budget", type=int, default=None)
@click.option("--segment-size", type=int, default=None)
@click.option("--max-segments", type=int, default=None)
@click.option("--t-semantic", type=float, default=None)
@click.option("--r-random", type=float, default=None)
@click.option("--state-dim", type=int, default=None)
@click.option("--ssm-mode", type=click.Choice(["static", "dynamic"]), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--train-ssm/--no-train-ssm", default=None)
@click.option("--normalize/--no-normalize", default=None)
@common_options
@handle_errors
def reconstruct(input_path, fmt, kind, n_clouds, cloud_size, mask_strategy, mask_plan_path,
                n_centers, knn, encoder_hidden, channels, plane, layer_budget, segment_size,
                max_segments, t_semantic, r_random, state_dim, ssm_mode, steps, lr, train_ssm,
                normalize, server, out_dir, seed, config_path):
    """Run the masked-reconstruction demo and emit its loss traces."""
    resolve = Resolver(load_config_file(config_path))
    master_seed = resolve("seed", seed, 0)
    input_path = resolve("input", input_path, None)
    if input_path is not None:
        source = {"clouds": load_cloud_set(input_path, fmt)}
    else:
        source = {"synthetic": {
            "kind": resolve("kind", kind, "cube"),
            "n": resolve("cloud_size", cloud_size, 256),
            "count": resolve("clouds", n_clouds, 32),
            "seed": derive_seeds(master_seed)["synth"],
        }}
    mask_plan = None
    mask_plan_path = resolve("mask_plan", mask_plan_path, None)
    if mask_plan_path is not None:
        with open(mask_plan_path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"mask plan file is not valid JSON: {exc}") from exc
        try:
            mask_plan = {key: doc[key] for key in
                         ("b", "g", "t_semantic", "r_random", "seed", "semantic", "random", "final")}
        except KeyError as exc:
            raise ValidationError(f"mask plan file is missing field {exc}") from exc
    strategy = resolve("mask_strategy", mask_strategy, "both")
    strategies = ["sms", "random-only"] if strategy == "both" else [strategy]
    if mask_plan is not None:
        strategies = strategies[:1]  # the plan fixes the mask; one run
    client = ServiceClient(resolve("server", server, None))
    out = prepare_out_dir(resolve("out_dir", out_dir, "out"))
    for strat in strategies:
        payload = {
            "source": source,
            "strategy": strat,
            "normalize": resolve("normalize", normalize, True),
            "n_centers": resolve("n_centers", n_centers, 32),
            "knn": resolve("knn", knn, 16),
            "encoder_hidden": resolve("encoder_hidden", encoder_hidden, 32),
            "encoder_channels": resolve("channels", channels, 16),
            "plane": resolve("plane", plane, "random"),
            "scan": scan_section(resolve, layer_budget, segment_size, max_segments),
            "t_semantic": resolve("t_semantic", t_semantic, 0.8),
            "r_random": resolve("r_random", r_random, 0.6),
            "state_dim": resolve("state_dim", state_dim, 16),
            "ssm_mode": resolve("ssm_mode", ssm_mode, "static"),
            "steps": resolve("steps", steps, 200),
            "lr": resolve("lr", lr, 0.5),
            "train_ssm": resolve("train_ssm", train_ssm, False),
            "seed": master_seed,
        }
        if mask_plan is not None:
            payload["mask_plan"] = mask_plan
        result = client.post("/v1/reconstruct", payload)
        slug = "plan" if mask_plan is not None else strat.replace("-", "_")
        rows = [[i, loss] for i, loss in enumerate(result["trace"])]
        write_csv(out / f"trace_{slug}.csv", ["step", "loss"], rows, result["effective"])
        write_json(out / f"summary_{slug}.json",
                   {"summary": result["summary"], "config": result["effective"]})
        s = result["summary"]
        click.echo(f"{strat}: init_loss={s['init_loss']:.6g} final_loss={s['final_loss']:.6g}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("pointscan.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
