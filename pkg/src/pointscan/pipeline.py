"""End-to-end runs shared by the HTTP service, the CLI, and the test suite.

Every run takes one master seed and derives fixed sub-seeds from it (see
``derive_seeds``); per-cloud randomness offsets the relevant sub-seed by the
cloud index. All derived seeds are echoed in the run's effective config, so
any output can be reproduced from its own metadata.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .cloud import (
    EncoderWeights,
    PointCloud,
    TokenGroup,
    encode_tokens,
    farthest_point_sampling,
    knn_group,
    normalize_unit_sphere,
    token_features,
)
from .errors import ValidationError
from .masking import MaskConfig, MaskPlan, build_mask_plan, random_mask
from .scan import (
    PLANES,
    ScanOrder,
    ScanParams,
    baseline_scan,
    locality_metrics,
    zigzag_scan_3d,
)
from .ssm import ReconTask, SsmParams, reconstruct_train
from .synth import synthetic_batch

MASK_STRATEGIES = ("sms", "random-only")


def derive_seeds(seed: int) -> dict[str, int]:
    """Fixed sub-seed layout used by every run.

    Bases are spaced far apart because per-cloud randomness offsets them by
    the cloud index.
    """
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    names = ("fps", "encoder", "mask", "plane", "curve", "synth", "train", "ssm")
    return {name: seed + i * 1_000_003 for i, name in enumerate(names)}


def curve_label(curve: str, plane: str) -> str:
    """Row label for a requested curve; zigzag carries its plane choice."""
    return f"zigzag_{plane}" if curve == "zigzag" else curve


@dataclass
class Tokenization:
    """FPS centers, KNN groups, and encoded features of one cloud."""

    cloud: PointCloud
    center_indices: np.ndarray
    groups: list[TokenGroup]
    features: np.ndarray  # (G, C)

    @property
    def center_cloud(self) -> PointCloud:
        return PointCloud(self.cloud.points[self.center_indices])

    def relative_patch(self, token: int) -> np.ndarray:
        g = self.groups[token]
        return self.cloud.points[g.neighbor_indices] - self.cloud.points[g.center_index]


def tokenize_cloud(
    cloud: PointCloud,
    n_centers: int,
    k: int,
    fps_seed: int,
    weights: EncoderWeights,
) -> Tokenization:
    """FPS + KNN + encoding; center and neighborhood counts are clamped to N."""
    centers = farthest_point_sampling(cloud, min(n_centers, len(cloud)), fps_seed)
    groups = encode_tokens(cloud, knn_group(cloud, centers, min(k, len(cloud))), weights)
    return Tokenization(
        cloud=cloud, center_indices=centers, groups=groups, features=token_features(groups)
    )


def scan_cloud(
    cloud: PointCloud,
    curve: str,
    plane: str,
    params: ScanParams,
    quantization_bits: int,
    plane_seed: int,
    shuffle_seed: int,
) -> ScanOrder:
    """Dispatch one curve request to the right scan."""
    if curve == "zigzag":
        return zigzag_scan_3d(cloud, params, plane=plane, seed=plane_seed)
    return baseline_scan(cloud, curve, quantization_bits, seed=shuffle_seed)


def resolve_clouds(
    points: list | None = None,
    clouds: list | None = None,
    synthetic: dict | None = None,
) -> tuple[list[PointCloud], dict]:
    """Turn a request's cloud source into PointClouds.

    Exactly one of ``points`` (one inline cloud), ``clouds`` (several inline
    clouds), or ``synthetic`` (a generator spec) must be given.
    """
    given = [name for name, v in (("points", points), ("clouds", clouds), ("synthetic", synthetic)) if v is not None]
    if len(given) != 1:
        raise ValidationError(
            f"exactly one cloud source is required (points, clouds, or synthetic); got {given or 'none'}"
        )
    if points is not None:
        return [PointCloud(np.asarray(points, dtype=np.float64))], {"source": "inline", "count": 1}
    if clouds is not None:
        built = [PointCloud(np.asarray(c, dtype=np.float64)) for c in clouds]
        if not built:
            raise ValidationError("cloud list is empty")
        return built, {"source": "inline", "count": len(built)}
    spec = {"kind": "cube", "n": 1024, "count": 1, "seed": 0, **synthetic}
    made = synthetic_batch(spec["kind"], spec["n"], spec["count"], spec["seed"])
    return made, {"source": "synthetic", **spec}


def serialize_run(
    cloud: PointCloud,
    curves: list[tuple[str, str]],
    normalize: bool = True,
    on: str = "centers",
    n_centers: int = 64,
    scan_params: ScanParams = ScanParams(),
    quantization_bits: int = 10,
    seed: int = 0,
) -> dict:
    """Scan one cloud (raw points or its FPS centers) along the requested curves."""
    if on not in ("points", "centers"):
        raise ValidationError(f"on must be 'points' or 'centers', got {on!r}")
    seeds = derive_seeds(seed)
    if normalize:
        cloud = normalize_unit_sphere(cloud)
    center_indices = None
    if on == "centers":
        center_indices = farthest_point_sampling(cloud, min(n_centers, len(cloud)), seeds["fps"])
        target = PointCloud(cloud.points[center_indices])
    else:
        target = cloud

    orders = []
    for curve, plane in curves:
        order = scan_cloud(
            target, curve, plane, scan_params, quantization_bits, seeds["plane"], seeds["curve"]
        )
        metrics = locality_metrics(target, order)
        orders.append(
            {
                "curve_tag": order.curve_tag,
                "n": order.n,
                "permutation": [int(i) for i in order.permutation],
                "metrics": metrics.to_dict(),
            }
        )
    effective = {
        "normalize": normalize,
        "on": on,
        "n_points": len(cloud),
        "scan_params": asdict(scan_params),
        "quantization_bits": quantization_bits,
        "seed": seed,
        "derived_seeds": seeds,
    }
    if center_indices is not None:
        effective["n_centers"] = len(center_indices)
        effective["center_indices"] = [int(i) for i in center_indices]
    return {"orders": orders, "effective": effective}


def metrics_run(cloud: PointCloud, order: ScanOrder, normalize: bool = False) -> dict:
    """Locality metrics of a previously computed scan order over a cloud.

    ``normalize`` must match whatever preprocessing produced the order's
    target cloud (orders over FPS centers need the center cloud itself).
    """
    if normalize:
        cloud = normalize_unit_sphere(cloud)
    metrics = locality_metrics(cloud, order)
    return {
        "curve_tag": order.curve_tag,
        "n": order.n,
        "metrics": metrics.to_dict(),
        "effective": {"normalize": normalize, "n_points": len(cloud)},
    }


def mask_run(
    cloud: PointCloud,
    normalize: bool = True,
    n_centers: int = 64,
    k: int = 32,
    encoder_hidden: int = 32,
    encoder_channels: int = 16,
    t_semantic: float = 0.8,
    r_random: float = 0.6,
    seed: int = 0,
) -> dict:
    """Tokenize one cloud and build its mask plan."""
    seeds = derive_seeds(seed)
    if normalize:
        cloud = normalize_unit_sphere(cloud)
    weights = EncoderWeights.seeded(seeds["encoder"], encoder_hidden, encoder_channels)
    tok = tokenize_cloud(cloud, n_centers, k, seeds["fps"], weights)
    config = MaskConfig(t_semantic=t_semantic, r_random=r_random, seed=seeds["mask"])
    plan = build_mask_plan(tok.features[None], config)
    g = plan.num_tokens
    counts = {
        "tokens": g,
        "semantic_masked": int(plan.semantic.sum()),
        "random_masked": int(plan.random.sum()),
        "final_masked": int(plan.final.sum()),
        "retained": g - int(plan.final.sum()),
    }
    effective = {
        "normalize": normalize,
        "n_points": len(cloud),
        "n_centers": len(tok.center_indices),
        "knn": min(k, len(cloud)),
        "encoder_hidden": encoder_hidden,
        "encoder_channels": encoder_channels,
        "t_semantic": t_semantic,
        "r_random": r_random,
        "seed": seed,
        "derived_seeds": seeds,
    }
    return {"plan": plan.to_json_dict(), "counts": counts, "effective": effective}


def compare_run(
    clouds: list[PointCloud],
    curves: list[tuple[str, str]],
    normalize: bool = True,
    on: str = "points",
    n_centers: int = 64,
    scan_params: ScanParams = ScanParams(),
    quantization_bits: int = 10,
    seed: int = 0,
) -> dict:
    """Aggregate locality metrics per curve over a set of clouds.

    When the random curve is among the requests, each curve also reports its
    win rate: the fraction of clouds where its mean step beats random's.
    """
    if len(curves) < 2:
        raise ValidationError("comparison needs at least 2 curves")
    labels = [curve_label(c, p) for c, p in curves]
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate curves in comparison")
    seeds = derive_seeds(seed)
    if normalize:
        clouds = [normalize_unit_sphere(c) for c in clouds]
    if on == "centers":
        targets = []
        for i, c in enumerate(clouds):
            centers = farthest_point_sampling(c, min(n_centers, len(c)), seeds["fps"] + i)
            targets.append(PointCloud(c.points[centers]))
    elif on == "points":
        targets = clouds
    else:
        raise ValidationError(f"on must be 'points' or 'centers', got {on!r}")

    per_curve: dict[str, np.ndarray] = {}
    for label, (curve, plane) in zip(labels, curves):
        rows = []
        for i, target in enumerate(targets):
            order = scan_cloud(
                target,
                curve,
                plane,
                scan_params,
                quantization_bits,
                seeds["plane"] + i,
                seeds["curve"] + i,
            )
            m = locality_metrics(target, order)
            rows.append([m.mean_step, m.max_step, m.total_path_length])
        per_curve[label] = np.asarray(rows)

    win_rates = None
    if "random" in per_curve:
        random_means = per_curve["random"][:, 0]
        win_rates = {
            label: float(np.mean(values[:, 0] < random_means))
            for label, values in per_curve.items()
            if label != "random"
        }
    rows = [
        {
            "curve": label,
            "mean_step": float(per_curve[label][:, 0].mean()),
            "max_step": float(per_curve[label][:, 1].mean()),
            "total_path_length": float(per_curve[label][:, 2].mean()),
            "win_rate_vs_random": None if win_rates is None or label == "random" else win_rates[label],
        }
        for label in sorted(labels)
    ]
    effective = {
        "normalize": normalize,
        "on": on,
        "n_clouds": len(clouds),
        "curves": sorted(labels),
        "scan_params": asdict(scan_params),
        "quantization_bits": quantization_bits,
        "seed": seed,
        "derived_seeds": seeds,
    }
    return {"rows": rows, "win_rates": win_rates, "effective": effective}


def build_recon_task(
    clouds: list[PointCloud],
    strategy: str,
    normalize: bool = True,
    n_centers: int = 32,
    k: int = 16,
    encoder_hidden: int = 32,
    encoder_channels: int = 16,
    plane: str = "random",
    scan_params: ScanParams = ScanParams(),
    t_semantic: float = 0.8,
    r_random: float = 0.6,
    state_dim: int = 16,
    ssm_mode: str = "static",
    spectral_radius: float = 0.5,
    mask_override: MaskPlan | None = None,
    seed: int = 0,
) -> tuple[ReconTask, dict]:
    """Assemble the masked-reconstruction task for a batch of clouds.

    Tokens are serialized by a zigzag scan over their centers; the mask is
    either the two-stage plan (``sms``), a pure random draw at the same
    ratio (``random-only``), or the final layer of an explicit ``mask_override``
    plan (one row per cloud, e.g. a plan previously written by the mask
    command). Targets are the masked tokens' center-relative patches in
    serialized order; the recurrence sees [feature, center] per step with
    masked features zeroed.
    """
    if strategy not in MASK_STRATEGIES:
        raise ValidationError(f"unknown mask strategy {strategy!r}; expected {MASK_STRATEGIES}")
    if plane not in PLANES + ("random",):
        raise ValidationError(f"unknown plane {plane!r}")
    if mask_override is not None and mask_override.batch_size != len(clouds):
        raise ValidationError(
            f"mask plan has {mask_override.batch_size} rows for {len(clouds)} clouds"
        )
    seeds = derive_seeds(seed)
    if normalize:
        clouds = [normalize_unit_sphere(c) for c in clouds]
    weights = EncoderWeights.seeded(seeds["encoder"], encoder_hidden, encoder_channels)

    features_rows, position_rows, masked_rows, targets, plane_tags = [], [], [], [], []
    expected_g = None
    for i, cloud in enumerate(clouds):
        tok = tokenize_cloud(cloud, n_centers, k, seeds["fps"] + i, weights)
        g = tok.features.shape[0]
        k_eff = tok.groups[0].neighbor_indices.size
        if expected_g is None:
            expected_g, expected_k = g, k_eff
        elif (g, k_eff) != (expected_g, expected_k):
            raise ValidationError("all clouds must produce the same token count and patch size")
        order = zigzag_scan_3d(tok.center_cloud, scan_params, plane=plane, seed=seeds["plane"] + i)
        plane_tags.append(order.curve_tag)
        serialized = tok.features[order.permutation]
        if mask_override is not None:
            if mask_override.num_tokens != g:
                raise ValidationError(
                    f"mask plan covers {mask_override.num_tokens} tokens, clouds produce {g}"
                )
            mask = mask_override.final[i].copy()
            if not mask.any():
                raise ValidationError(f"mask plan row {i} masks no tokens")
        elif strategy == "sms":
            plan = build_mask_plan(
                serialized[None],
                MaskConfig(t_semantic=t_semantic, r_random=r_random, seed=seeds["mask"] + i),
            )
            mask = plan.final[0]
        else:
            no_semantic = np.zeros((1, g), dtype=bool)
            mask = random_mask(no_semantic, r_random, seeds["mask"] + i)[0]
            if not mask.any():  # tiny G can floor to zero masked; keep the task well-posed
                mask[0] = True
        features_rows.append(serialized)
        position_rows.append(tok.center_cloud.points[order.permutation])
        masked_rows.append(mask)
        for pos in np.flatnonzero(mask):
            targets.append(tok.relative_patch(int(order.permutation[pos])))

    ssm = SsmParams.seeded(
        state_dim,
        encoder_channels + 3,
        seeds["ssm"],
        spectral_radius=spectral_radius,
        dynamic=(ssm_mode == "dynamic"),
    )
    task = ReconTask(
        features=np.stack(features_rows),
        positions=np.stack(position_rows),
        masked=np.stack(masked_rows),
        targets=np.stack(targets),
        ssm=ssm,
        mode=ssm_mode,
    )
    info = {
        "strategy": strategy,
        "mask_source": "plan-file" if mask_override is not None else strategy,
        "normalize": normalize,
        "n_clouds": len(clouds),
        "tokens_per_cloud": expected_g,
        "knn": min(k, min(len(c) for c in clouds)),
        "plane": plane,
        "plane_tags": plane_tags,
        "masked_total": int(task.masked.sum()),
        "t_semantic": t_semantic,
        "r_random": r_random,
        "state_dim": state_dim,
        "ssm_mode": ssm_mode,
        "seed": seed,
        "derived_seeds": seeds,
    }
    return task, info


def reconstruct_run(
    clouds: list[PointCloud],
    strategy: str,
    steps: int = 200,
    lr: float = 0.5,
    train_ssm: bool = False,
    **task_kwargs,
) -> dict:
    """Build the reconstruction task for one strategy and train the decoder."""
    task, info = build_recon_task(clouds, strategy, **task_kwargs)
    trace = reconstruct_train(task, steps, lr, info["derived_seeds"]["train"], train_ssm=train_ssm)
    return {
        "trace": [float(v) for v in trace.losses],
        "summary": trace.summary(),
        "effective": info | {"steps": steps, "lr": lr, "train_ssm": train_ssm},
    }
