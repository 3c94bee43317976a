"""Command-line entry point wiring JSON configs to runs.

Commands: train (width/lambda sweep -> sweep.csv), verify (divergence report
-> villani_report.json), sde (ensemble series -> sde_series.csv), gibbs
(measure quantities -> gibbs_report.json), gen-data (synthetic CSVs), mnist
(digit-pair training -> curve CSV + result JSON). Configs are schema-closed:
unknown keys are rejected so typos fail loudly. Reruns with identical
config and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .activations import parse_activation
from .bounds import verify_villani
from .data import (
    SyntheticSpec,
    binary_pair,
    dataset_from_csv,
    dataset_to_csv,
    gen_synthetic,
    load_idx,
)
from .gibbs import gibbs_lab_from_potential, gibbs_lab_from_spec, lab_report
from .net_loss import LossSpec, NetState, accuracy
from .sde import SdeConfig, run_ensemble
from .sgd import InitSpec, SgdConfig, run_sgd

DEFAULT_VERIFY_TEMP_S = 1e-3  # cold enough that rays cross 1e6 by r = 2^10
COMMAND_SECTIONS = ("sgd", "sde", "gibbs", "verify", "mnist")
TOP_KEYS = ("seed", "output_dir", "data", "net", "loss") + COMMAND_SECTIONS


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValueError(
            f"unknown key(s) {unknown} in {where}; allowed: {sorted(allowed)}"
        )


def _require(section, keys, where):
    missing = sorted(k for k in keys if k not in section)
    if missing:
        raise ValueError(f"missing key(s) {missing} in {where}")


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config root must be a JSON object")
    return cfg


def validate_config(cfg: dict, command: str) -> dict:
    """Structural validation for one command; returns the config unchanged."""
    _check_keys(cfg, TOP_KEYS, "config root")
    present = [k for k in COMMAND_SECTIONS if k in cfg]
    want = {"train": "sgd", "sde": "sde", "gibbs": "gibbs",
            "verify": "verify", "mnist": "mnist", "gen-data": None}[command]
    if want is None:
        if present:
            raise ValueError(
                f"gen-data config must not contain command section(s) {present}"
            )
        if "data" not in cfg:
            raise ValueError("gen-data config needs a data section")
    else:
        if present != [want]:
            raise ValueError(
                f"config must contain exactly the '{want}' command section, "
                f"found {present or 'none'}"
            )

    if "data" in cfg:
        sec = cfg["data"]
        _check_keys(sec, ("kind", "n_raw", "dim_d", "margin", "test_fraction",
                          "seed", "train", "test"), "data")
        kind = sec.get("kind", "synthetic")
        if kind == "synthetic":
            _require(sec, ("n_raw", "dim_d"), "data")
        elif kind == "csv":
            _require(sec, ("train", "test"), "data")
            for key in ("train", "test"):
                if not os.path.exists(sec[key]):
                    raise ValueError(f"data.{key} file not found: {sec[key]}")
        else:
            raise ValueError(f"data.kind must be 'synthetic' or 'csv', got {kind!r}")

    if "net" in cfg:
        _check_keys(cfg["net"], ("p", "activation", "outer_init"), "net")
        outer_init = cfg["net"].get("outer_init", "normalized_gaussian")
        if outer_init != "normalized_gaussian":
            raise ValueError("net.outer_init supports only 'normalized_gaussian'")
    if "loss" in cfg:
        _check_keys(cfg["loss"], ("lambda", "lambda_grid"), "loss")
        if ("lambda" in cfg["loss"]) == ("lambda_grid" in cfg["loss"]):
            raise ValueError("loss needs exactly one of lambda, lambda_grid")
    if "sgd" in cfg:
        _check_keys(cfg["sgd"], ("step_s", "batch_b", "num_steps", "epochs",
                                 "record_every"), "sgd")
        _require(cfg["sgd"], ("step_s", "batch_b"), "sgd")
    if "sde" in cfg:
        _check_keys(cfg["sde"], ("temp_s", "dt", "horizon_t", "ensemble_m",
                                 "record_every", "init_sigma"), "sde")
        _require(cfg["sde"], ("temp_s", "dt", "horizon_t", "ensemble_m"), "sde")
    if "gibbs" in cfg:
        _check_keys(cfg["gibbs"], ("box_r", "grid_n", "temp_s", "radius",
                                   "quadratic"), "gibbs")
        _require(cfg["gibbs"], ("box_r", "grid_n", "temp_s", "radius"), "gibbs")
        if "quadratic" in cfg["gibbs"]:
            _check_keys(cfg["gibbs"]["quadratic"], ("curvature", "dims"),
                        "gibbs.quadratic")
            _require(cfg["gibbs"]["quadratic"], ("curvature",), "gibbs.quadratic")
    if "verify" in cfg:
        _check_keys(cfg["verify"], ("temp_s", "high_water", "n_directions",
                                    "seed"), "verify")
    if "mnist" in cfg:
        sec = cfg["mnist"]
        _check_keys(sec, ("train_images", "train_labels", "test_images",
                          "test_labels", "digit_a", "digit_b", "p", "batch_b",
                          "epochs", "lambda", "step_s", "scale",
                          "record_every"), "mnist")
        _require(sec, ("train_images", "train_labels", "test_images",
                       "test_labels", "digit_a", "digit_b"), "mnist")
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if not os.path.exists(sec[key]):
                raise ValueError(f"mnist.{key} file not found: {sec[key]}")

    needs_instance = {"train": True, "verify": True, "sde": True,
                      "gibbs": "quadratic" not in cfg.get("gibbs", {}),
                      "mnist": False, "gen-data": False}[command]
    if needs_instance:
        for key in ("data", "net", "loss"):
            if key not in cfg:
                raise ValueError(f"{command} config needs a {key} section")
    return cfg


# -- shared plumbing ---------------------------------------------------------------


def _cell_seed(master: int, *key) -> int:
    return int(np.random.SeedSequence(entropy=master, spawn_key=key)
               .generate_state(1)[0])


def _normalized_outer(p: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(p)
    return a / np.linalg.norm(a)


def _load_datasets(cfg: dict, master_seed: int):
    sec = cfg["data"]
    if sec.get("kind", "synthetic") == "csv":
        with open(sec["train"], "r", encoding="utf-8") as fh:
            train = dataset_from_csv(fh.read())
        with open(sec["test"], "r", encoding="utf-8") as fh:
            test = dataset_from_csv(fh.read())
        return train, test
    spec = SyntheticSpec(
        n_raw=int(sec["n_raw"]), dim_d=int(sec["dim_d"]),
        margin=float(sec.get("margin", 0.2)),
        test_fraction=float(sec.get("test_fraction", 0.2)),
        seed=int(sec.get("seed", master_seed)),
    )
    return gen_synthetic(spec)


def _lambda_grid(cfg: dict):
    loss = cfg["loss"]
    if "lambda" in loss:
        return [float(loss["lambda"])]
    return [float(v) for v in loss["lambda_grid"]]


def _width_grid(cfg: dict):
    p = cfg["net"]["p"]
    return [int(v) for v in (p if isinstance(p, list) else [p])]


def _write_text(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ----------------------------------------------------------------------


def cmd_train(cfg: dict):
    """Width x lambda sweep; writes sweep.csv. Returns artifact paths."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    train, test = _load_datasets(cfg, master)
    profile = parse_activation(cfg["net"].get("activation", "sigmoid:1.0"))
    sgd_sec = cfg["sgd"]
    rows = ["p,lambda,final_risk,test_accuracy,steps"]
    for wi, p in enumerate(_width_grid(cfg)):
        # one outer draw per width so each lambda line varies only the regularizer
        outer = _normalized_outer(p, _cell_seed(master, wi, 0))
        for li, lam in enumerate(_lambda_grid(cfg)):
            spec = LossSpec(data=train, activation=profile, lam=lam)
            run_cfg = SgdConfig(
                step_s=float(sgd_sec["step_s"]),
                batch_b=int(sgd_sec["batch_b"]),
                num_steps=(int(sgd_sec["num_steps"])
                           if "num_steps" in sgd_sec else None),
                epochs=(int(sgd_sec["epochs"]) if "epochs" in sgd_sec else None),
                seed=_cell_seed(master, wi, li + 1),
                record_every=int(sgd_sec.get("record_every", 1)),
            )
            traj = run_sgd(spec, run_cfg, outer)
            acc = accuracy(spec, traj.final, data=test)
            rows.append(f"{p},{float(lam)!r},{float(traj.risks[-1])!r},"
                        f"{float(acc)!r},{int(traj.steps[-1])}")
    path = os.path.join(out_dir, "sweep.csv")
    _write_text(path, "\n".join(rows) + "\n")
    return [path]


def cmd_verify(cfg: dict):
    """Divergence verification report; writes villani_report.json."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    train, _ = _load_datasets(cfg, master)
    profile = parse_activation(cfg["net"].get("activation", "sigmoid:1.0"))
    p = _width_grid(cfg)[0]
    lam = _lambda_grid(cfg)[0]
    sec = cfg.get("verify", {})
    outer = _normalized_outer(p, _cell_seed(master, 0, 0))
    spec = LossSpec(data=train, activation=profile, lam=lam)
    net = NetState(outer=outer, inner=np.zeros((p, train.d)))
    report = verify_villani(
        spec, net,
        s=float(sec.get("temp_s", DEFAULT_VERIFY_TEMP_S)),
        n_directions=int(sec.get("n_directions", 10)),
        high_water=float(sec.get("high_water", 1e6)),
        seed=int(sec.get("seed", master)),
    )
    path = os.path.join(out_dir, "villani_report.json")
    _write_text(path, report.to_json() + "\n")
    return [path]


def cmd_sde(cfg: dict):
    """Ensemble diffusion run; writes sde_series.csv."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    train, _ = _load_datasets(cfg, master)
    profile = parse_activation(cfg["net"].get("activation", "sigmoid:1.0"))
    p = _width_grid(cfg)[0]
    lam = _lambda_grid(cfg)[0]
    sec = cfg["sde"]
    outer = _normalized_outer(p, _cell_seed(master, 0, 0))
    spec = LossSpec(data=train, activation=profile, lam=lam)
    run_cfg = SdeConfig(
        temp_s=float(sec["temp_s"]), dt=float(sec["dt"]),
        horizon_t=float(sec["horizon_t"]), ensemble_m=int(sec["ensemble_m"]),
        seed=master,
        init=InitSpec(kind="gaussian_scaled",
                      sigma_w=float(sec.get("init_sigma", 1.0))),
        record_every=int(sec.get("record_every", 1)),
    )
    series = run_ensemble(spec, run_cfg, outer)
    path = os.path.join(out_dir, "sde_series.csv")
    os.makedirs(out_dir or ".", exist_ok=True)
    series.to_csv(path)
    return [path]


def cmd_gibbs(cfg: dict):
    """Gibbs lab quantities; writes gibbs_report.json."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    sec = cfg["gibbs"]
    if "quadratic" in sec:
        quad = sec["quadratic"]
        curv = float(quad["curvature"])
        dims = int(quad.get("dims", 1))
        lab = gibbs_lab_from_potential(
            value_fn=lambda pts: 0.5 * curv * np.sum(np.atleast_2d(pts) ** 2, axis=1),
            dims=dims, box_r=float(sec["box_r"]), grid_n=int(sec["grid_n"]),
            temp_s=float(sec["temp_s"]),
            grad_fn=lambda pts: curv * np.atleast_2d(pts),
            lap_fn=lambda pts: np.full(len(np.atleast_2d(pts)), curv * dims),
            tail_lam=curv, label="quadratic",
        )
    else:
        train, _ = _load_datasets(cfg, master)
        profile = parse_activation(cfg["net"].get("activation", "sigmoid:1.0"))
        p = _width_grid(cfg)[0]
        lam = _lambda_grid(cfg)[0]
        outer = _normalized_outer(p, _cell_seed(master, 0, 0))
        spec = LossSpec(data=train, activation=profile, lam=lam)
        lab = gibbs_lab_from_spec(spec, outer, box_r=float(sec["box_r"]),
                                  grid_n=int(sec["grid_n"]),
                                  temp_s=float(sec["temp_s"]), label="instance")
    report = lab_report(lab, float(sec["radius"]))
    path = os.path.join(out_dir, "gibbs_report.json")
    _write_text(path, _json_text(report))
    return [path]


def cmd_gendata(cfg: dict):
    """Synthetic dataset export; writes train.csv and test.csv."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    train, test = _load_datasets(cfg, master)
    paths = []
    for name, ds in (("train.csv", train), ("test.csv", test)):
        path = os.path.join(out_dir, name)
        _write_text(path, dataset_to_csv(ds))
        paths.append(path)
    return paths


def cmd_mnist(cfg: dict):
    """Digit-pair training run; writes mnist_curve.csv and mnist_result.json."""
    master = int(cfg.get("seed", 0))
    out_dir = cfg.get("output_dir", ".")
    sec = cfg["mnist"]
    digit_a, digit_b = int(sec["digit_a"]), int(sec["digit_b"])
    if digit_a > digit_b:
        digit_a, digit_b = digit_b, digit_a  # smaller digit maps to +1
    scale = sec.get("scale", "normalize_by_max_norm")
    train = binary_pair(load_idx(sec["train_images"]),
                        load_idx(sec["train_labels"]), digit_a, digit_b, scale)
    test = binary_pair(load_idx(sec["test_images"]),
                       load_idx(sec["test_labels"]), digit_a, digit_b, scale)
    p = int(sec.get("p", 12))
    lam = float(sec.get("lambda", 0.03125))
    profile = parse_activation("sigmoid:1.0")
    outer = _normalized_outer(p, _cell_seed(master, 0, 0))
    spec = LossSpec(data=train, activation=profile, lam=lam)
    run_cfg = SgdConfig(
        step_s=float(sec.get("step_s", 0.1)),
        batch_b=int(sec.get("batch_b", 3000)),
        epochs=int(sec.get("epochs", 100)),
        seed=_cell_seed(master, 0, 1),
        record_every=int(sec.get("record_every", 100)),
    )
    traj = run_sgd(spec, run_cfg, outer)
    acc = accuracy(spec, traj.final, data=test)
    result = {
        "digit_pair": [digit_a, digit_b],
        "p": p,
        "lambda": lam,
        "steps": int(traj.steps[-1]),
        "final_risk": float(traj.risks[-1]),
        "train_n": train.n,
        "test_n": test.n,
        "accuracy": float(acc),
    }
    curve_path = os.path.join(out_dir, "mnist_curve.csv")
    result_path = os.path.join(out_dir, "mnist_result.json")
    os.makedirs(out_dir or ".", exist_ok=True)
    traj.to_csv(curve_path)
    _write_text(result_path, _json_text(result))
    return [curve_path, result_path]


DISPATCH = {
    "train": cmd_train,
    "verify": cmd_verify,
    "sde": cmd_sde,
    "gibbs": cmd_gibbs,
    "gen-data": cmd_gendata,
    "mnist": cmd_mnist,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="villani-net",
        description="Regularized depth-2 net training, diffusion, and "
                    "Gibbs-measure toolkit",
    )
    parser.add_argument("command", choices=sorted(DISPATCH))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output-dir", default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        validate_config(cfg, args.command)
        paths = DISPATCH[args.command](cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
