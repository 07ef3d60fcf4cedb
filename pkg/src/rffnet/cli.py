"""Command-line entry point: train / eval / inspect / approx-bench.

Run configs are flat dotted-key text files (e.g. ``model.layers = 2``); command
line flags override file values. Every run directory is self-describing: the
resolved config, seeds, metrics, and logs are enough to replay it exactly.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import dataio, kernel_analysis, tasks
from .dataio import AffineStage, Dataset, SplitSpec, apply_stages, preprocess_pair, split
from .errors import DataError, NumericError, ParameterError, ParseError, ShapeError
from .kernel_analysis import SpectralDensity, empirical_kernel, kpca_project, omega_histogram, rff_approx_error
from .network import (
    accuracy,
    build_network,
    default_layer_count,
    forward_full,
    load_network,
    predict_from_logits,
    save_network,
)
from .numerics import Rng
from .optimizer import TrainConfig, fit

SMALL_DATA_LIMIT = 1000
SMALL_DATA_EPOCHS = 1000
SMALL_DATA_BATCH = 32  # full batch measurably underfits the small UCI tasks
LARGE_DATA_EPOCHS = 300
LARGE_DATA_BATCH = 256
BUILTIN_TASKS = ("monks1", "monks2", "monks3", "blobs")


@dataclass
class RunConfig:
    # data
    task: str | None = None
    registry: str = "data/registry.txt"
    path: str | None = None
    fmt: str = "csv"
    label_column: int = -1
    test_path: str | None = None
    split_mode: str = "random_half"
    normalize: str = "minmax+whiten"
    # model
    layers: str = "auto"
    dim: str = "64"
    batch_norm: bool = True
    loss: str = "auto"
    omega_stddev: float = 0.1
    readout_stddev: float = 0.1
    # training
    epochs: str = "auto"
    batch_size: str = "auto"
    lr: float = 1e-3
    reg_lambda: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    trials: int = 1
    shuffle: bool = True
    out: str = "runs/run"


_KEY_MAP = {
    "data.task": "task",
    "data.registry": "registry",
    "data.path": "path",
    "data.format": "fmt",
    "data.label_column": "label_column",
    "data.test_path": "test_path",
    "data.split": "split_mode",
    "data.normalize": "normalize",
    "model.layers": "layers",
    "model.dim": "dim",
    "model.batch_norm": "batch_norm",
    "model.loss": "loss",
    "model.omega_stddev": "omega_stddev",
    "model.readout_stddev": "readout_stddev",
    "train.epochs": "epochs",
    "train.batch_size": "batch_size",
    "train.lr": "lr",
    "train.lambda": "reg_lambda",
    "train.beta1": "beta1",
    "train.beta2": "beta2",
    "train.epsilon": "epsilon",
    "train.seed": "seed",
    "train.trials": "trials",
    "train.shuffle": "shuffle",
    "out": "out",
}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ParameterError(f"expected a boolean, got {value!r}")


def set_config_key(cfg: RunConfig, key: str, value: str) -> None:
    if key not in _KEY_MAP:
        raise ParameterError(f"unknown config key {key!r}")
    attr = _KEY_MAP[key]
    ftype = _FIELD_TYPES[attr]
    value = value.strip()
    try:
        if ftype == "bool":
            parsed = _parse_bool(value)
        elif ftype == "int":
            parsed = int(value)
        elif ftype == "float":
            parsed = float(value)
        else:
            parsed = None if value.lower() == "none" else value
    except ValueError:
        raise ParameterError(f"bad value {value!r} for config key {key!r}") from None
    setattr(cfg, attr, parsed)


def load_config_file(path) -> RunConfig:
    cfg = RunConfig()
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from None
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path} line {line_no}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        try:
            set_config_key(cfg, key.strip(), value)
        except (ValueError, ParameterError) as exc:
            raise ParameterError(f"{path} line {line_no}: {exc}") from None
    return cfg


def config_to_text(cfg: RunConfig) -> str:
    attr_to_key = {v: k for k, v in _KEY_MAP.items()}
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{attr_to_key[f.name]} = {value}")
    return "\n".join(sorted(lines)) + "\n"


def write_text_atomic(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --- data resolution --------------------------------------------------------


@dataclass
class TaskData:
    name: str
    provided: bool
    train: Dataset | None = None
    test: Dataset | None = None
    full: Dataset | None = None

    def for_trial(self, seed: int):
        if self.provided:
            return self.train, self.test
        return split(self.full, SplitSpec(mode="random_half", seed=seed))


def _builtin_task(name: str) -> TaskData:
    if name.startswith("monks"):
        train, test = tasks.make_monks(name)
        return TaskData(name=name, provided=True, train=train, test=test)
    if name == "blobs":
        return TaskData(name=name, provided=False, full=tasks.two_blobs(400))
    raise ParameterError(f"unknown built-in task {name!r}")


def load_task_data(cfg: RunConfig) -> TaskData:
    if cfg.task:
        if os.path.exists(cfg.registry):
            registry = dataio.parse_registry(cfg.registry)
            if cfg.task in registry:
                entry = registry[cfg.task]
                if entry.split_mode == "provided":
                    train, test = dataio.load_task(entry)
                    return TaskData(name=cfg.task, provided=True, train=train, test=test)
                loader = dataio.load_csv if entry.fmt == "csv" else dataio.load_libsvm
                if entry.fmt == "csv":
                    full = loader(entry.path, label_column=entry.label_column)
                else:
                    full = loader(entry.path)
                return TaskData(name=cfg.task, provided=False, full=full)
        if cfg.task in BUILTIN_TASKS:
            return _builtin_task(cfg.task)
        raise DataError(
            f"task {cfg.task!r} not found in registry {cfg.registry!r} and not built in; "
            f"run scripts/make_datasets.py (and scripts/fetch_data.py for the large UCI sets)"
        )
    if not cfg.path:
        raise ParameterError("config needs data.task or data.path")
    if cfg.fmt == "csv":
        data = dataio.load_csv(cfg.path, label_column=cfg.label_column)
    elif cfg.fmt == "libsvm":
        data = dataio.load_libsvm(cfg.path)
    else:
        raise ParameterError(f"unknown data format {cfg.fmt!r}")
    name = os.path.splitext(os.path.basename(cfg.path))[0]
    if cfg.test_path:
        label_map = {n: i for i, n in enumerate(data.label_names)}
        if cfg.fmt == "csv":
            test = dataio.load_csv(cfg.test_path, label_column=cfg.label_column, label_map=label_map)
        else:
            test = dataio.load_libsvm(cfg.test_path, label_map=label_map, min_dim=data.d)
        return TaskData(name=name, provided=True, train=data, test=test)
    if cfg.split_mode == "provided":
        raise ParameterError("data.split = provided requires data.test_path")
    return TaskData(name=name, provided=False, full=data)


@dataclass
class ResolvedModel:
    layer_count: int
    dims: list[int]
    loss_kind: str
    epochs: int
    batch_size: int | None


def _to_int(value, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParameterError(f"{what} must be an integer or 'auto', got {value!r}") from None


def resolve_model(cfg: RunConfig, n_train: int, n_classes: int) -> ResolvedModel:
    layer_count = default_layer_count(n_train) if cfg.layers == "auto" else _to_int(cfg.layers, "model.layers")
    if layer_count < 1:
        raise ParameterError(f"model.layers must be >= 1, got {layer_count}")
    dim_parts = [_to_int(tok, "model.dim") for tok in str(cfg.dim).split(",") if tok.strip()]
    if len(dim_parts) == 1:
        dims = dim_parts * layer_count
    elif len(dim_parts) == layer_count:
        dims = dim_parts
    else:
        raise ParameterError(f"model.dim lists {len(dim_parts)} widths for {layer_count} layers")
    if cfg.loss == "auto":
        loss_kind = "squared_hinge" if n_classes == 2 else "cross_entropy"
    else:
        loss_kind = cfg.loss
    small = n_train <= SMALL_DATA_LIMIT
    epochs = (SMALL_DATA_EPOCHS if small else LARGE_DATA_EPOCHS) if cfg.epochs == "auto" else _to_int(cfg.epochs, "train.epochs")
    if cfg.batch_size == "auto":
        batch_size = min(SMALL_DATA_BATCH, n_train) if small else LARGE_DATA_BATCH
    elif str(cfg.batch_size).lower() == "full":
        batch_size = None
    else:
        batch_size = _to_int(cfg.batch_size, "train.batch_size")
    if epochs < 0:
        raise ParameterError(f"train.epochs must be >= 0, got {epochs}")
    return ResolvedModel(layer_count=layer_count, dims=dims, loss_kind=loss_kind,
                         epochs=epochs, batch_size=batch_size)


# --- train ------------------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    seed: int
    test_acc: float
    train_acc: float


def run_training(cfg: RunConfig) -> list[TrialResult]:
    """Train cfg.trials models (seeds seed, seed+1, ...) and write all artifacts."""
    if cfg.trials < 1:
        raise ParameterError(f"train.trials must be >= 1, got {cfg.trials}")
    data = load_task_data(cfg)
    # validate the whole configuration before any output is created
    if cfg.normalize not in dataio.NORMALIZE_SCHEMES:
        raise ParameterError(f"unknown normalization scheme {cfg.normalize!r}")
    probe_train, _ = data.for_trial(cfg.seed)
    probe = resolve_model(cfg, probe_train.n, probe_train.class_count)
    if cfg.batch_norm and (probe.batch_size or probe_train.n) < 2:
        raise ParameterError("batch norm requires batches of at least 2 samples")
    os.makedirs(cfg.out, exist_ok=True)
    write_text_atomic(os.path.join(cfg.out, "config.txt"), config_to_text(cfg))
    results = []
    resolved = None
    for t in range(cfg.trials):
        seed_t = cfg.seed + t
        train_raw, test_raw = data.for_trial(seed_t)
        train, test, stages = preprocess_pair(train_raw, test_raw, cfg.normalize)
        resolved = resolve_model(cfg, train.n, train.class_count)
        net = build_network(
            d_in=train.d,
            n_classes=train.class_count,
            layer_count=resolved.layer_count,
            D_per_layer=resolved.dims,
            loss_kind=resolved.loss_kind,
            rng=Rng(seed_t).derive("init"),
            batch_norm=cfg.batch_norm,
            omega_stddev=cfg.omega_stddev,
            readout_stddev=cfg.readout_stddev,
        )
        tc = TrainConfig(epochs=resolved.epochs, batch_size=resolved.batch_size,
                         reg_lambda=cfg.reg_lambda, seed=seed_t, lr=cfg.lr,
                         beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon,
                         shuffle=cfg.shuffle)
        log = fit(net, train.X, train.y, tc)
        test_acc = accuracy(net, test.X, test.y)
        train_acc = log.records[-1].train_acc if log.records else accuracy(net, train.X, train.y)
        save_network(net, os.path.join(cfg.out, f"model-trial{t}.bin"),
                     preprocess=[(s.shift, s.div) for s in stages],
                     label_names=train.label_names)
        write_text_atomic(os.path.join(cfg.out, f"log-trial{t}.csv"), log.to_csv_text())
        results.append(TrialResult(trial=t, seed=seed_t, test_acc=test_acc, train_acc=train_acc))
    metrics_lines = ["trial,seed,test_acc,train_acc"]
    for r in results:
        metrics_lines.append(f"{r.trial},{r.seed},{r.test_acc!r},{r.train_acc!r}")
    write_text_atomic(os.path.join(cfg.out, "metrics.csv"), "\n".join(metrics_lines) + "\n")
    accs = np.array([r.test_acc for r in results])
    mean_acc = float(accs.mean())
    std_acc = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
    dims_str = "/".join(str(d) for d in resolved.dims)
    summary = "dataset,layers,D,trials,mean_acc,std_acc\n"
    summary += f"{data.name},{resolved.layer_count},{dims_str},{cfg.trials},{mean_acc!r},{std_acc!r}\n"
    write_text_atomic(os.path.join(cfg.out, "summary.csv"), summary)
    print(f"{data.name}: layers={resolved.layer_count} D={dims_str} trials={cfg.trials} "
          f"mean_acc={mean_acc:.4f} std_acc={std_acc:.4f}")
    return results


def _config_from_args(args) -> RunConfig:
    cfg = load_config_file(args.config) if args.config else RunConfig()
    direct = {
        "task": "data.task", "data_path": "data.path", "format": "data.format",
        "label_column": "data.label_column", "test_path": "data.test_path",
        "data_split": "data.split", "normalize": "data.normalize", "registry": "data.registry",
        "layers": "model.layers", "dim": "model.dim", "loss": "model.loss",
        "epochs": "train.epochs", "batch_size": "train.batch_size", "lr": "train.lr",
        "reg_lambda": "train.lambda", "seed": "train.seed", "trials": "train.trials",
        "out": "out",
    }
    for attr, key in direct.items():
        value = getattr(args, attr, None)
        if value is not None:
            set_config_key(cfg, key, str(value))
    if getattr(args, "batch_norm", None) is not None:
        cfg.batch_norm = args.batch_norm
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        set_config_key(cfg, key.strip(), value)
    return cfg


def cmd_train(args) -> int:
    run_training(_config_from_args(args))
    return 0


# --- eval -------------------------------------------------------------------


def _load_eval_data(args, label_names):
    """Resolve the dataset for eval/inspect from --task / --data-path / --config.

    A bare --data-path evaluates the whole file; task-style sources honour
    --on train|test (random-half tasks replay the split for --split-seed)."""
    cfg = load_config_file(args.config) if getattr(args, "config", None) else RunConfig()
    if args.task:
        cfg.task = args.task
        cfg.path = None
    if args.registry:
        cfg.registry = args.registry
    if args.data_path:
        cfg.task = None
        cfg.path = args.data_path
        cfg.fmt = args.format
        cfg.label_column = args.label_column
    if not cfg.task and not cfg.path:
        raise ParameterError("need --task, --data-path, or a --config naming one")
    if cfg.path and not cfg.test_path:
        label_map = {n: i for i, n in enumerate(label_names)} if label_names else None
        if cfg.fmt == "libsvm":
            return dataio.load_libsvm(cfg.path, label_map=label_map)
        return dataio.load_csv(cfg.path, label_column=cfg.label_column, label_map=label_map)
    data = load_task_data(cfg)
    if data.provided:
        return data.train if args.on == "train" else data.test
    split_seed = args.split_seed if args.split_seed is not None else cfg.seed
    train, test = data.for_trial(split_seed)
    return train if args.on == "train" else test


def _prepare_eval_features(net, stages, data: Dataset):
    if stages and stages[0][0].shape[0] != data.d:
        raise ShapeError(f"model expects {stages[0][0].shape[0]} raw features, dataset has {data.d}")
    X = apply_stages(data.X, [AffineStage(shift=s, div=d) for s, d in stages])
    if X.shape[1] != net.d_in:
        raise ShapeError(f"model expects {net.d_in} input features, dataset has {X.shape[1]}")
    return X


def cmd_eval(args) -> int:
    net, stages, label_names = load_network(args.model)
    data = _load_eval_data(args, label_names)
    X = _prepare_eval_features(net, stages, data)
    logits = forward_full(net, X, training=False).logits
    pred = predict_from_logits(logits)
    acc = float(np.mean(pred == data.y))
    classes = net.class_count
    confusion = np.zeros((classes, classes), dtype=np.int64)
    for t, p in zip(data.y, pred):
        confusion[t, p] += 1
    names = label_names if label_names else [str(i) for i in range(classes)]
    lines = ["true\\pred," + ",".join(names)]
    for i in range(classes):
        lines.append(names[i] + "," + ",".join(str(v) for v in confusion[i]))
    os.makedirs(args.out, exist_ok=True)
    write_text_atomic(os.path.join(args.out, "confusion.csv"), "\n".join(lines) + "\n")
    print(repr(acc))
    return 0


# --- inspect ----------------------------------------------------------------


def cmd_inspect(args) -> int:
    net, stages, label_names = load_network(args.model)
    data = _load_eval_data(args, label_names)
    X = _prepare_eval_features(net, stages, data)
    y = data.y
    if args.max_samples and X.shape[0] > args.max_samples:
        keep = np.sort(Rng(args.seed).derive("inspect").permutation(X.shape[0])[: args.max_samples])
        X, y = X[keep], y[keep]
    trace = forward_full(net, X, training=False)
    n_layers = len(net.layers)
    if args.layer is None:
        layer_indices = list(range(n_layers))
    else:
        if not 0 <= args.layer < n_layers:
            raise ParameterError(f"layer index {args.layer} out of range for {n_layers} layers")
        layer_indices = [args.layer]
    hist_dims = [int(tok) for tok in args.hist_dims.split(",") if tok.strip()] if args.hist_dims else [0]
    os.makedirs(args.out, exist_ok=True)
    for i in layer_indices:
        feats = trace.caches[i].features  # raw trig features, before batch norm
        K = empirical_kernel(feats, layer_index=i)
        write_text_atomic(os.path.join(args.out, f"kernel-layer{i}.csv"),
                          kernel_analysis.kernel_to_csv_text(K))
        proj = kpca_project(K, args.kpca_dim)
        write_text_atomic(os.path.join(args.out, f"kpca-layer{i}.csv"),
                          kernel_analysis.kpca_to_csv_text(proj, labels=y))
        for dim in hist_dims:
            edges, counts = omega_histogram(net.layers[i], dim, args.bins)
            write_text_atomic(os.path.join(args.out, f"hist-layer{i}-dim{dim}.csv"),
                              kernel_analysis.histogram_to_csv_text(edges, counts))
    print(f"wrote diagnostics for layers {layer_indices} to {args.out}")
    return 0


# --- approx-bench -----------------------------------------------------------


def cmd_approx_bench(args) -> int:
    dims = [int(tok) for tok in args.dims.split(",") if tok.strip()]
    if not dims:
        raise ParameterError("need at least one feature count in --dims")
    density = SpectralDensity(kind=args.density, bandwidth=args.bandwidth)
    rng = Rng(args.seed)
    U = rng.derive("points").normal((args.pairs, args.features))
    V = U + args.spread * rng.derive("offsets").normal((args.pairs, args.features))
    lines = ["D,mean_error,max_error"]
    for D in dims:
        err = rff_approx_error(density, D, U, V, rng.derive("freqs", D))
        lines.append(f"{D},{err.mean_error!r},{err.max_error!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        out_dir = os.path.dirname(args.out)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        write_text_atomic(args.out, text)
    print(text, end="")
    return 0


# --- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors map to exit code 1, not argparse's 2
        raise ParameterError(message)


def _add_data_args(p):
    p.add_argument("--config", help="reuse a run config's data section")
    p.add_argument("--task", help="registry or built-in task name")
    p.add_argument("--registry", default=None, help="registry manifest path")
    p.add_argument("--data-path", help="dataset file (alternative to --task)")
    p.add_argument("--format", choices=["csv", "libsvm"], default="csv")
    p.add_argument("--label-column", type=int, default=-1)
    p.add_argument("--on", choices=["train", "test"], default="test")
    p.add_argument("--split-seed", type=int, default=None,
                   help="split seed for random-half tasks (default: the config's train.seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rffnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one or more models")
    p_train.add_argument("--config", help="flat key=value config file")
    p_train.add_argument("--task")
    p_train.add_argument("--registry")
    p_train.add_argument("--data-path")
    p_train.add_argument("--format", dest="format", choices=["csv", "libsvm"])
    p_train.add_argument("--label-column", type=int)
    p_train.add_argument("--test-path")
    p_train.add_argument("--data-split", choices=["provided", "random_half"])
    p_train.add_argument("--normalize")
    p_train.add_argument("--layers")
    p_train.add_argument("--dim")
    p_train.add_argument("--loss", choices=["auto", "squared", "squared_hinge", "cross_entropy"])
    p_train.add_argument("--epochs")
    p_train.add_argument("--batch-size")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--reg-lambda", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--trials", type=int)
    p_train.add_argument("--out")
    p_train.add_argument("--batch-norm", dest="batch_norm", action="store_true", default=None)
    p_train.add_argument("--no-batch-norm", dest="batch_norm", action="store_false")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("model")
    _add_data_args(p_eval)
    p_eval.add_argument("--out", default=".")
    p_eval.set_defaults(func=cmd_eval)

    p_inspect = sub.add_parser("inspect", help="export kernel/kPCA/histogram diagnostics")
    p_inspect.add_argument("model")
    _add_data_args(p_inspect)
    p_inspect.add_argument("--layer", type=int, default=None, help="single layer index (default: all)")
    p_inspect.add_argument("--kpca-dim", type=int, default=2, choices=[2, 3])
    p_inspect.add_argument("--bins", type=int, default=20)
    p_inspect.add_argument("--hist-dims", default="0", help="comma list of omega columns")
    p_inspect.add_argument("--max-samples", type=int, default=256)
    p_inspect.add_argument("--seed", type=int, default=0)
    p_inspect.add_argument("--out", default="inspect-out")
    p_inspect.set_defaults(func=cmd_inspect)

    p_bench = sub.add_parser("approx-bench", help="feature-map approximation error vs. D")
    p_bench.add_argument("--density", choices=["rbf", "laplacian", "cauchy"], default="rbf")
    p_bench.add_argument("--bandwidth", type=float, default=1.0)
    p_bench.add_argument("--dims", default="64,256,1024,4096")
    p_bench.add_argument("--pairs", type=int, default=200)
    p_bench.add_argument("--features", type=int, default=3)
    p_bench.add_argument("--spread", type=float, default=1.0)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_approx_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ParseError, ShapeError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
