"""Command-line front end.

Commands: synth | collect | train | classify | roc | sweep
Common flags: --config PATH, --seed N, --out DIR, --debug

Configuration files are line-oriented ``key=value`` text with ``#``
comments; explicit command-line flags override file values. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from .classify import (
    L1,
    STRUCTURED,
    ClassifierConfig,
    build_compound,
    classify,
    classify_src_baseline,
)
from .core import (
    BlockedDictionary,
    ImageVector,
    downsample_dictionary,
    downsample_vector,
    normalize_columns,
    normalize_vector,
    vectorize,
)
from .dictlearn import (
    KsvdConfig,
    OcclusionSampleSet,
    build_sample_set,
    collect_esrc,
    collect_soc,
    collect_ssrc,
    ksvd_train_with_trace,
)
from .errors import DegenerateError, OcclucodeError, ZeroPatternError
from .imageio import (
    FormatError,
    load_matrix,
    read_manifest,
    read_pgm,
    save_dictionary,
    save_matrix,
    load_dictionary,
)
from .maskest import MaskEstimatorConfig
from .solvers import SolverConfig
from .synth import CorpusPlan, OcclusionShape, SynthSpec, generate_corpus

SRC_MODE = "src"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing


def read_config(path: str) -> dict:
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


class Options:
    """Merged view of CLI flags over config-file values over defaults."""

    def __init__(self, args):
        self.args = args
        self.cfg = read_config(args.config) if args.config else {}

    def get(self, key, default, cast=str):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        if key in self.cfg:
            raw = self.cfg[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw)
        return default


def parse_shapes(text: str) -> tuple:
    """"name:kind:fraction,..." -> tuple of OcclusionShape."""
    shapes = []
    if not text:
        return ()
    for part in text.split(","):
        fields = part.strip().split(":")
        if len(fields) != 3:
            raise UsageError(f"bad shape spec {part!r} (want name:kind:fraction)")
        shapes.append(OcclusionShape(fields[0], fields[1], float(fields[2])))
    return tuple(shapes)


def parse_taus(text: str) -> tuple:
    return tuple(float(t) for t in text.split(","))


def parse_hw(text: str) -> tuple[int, int]:
    h, w = text.lower().split("x")
    return int(h), int(w)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


class StageTimer:
    """Per-stage wall times, written to a text file so the CSV outputs stay
    byte-reproducible across runs."""

    def __init__(self):
        self.stages = []

    def time(self, name):
        timer = self

        class _Ctx:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()

            def __exit__(self_inner, *exc):
                timer.stages.append((name, time.perf_counter() - self_inner.t0))

        return _Ctx()

    def write(self, out_dir):
        with open(os.path.join(out_dir, "timings.txt"), "w") as f:
            for name, seconds in self.stages:
                f.write(f"{name}\t{seconds:.3f}\n")


# ---------------------------------------------------------------------------
# corpus helpers


def load_gallery(corpus_dir: str):
    """Face dictionary (native resolution) from role=gallery images."""
    rows = read_manifest(corpus_dir)
    by_label: dict[str, list] = {}
    shape = None
    for row in rows:
        if row["role"] != "gallery":
            continue
        g = read_pgm(os.path.join(corpus_dir, row["path"]))
        shape = (g.height, g.width)
        by_label.setdefault(row["face_label"], []).append(
            vectorize(g, normalize=True).data
        )
    if not by_label:
        raise FormatError(f"{corpus_dir}: manifest has no gallery rows")
    from .core import FACE, Block

    cols, blocks, pos = [], [], 0
    for label, vecs in by_label.items():
        cols.extend(vecs)
        blocks.append(Block(label, FACE, pos, pos + len(vecs)))
        pos += len(vecs)
    return BlockedDictionary(np.stack(cols, axis=1), tuple(blocks)), shape, rows


def load_image_vector(corpus_dir, row, shape) -> ImageVector:
    g = read_pgm(os.path.join(corpus_dir, row["path"]))
    if (g.height, g.width) != shape:
        raise FormatError(f"{row['path']}: resolution differs from gallery")
    return vectorize(g)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    opt = Options(args)
    spec = SynthSpec(
        classes=opt.get("classes", 20, int),
        samples_per_class=opt.get("samples-per-class", 5, int),
        height=opt.get("height", 30, int),
        width=opt.get("width", 24, int),
        subspace_dim=opt.get("subspace-dim", 3, int),
        occlusion_shapes=opt.get("shapes", (), parse_shapes),
        noise_sigma=opt.get("noise-sigma", 0.0, float),
        seed=opt.get("seed", 0, int),
        test_per_class=opt.get("test-per-class", None, int),
    )
    plan = CorpusPlan(
        collect_classes=opt.get("collect-classes", 0, int),
        collect_per_class=opt.get("collect-per-class", 3, int),
        test_shapes=opt.get(
            "test-shapes", (), lambda s: tuple(x for x in s.split(",") if x)
        ),
        invalid_classes=opt.get("invalid-classes", 0, int),
        invalid_per_class=opt.get("invalid-per-class", 2, int),
        unknown_shapes=opt.get("unknown-shapes", (), parse_shapes),
    )
    manifest = generate_corpus(spec, plan, args.out)
    print(manifest)
    return 0


def _mask_config(opt) -> MaskEstimatorConfig:
    return MaskEstimatorConfig(
        h=opt.get("h", 20, int),
        beta=opt.get("beta", 20.0, float),
        tau_schedule=opt.get(
            "tau-schedule",
            parse_taus("0.005,0.0045,0.004,0.0035,0.003,0.0025,0.002"),
            parse_taus,
        ),
        max_outer_iters=opt.get("max-outer-iters", 20, int),
        neighborhood=opt.get("neighborhood", "4-connected", str),
        min_support_fraction=opt.get("min-support-fraction", 0.05, float),
    )


def cmd_collect(args) -> int:
    opt = Options(args)
    strategy = opt.get("strategy", "soc", str)
    if strategy not in ("soc", "ssrc", "esrc"):
        raise UsageError(f"unknown strategy {strategy!r}")
    labeled = opt.get("labeled", True, bool)
    corpus = args.corpus
    timer = StageTimer()
    os.makedirs(args.out, exist_ok=True)

    with timer.time("load"):
        gallery, shape, rows = load_gallery(corpus)
    mask_cfg = _mask_config(opt)
    rejected = []
    by_category: dict[str, list] = {}
    with timer.time("collect"):
        for row in rows:
            if row["role"] != "collect":
                continue
            u = normalize_vector(load_image_vector(corpus, row, shape))
            label = row["face_label"] if labeled else None
            category = row["occlusion_label"]
            try:
                if strategy == "soc":
                    debug_dir = (
                        os.path.join(args.out, "debug", os.path.splitext(row["path"])[0])
                        if args.debug
                        else None
                    )
                    if debug_dir is not None:
                        pattern = _collect_soc_debug(u, gallery, label, mask_cfg, debug_dir)
                    else:
                        pattern = collect_soc(u, gallery, label, mask_cfg)
                elif strategy == "ssrc":
                    sub = (
                        gallery.subdict(label)
                        if label is not None
                        else gallery.subdict(gallery.blocks[0].label)
                    )
                    pattern = collect_ssrc(u, sub)
                else:
                    sub = gallery.subdict(label) if label is not None else gallery
                    pattern = collect_esrc(u, sub)
            except (DegenerateError, ZeroPatternError) as exc:
                rejected.append([row["path"], type(exc).__name__, str(exc)])
                continue
            if np.linalg.norm(pattern.data) < 1e-6:
                rejected.append([row["path"], "NearZeroSample", "norm below 1e-6"])
                continue
            by_category.setdefault(category, []).append(pattern)

    with timer.time("write"):
        for category, patterns in by_category.items():
            sample_set = build_sample_set(patterns, category, strategy, labeled)
            save_matrix(
                os.path.join(args.out, f"samples_{category}"),
                sample_set.samples,
                extra={
                    "category": category,
                    "strategy": strategy,
                    "labeled": labeled,
                    "height": shape[0],
                    "width": shape[1],
                },
            )
        write_csv(
            os.path.join(args.out, "rejected.csv"),
            ["image", "reason", "detail"],
            rejected,
        )
    timer.write(args.out)
    for category in by_category:
        print(os.path.join(args.out, f"samples_{category}"))
    return 0


def _collect_soc_debug(u, gallery, label, mask_cfg, debug_dir):
    from .maskest import build_lcd, estimate_mask, extract_pattern

    basis = gallery.subdict(label) if label is not None else build_lcd(u, gallery, mask_cfg.h)
    est = estimate_mask(u, basis, mask_cfg, debug_dir=debug_dir)
    return extract_pattern(u, basis, est)


def cmd_train(args) -> int:
    opt = Options(args)
    cfg = KsvdConfig(
        atom_count=opt.get("atoms", 30, int),
        sparsity_budget=opt.get("sparsity-budget", 4, int),
        iterations=opt.get("iterations", 20, int),
        seed=opt.get("seed", 0, int),
    )
    timer = StageTimer()
    os.makedirs(args.out, exist_ok=True)
    with timer.time("train"):
        for prefix in args.samples:
            mat, meta = load_matrix(prefix)
            sample_set = OcclusionSampleSet(
                mat,
                meta.get("category", "occlusion"),
                meta.get("strategy", "soc"),
                bool(meta.get("labeled", True)),
            )
            dictionary, trace = ksvd_train_with_trace(sample_set, cfg)
            out_prefix = os.path.join(args.out, f"occdict_{sample_set.category}")
            save_dictionary(out_prefix, dictionary)
            write_csv(
                os.path.join(args.out, f"trace_{sample_set.category}.csv"),
                ["iteration", "frobenius_error"],
                [[i + 1, float(e)] for i, e in enumerate(trace)],
            )
            print(out_prefix)
    timer.write(args.out)
    return 0


def _solver_config(opt) -> SolverConfig:
    return SolverConfig(
        epsilon=opt.get("epsilon", 0.05, float),
        lam=opt.get("lam", None, float),
        q_norm=opt.get("q-norm", 2.0, float),
        max_iters=opt.get("max-iters", 2000, int),
        tol=opt.get("tol", 1e-6, float),
    )


def _load_occdicts(prefixes) -> list[BlockedDictionary]:
    return [load_dictionary(p) for p in prefixes]


def _downsample_setup(gallery, occ_dicts, shape, feat_hw):
    if feat_hw is None or feat_hw == shape:
        return gallery, occ_dicts, shape
    th, tw = feat_hw
    gallery = downsample_dictionary(gallery, shape, th, tw)
    occ_dicts = [downsample_dictionary(d, shape, th, tw) for d in occ_dicts]
    return gallery, occ_dicts, (th, tw)


def run_classification(corpus, occdict_prefixes, mode, opt, debug=False):
    """Classify every test/invalid image; returns (records, categories)."""
    gallery, shape, rows = load_gallery(corpus)
    occ_dicts = _load_occdicts(occdict_prefixes)
    feat = opt.get("features", None, parse_hw)
    gallery, occ_dicts, feat_shape = _downsample_setup(gallery, occ_dicts, shape, feat)
    solver = _solver_config(opt)
    cfg = ClassifierConfig(
        sparsity_mode=STRUCTURED if mode == STRUCTURED else L1,
        solver=solver,
        theta_face=opt.get("theta-face", 0.9, float),
        theta_occlusion=opt.get("theta-occlusion", 0.9, float),
        baseline_identity_occlusion=(mode == SRC_MODE),
    )
    compound = None
    if mode != SRC_MODE:
        compound = build_compound([gallery], occ_dicts)
    records = []
    for row in rows:
        if row["role"] not in ("test", "invalid"):
            continue
        u = load_image_vector(corpus, row, shape)
        if feat_shape != shape:
            u = downsample_vector(u, *feat_shape)
        u = normalize_vector(u)
        if mode == SRC_MODE:
            outcome = classify_src_baseline(u, gallery, cfg)
        else:
            outcome = classify(u, compound, cfg)
        records.append((row, outcome))
    categories = [b.label for d in occ_dicts for b in d.blocks]
    return records, categories


def _result_rows(records, debug):
    header = [
        "image",
        "role",
        "true_face",
        "true_occlusion",
        "pred_face",
        "pred_occlusion",
        "rdi_face",
        "rdi_occlusion",
    ]
    if debug:
        header += ["face_residuals", "occlusion_residuals"]
    rows = []
    for row, outcome in records:
        rec = [
            row["path"],
            row["role"],
            row["face_label"],
            row["occlusion_label"],
            outcome.face_label,
            outcome.occlusion_label,
            float(outcome.rdi_face),
            float(outcome.rdi_occlusion),
        ]
        if debug:
            rec.append(";".join(f"{k}={v!r}" for k, v in outcome.face_residuals.items()))
            rec.append(
                ";".join(f"{k}={v!r}" for k, v in outcome.occlusion_residuals.items())
            )
        rows.append(rec)
    return header, rows


def cmd_classify(args) -> int:
    opt = Options(args)
    mode = opt.get("mode", STRUCTURED, str)
    if mode not in (L1, STRUCTURED, SRC_MODE):
        raise UsageError(f"unknown mode {mode!r}")
    timer = StageTimer()
    os.makedirs(args.out, exist_ok=True)
    with timer.time("classify"):
        records, _ = run_classification(
            args.corpus, args.occdict, mode, opt, debug=args.debug
        )
    header, rows = _result_rows(records, args.debug)
    out_path = os.path.join(args.out, "results.csv")
    write_csv(out_path, header, rows)
    timer.write(args.out)
    n_test = sum(1 for r, _ in records if r["role"] == "test")
    correct = sum(
        1
        for r, o in records
        if r["role"] == "test" and o.face_label == r["face_label"]
    )
    if n_test:
        print(f"accuracy {correct}/{n_test} = {correct / n_test:.4f}")
    print(out_path)
    return 0


def cmd_roc(args) -> int:
    opt = Options(args)
    mode = opt.get("mode", STRUCTURED, str)
    if mode not in (L1, STRUCTURED, SRC_MODE):
        raise UsageError(f"unknown mode {mode!r}")
    timer = StageTimer()
    os.makedirs(args.out, exist_ok=True)
    with timer.time("classify"):
        records, categories = run_classification(args.corpus, args.occdict, mode, opt)

    face_valid, face_invalid, occ_valid, occ_invalid = [], [], [], []
    for row, outcome in records:
        rdi_f = outcome.rdi_face
        (face_valid if row["role"] == "test" else face_invalid).append(rdi_f)
        if row["occlusion_label"] != "-":
            rdi_o = outcome.rdi_occlusion
            if row["occlusion_label"] in categories:
                occ_valid.append(rdi_o)
            else:
                occ_invalid.append(rdi_o)

    def rate(scores, theta):
        # accepted when RDI <= theta; NaN (no classification task) accepts
        if not scores:
            return 0.0
        arr = np.asarray(scores)
        ok = np.isnan(arr) | (arr <= theta)
        return float(ok.mean())

    rows = []
    for i in range(101):
        theta = i / 100.0
        rows.append(
            [
                theta,
                rate(face_valid, theta),
                rate(face_invalid, theta),
                rate(occ_valid, theta),
                rate(occ_invalid, theta),
            ]
        )
    out_path = os.path.join(args.out, "roc.csv")
    write_csv(
        out_path,
        ["theta", "tpr_face", "fpr_face", "tpr_occlusion", "fpr_occlusion"],
        rows,
    )
    timer.write(args.out)
    print(out_path)
    return 0


def cmd_sweep(args) -> int:
    opt = Options(args)
    mode = opt.get("mode", STRUCTURED, str)
    sizes = [int(s) for s in opt.get("sizes", "2,3,5,7,10,20,30,40,50,60", str).split(",")]
    ksvd_seed = opt.get("seed", 0, int)
    budget = opt.get("sparsity-budget", 4, int)
    iterations = opt.get("iterations", 20, int)
    timer = StageTimer()
    os.makedirs(args.out, exist_ok=True)

    sample_sets = []
    for prefix in args.samples:
        mat, meta = load_matrix(prefix)
        sample_sets.append(
            OcclusionSampleSet(
                mat,
                meta.get("category", "occlusion"),
                meta.get("strategy", "soc"),
                bool(meta.get("labeled", True)),
            )
        )

    rows = []
    with timer.time("sweep"):
        for size in sizes:
            prefixes = []
            if size > 0:
                for s in sample_sets:
                    cfg = KsvdConfig(
                        atom_count=min(size, s.p),
                        sparsity_budget=budget,
                        iterations=iterations,
                        seed=ksvd_seed,
                    )
                    dictionary, _ = ksvd_train_with_trace(s, cfg)
                    prefix = os.path.join(args.out, f"_tmp_{s.category}_{size}")
                    save_dictionary(prefix, dictionary)
                    prefixes.append(prefix)
            records, _ = run_classification(args.corpus, prefixes, mode, opt)
            test = [(r, o) for r, o in records if r["role"] == "test"]
            correct = sum(1 for r, o in test if o.face_label == r["face_label"])
            acc = correct / len(test) if test else 0.0
            rows.append([size, float(acc)])
            for prefix in prefixes:
                os.remove(prefix + ".json")
                os.remove(prefix + ".f64")
    out_path = os.path.join(args.out, "sweep.csv")
    write_csv(out_path, ["occlusion_atoms", "accuracy"], rows)
    timer.write(args.out)
    print(out_path)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="occlucode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_out=True):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=need_out, help="output directory")
        p.add_argument("--debug", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p)
    for flag, typ in [
        ("--classes", int), ("--samples-per-class", int), ("--test-per-class", int),
        ("--height", int), ("--width", int), ("--subspace-dim", int),
        ("--noise-sigma", float), ("--collect-classes", int),
        ("--collect-per-class", int), ("--invalid-classes", int),
        ("--invalid-per-class", int),
    ]:
        p.add_argument(flag, type=typ, default=None)
    p.add_argument("--shapes", type=parse_shapes, default=None,
                   help="name:kind:fraction[,...]")
    p.add_argument("--unknown-shapes", type=parse_shapes, default=None)
    p.add_argument("--test-shapes", type=lambda s: tuple(x for x in s.split(",") if x),
                   default=None)

    p = sub.add_parser("collect", help="collect occlusion samples from a corpus")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--strategy", choices=["soc", "ssrc", "esrc"], default=None)
    p.add_argument("--labeled", type=lambda s: s.lower() in ("1", "true", "yes"),
                   default=None)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tau-schedule", type=parse_taus, default=None)
    p.add_argument("--max-outer-iters", type=int, default=None)
    p.add_argument("--min-support-fraction", type=float, default=None)

    p = sub.add_parser("train", help="train an occlusion dictionary with K-SVD")
    common(p)
    p.add_argument("--samples", action="append", required=True,
                   help="sample matrix prefix (repeatable)")
    p.add_argument("--atoms", type=int, default=None)
    p.add_argument("--sparsity-budget", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)

    def classify_common(p):
        common(p)
        p.add_argument("--corpus", required=True)
        p.add_argument("--occdict", action="append", default=[],
                       help="occlusion dictionary prefix (repeatable)")
        p.add_argument("--mode", choices=[L1, STRUCTURED, SRC_MODE], default=None)
        p.add_argument("--features", type=parse_hw, default=None,
                       help="downsampled feature resolution, e.g. 12x10")
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--lam", type=float, default=None)
        p.add_argument("--q-norm", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--theta-face", type=float, default=None)
        p.add_argument("--theta-occlusion", type=float, default=None)

    p = sub.add_parser("classify", help="classify test images")
    classify_common(p)

    p = sub.add_parser("roc", help="rejection-threshold sweep")
    classify_common(p)

    p = sub.add_parser("sweep", help="accuracy vs occlusion dictionary size")
    classify_common(p)
    p.add_argument("--samples", action="append", required=True)
    p.add_argument("--sizes", default=None)
    p.add_argument("--sparsity-budget", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)

    return parser


COMMANDS = {
    "synth": cmd_synth,
    "collect": cmd_collect,
    "train": cmd_train,
    "classify": cmd_classify,
    "roc": cmd_roc,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OcclucodeError, FormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
