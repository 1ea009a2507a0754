"""Command-line pipeline: raster sketch -> strokes -> skeleton -> paths -> SVG.

Subcommands
-----------
vectorize  run all stages on raster images and write SVG plus optional artifacts
eval       corrupt a directory of clean drawings, vectorize, and score the result
corrupt    write corrupted versions of clean drawings (or synthetic drawings)
thin       skeletonise binary masks only

Masks are read and written as dark ink on a light background. Every output
file is named ``<input-stem>.<artifact>.<ext>``. Exit status is 0 on success,
1 on I/O errors and 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from . import bezfit as bf
from . import evalgen as eg
from . import linex, raster, thin
from . import pathgraph as pg

INPUT_SUFFIXES = (".png", ".tif", ".tiff", ".pgm", ".pbm", ".ppm")
ARTIFACTS = ("svg", "json", "mask", "skeleton", "metrics")

EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------

@dataclass
class ThinConfig:
    unbias: bool = True
    cord: int = 15

    def validate(self) -> None:
        if self.cord < 3:
            raise ValueError("cord length must be >= 3")


@dataclass
class GraphConfig:
    prune_len: int = 10
    iterative_prune: bool = True
    junction_radius: float = 4.0
    parallel_gap: float = 3.0
    link_dist: float = 10.0
    link_angle_deg: float = 30.0

    def validate(self) -> None:
        for name in ("prune_len", "junction_radius", "parallel_gap", "link_dist"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.link_angle_deg <= 180:
            raise ValueError("link_angle_deg must lie in [0, 180]")


@dataclass
class PipelineConfig:
    linex: linex.LinexConfig = field(default_factory=linex.LinexConfig)
    thin: ThinConfig = field(default_factory=ThinConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    fit: bf.FitConfig = field(default_factory=bf.FitConfig)
    emit: tuple[str, ...] = ("svg",)
    seed: int = 0

    def validate(self) -> None:
        try:
            self.linex.validate()
            self.thin.validate()
            self.graph.validate()
            self.fit.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        bad = set(self.emit) - set(ARTIFACTS)
        if bad:
            raise ConfigError(f"unknown artifacts: {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["emit"] = list(self.emit)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            return cls(
                linex=_build(linex.LinexConfig, d.get("linex", {})),
                thin=_build(ThinConfig, d.get("thin", {})),
                graph=_build(GraphConfig, d.get("graph", {})),
                fit=_build(bf.FitConfig, d.get("fit", {})),
                emit=tuple(d.get("emit", ("svg",))),
                seed=int(d.get("seed", 0)),
            )
        except (TypeError, AttributeError) as e:
            raise ConfigError(f"malformed configuration: {e}") from e


def _build(kind, values: dict):
    names = {f.name for f in fields(kind)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return kind(**values)


# -- pipeline ---------------------------------------------------------------------

@dataclass
class VectorResult:
    shape: tuple[int, int]
    mask: np.ndarray
    skeleton: np.ndarray
    graph: pg.PathGraph
    splines: list[bf.BezierSpline]

    @property
    def control_points(self) -> int:
        return sum(bf.count_control_points(s) for s in self.splines)


def fitting_points(g: pg.PathGraph, i: int) -> tuple[np.ndarray, bool]:
    """Points to fit for path ``i`` and whether they form a loop."""
    p = g.paths[i]
    if p.category == pg.Category.CLOSED:
        return p.as_array().astype(np.float64), True
    return pg.points_for_fitting(g, i).astype(np.float64), False


def fit_graph(g: pg.PathGraph, cfg: bf.FitConfig) -> list[bf.BezierSpline]:
    out = []
    for i in range(len(g.paths)):
        pts, closed = fitting_points(g, i)
        if closed:
            out.append(bf.fit_closed_path(pts, cfg))
        elif len(pts) >= 2:
            out.append(bf.fit_path(pts, cfg))
        else:
            # an isolated dot: one degenerate segment
            out.append(bf.BezierSpline((bf.CubicBezier(np.repeat(pts, 4, axis=0)),), False, ()))
    return out


def vectorize_array(gray: np.ndarray, cfg: PipelineConfig | None = None) -> VectorResult:
    """Run every stage on a grayscale image (dark strokes on light paper)."""
    cfg = cfg or PipelineConfig()
    cfg.validate()
    gray = raster.as_gray(gray)
    mask = linex.extract_lines_region(gray, cfg.linex)
    if cfg.thin.unbias:
        skel = thin.unbiased_thin(mask, cfg.thin.cord)
    else:
        skel = thin.zhang_suen_thin(mask)
    gc = cfg.graph
    g = pg.vectorize_skeleton(skel, prune_len=gc.prune_len, iterative=gc.iterative_prune,
                              junction_radius=gc.junction_radius, parallel_gap=gc.parallel_gap,
                              link_dist=gc.link_dist, link_angle=math.radians(gc.link_angle_deg))
    return VectorResult(gray.shape, mask, skel, g, fit_graph(g, cfg.fit))


# -- serialisation ----------------------------------------------------------------------

def _num(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _pt(p) -> str:
    # pixel (x, y) has its centre at (x + 0.5, y + 0.5) in SVG user units
    return f"{_num(p[0] + 0.5)} {_num(p[1] + 0.5)}"


def path_data(s: bf.BezierSpline) -> str:
    """Absolute SVG path data: one move, one cubic command per segment."""
    if not s.segments:
        return ""
    parts = [f"M {_pt(s.segments[0].ctrl[0])}"]
    for seg in s.segments:
        c = seg.ctrl
        parts.append(f"C {_pt(c[1])} {_pt(c[2])} {_pt(c[3])}")
    if s.closed:
        parts.append("Z")
    return " ".join(parts)


def to_svg(splines, shape) -> str:
    h, w = shape
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        '<g fill="none" stroke="#000000" stroke-width="1" stroke-linecap="round" '
        'stroke-linejoin="round">',
    ]
    for s in splines:
        if s.segments:
            lines.append(f'<path d="{path_data(s)}"/>')
    lines += ["</g>", "</svg>", ""]
    return "\n".join(lines)


def splines_to_dict(splines) -> list[dict]:
    return [{
        "closed": s.closed,
        "c1": list(s.c1),
        "segments": [np.round(seg.ctrl, 6).tolist() for seg in s.segments],
    } for s in splines]


def metrics(res: VectorResult) -> dict:
    err = 0.0
    for i, s in enumerate(res.splines):
        pts, _ = fitting_points(res.graph, i)
        if len(pts):
            err = max(err, float(bf.spline_distance(pts, s).max()))
    return {
        "height": res.shape[0],
        "width": res.shape[1],
        "stroke_pixels": int(res.mask.sum()),
        "skeleton_pixels": int(res.graph.skeleton().sum()),
        "paths": len(res.graph.paths),
        "junctions": len(res.graph.junctions),
        "segments": sum(len(s.segments) for s in res.splines),
        "control_points": res.control_points,
        "max_fit_error": round(err, 6),
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# -- image I/O ------------------------------------------------------------------------

def read_gray(path: Path) -> np.ndarray:
    """Grayscale in [0, 1]; colour converts by luma, alpha composites on white."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
            rgba = im.convert("RGBA")
            bg = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
            im = Image.alpha_composite(bg, rgba)
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            top = 65535.0 if arr.max() > 255 else 255.0
            return np.clip(arr / top, 0.0, 1.0)
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def read_mask(path: Path) -> np.ndarray:
    """Binary mask where dark pixels are foreground."""
    return read_gray(path) < 0.5


def write_gray(path: Path, gray: np.ndarray) -> None:
    arr = np.rint(np.clip(gray, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def write_mask(path: Path, mask: np.ndarray) -> None:
    write_gray(path, np.where(mask, 0.0, 1.0))


def _inputs(items) -> list[Path]:
    out = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            out += sorted(q for q in p.iterdir() if q.suffix.lower() in INPUT_SUFFIXES)
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(f"no such input: {p}")
    return out


# -- runners ----------------------------------------------------------------------------

def run_vectorize(path: Path, cfg: PipelineConfig, outdir: Path) -> VectorResult:
    """Vectorize one raster file and write the requested artifacts."""
    res = vectorize_array(read_gray(path), cfg)
    stem = path.stem
    outdir.mkdir(parents=True, exist_ok=True)
    if "svg" in cfg.emit:
        (outdir / f"{stem}.paths.svg").write_text(to_svg(res.splines, res.shape))
    if "json" in cfg.emit:
        doc = res.graph.to_dict()
        doc["splines"] = splines_to_dict(res.splines)
        (outdir / f"{stem}.graph.json").write_text(_dumps(doc))
    if "mask" in cfg.emit:
        write_mask(outdir / f"{stem}.mask.png", res.mask)
    if "skeleton" in cfg.emit:
        write_mask(outdir / f"{stem}.skeleton.png", res.graph.skeleton())
    if "metrics" in cfg.emit:
        (outdir / f"{stem}.metrics.json").write_text(_dumps(metrics(res)))
    (outdir / f"{stem}.config.json").write_text(_dumps(cfg.to_dict()))
    return res


def _eval_one(args) -> eg.EvalRow:
    name, gt, cfg, ccfg, tolerance = args
    gray, gt = eg.corrupt(gt, ccfg)
    res = vectorize_array(gray, cfg)
    return eg.evaluate(name, res.mask, res.graph.skeleton(), gt, tolerance)


def corruption_for(ccfg: eg.CorruptionConfig, base_seed: int, index: int) -> eg.CorruptionConfig:
    d = asdict(ccfg)
    d["seed"] = base_seed + index
    return eg.CorruptionConfig(**d)


def run_eval(gt_dir: Path, cfg: PipelineConfig, ccfg: eg.CorruptionConfig, outdir: Path | None = None,
             tolerance: float = 3.0, jobs: int = 1) -> eg.EvalReport:
    """Corrupt every drawing in ``gt_dir``, vectorize it and score the stroke mask.

    Image ``i`` (in sorted file order) is corrupted with seed ``ccfg.seed + i``.
    """
    cfg.validate()
    try:
        ccfg.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if tolerance < 0:
        raise ConfigError("tolerance must be >= 0")
    gt_dir = Path(gt_dir)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {gt_dir}")
    files = _inputs([gt_dir])
    if not files:
        raise FileNotFoundError(f"no ground-truth images in {gt_dir}")
    tasks = [(f.stem, read_mask(f), cfg, corruption_for(ccfg, ccfg.seed, i), tolerance)
             for i, f in enumerate(files)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_eval_one, tasks))
    else:
        rows = [_eval_one(t) for t in tasks]
    report = eg.EvalReport(rows)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        stem = gt_dir.resolve().name
        (outdir / f"{stem}.eval.csv").write_text(report.to_csv())
        (outdir / f"{stem}.eval.json").write_text(report.to_json() + "\n")
        echo = {"pipeline": cfg.to_dict(), "corruption": asdict(ccfg), "tolerance": tolerance}
        (outdir / f"{stem}.config.json").write_text(_dumps(echo))
    return report


# -- argument parsing ----------------------------------------------------------------------

def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", type=Path, help="JSON configuration echoed by a previous run")
    g.add_argument("--wmin", type=float, help="smallest stroke width (px)")
    g.add_argument("--wmax", type=float, help="largest stroke width (px)")
    g.add_argument("--scale-base", type=float, help="ratio between kernel widths")
    g.add_argument("--pcc-threshold", type=float, help="MPCC threshold for stroke pixels")
    g.add_argument("--median-window", type=int, help="background removal window (odd)")
    g.add_argument("--prune-len", type=int, help="branches shorter than this are pruned")
    g.add_argument("--junction-radius", type=float, help="junctions closer than this merge")
    g.add_argument("--parallel-gap", type=float, help="twin paths closer than this merge")
    g.add_argument("--link-dist", type=float, help="largest gap bridged by linking")
    g.add_argument("--link-angle", type=float, help="largest linking angle (degrees)")
    g.add_argument("--fit-err", type=float, help="desired fitting error (px)")
    g.add_argument("--iters-per-pixel", type=float, help="refinement budget per point")
    g.add_argument("--early-stop-fraction", type=float, help="early-stop fraction f")
    g.add_argument("--psi-skip", action="store_true", default=None,
                   help="classic fitting: skip refinement beyond psi = err^2")
    g.add_argument("--no-unbias", action="store_true", default=None,
                   help="plain Zhang-Suen thinning")
    g.add_argument("--seed", type=int, help="random seed")


def _load_config(args) -> PipelineConfig:
    if args.config is not None:
        try:
            d = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{args.config}: {e}") from e
        # an eval echo nests the pipeline settings
        cfg = PipelineConfig.from_dict(d.get("pipeline", d))
    else:
        cfg = PipelineConfig()
    lx, gr, ft = cfg.linex, cfg.graph, cfg.fit
    overrides = [
        (lx, "w_min", args.wmin), (lx, "w_max", args.wmax), (lx, "base", args.scale_base),
        (lx, "mpcc_threshold", args.pcc_threshold), (lx, "median_window", args.median_window),
        (gr, "prune_len", args.prune_len), (gr, "junction_radius", args.junction_radius),
        (gr, "parallel_gap", args.parallel_gap), (gr, "link_dist", args.link_dist),
        (gr, "link_angle_deg", args.link_angle),
        (ft, "desired_err", args.fit_err), (ft, "iterations_per_pixel", args.iters_per_pixel),
        (ft, "early_stop_fraction", args.early_stop_fraction), (ft, "psi_skip", args.psi_skip),
        (cfg, "seed", args.seed),
    ]
    for obj, name, value in overrides:
        if value is not None:
            setattr(obj, name, value)
    if args.no_unbias:
        cfg.thin.unbias = False
    if getattr(args, "emit", None):
        cfg.emit = tuple(dict.fromkeys(args.emit))
    if args.median_window is None and cfg.linex.median_window <= 2 * cfg.linex.w_max:
        # keep the background window wider than the widest kernel
        m = int(math.floor(2 * cfg.linex.w_max)) + 1
        cfg.linex.median_window = m + 1 - m % 2
    cfg.validate()
    return cfg


def _corruption_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("corruption")
    g.add_argument("--clean", action="store_true", help="no corruption: one black pass of fixed width")
    g.add_argument("--target-mp", type=float, help="rescale drawings to about this many megapixels")
    g.add_argument("--corruption", type=Path, help="JSON file of corruption settings")


def _corruption_config(args, seed: int) -> eg.CorruptionConfig:
    if args.corruption is not None:
        try:
            d = json.loads(Path(args.corruption).read_text())
            d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
            ccfg = eg.CorruptionConfig(**d)
        except (json.JSONDecodeError, TypeError) as e:
            raise ConfigError(f"{args.corruption}: {e}") from e
    elif args.clean:
        ccfg = eg.CorruptionConfig.clean()
    else:
        ccfg = eg.CorruptionConfig()
    ccfg.seed = seed
    if args.target_mp is not None:
        ccfg.target_megapixels = args.target_mp
    try:
        ccfg.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return ccfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sketchvec", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("vectorize", help="raster sketches to SVG")
    v.add_argument("inputs", nargs="+", help="image files or directories")
    v.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    v.add_argument("--emit", nargs="+", choices=ARTIFACTS, help="artifacts to write (default: svg)")
    _pipeline_flags(v)

    e = sub.add_parser("eval", help="score the pipeline on corrupted clean drawings")
    e.add_argument("gt_dir", type=Path, help="directory of clean line drawings")
    e.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    e.add_argument("--tolerance", type=float, default=3.0, help="match tolerance (px)")
    e.add_argument("--jobs", type=int, default=1, help="worker processes")
    _pipeline_flags(e)
    _corruption_flags(e)

    c = sub.add_parser("corrupt", help="write corrupted sketches of clean drawings")
    c.add_argument("inputs", nargs="*", help="clean drawings (files or directories)")
    c.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    c.add_argument("--seed", type=int, default=0, help="random seed")
    c.add_argument("--synthetic", type=int, default=0, metavar="N",
                   help="also generate N synthetic clean drawings first")
    c.add_argument("--size", type=int, default=1000, help="side of synthetic drawings (px)")
    _corruption_flags(c)

    t = sub.add_parser("thin", help="skeletonise binary masks")
    t.add_argument("inputs", nargs="+", help="masks (dark foreground)")
    t.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    t.add_argument("--no-unbias", action="store_true", help="plain Zhang-Suen thinning")
    t.add_argument("--cord", type=int, default=15, help="chord length for curvature")
    return ap


def _cmd_vectorize(args) -> int:
    cfg = _load_config(args)
    for path in _inputs(args.inputs):
        t0 = time.perf_counter()
        res = run_vectorize(path, cfg, args.out)
        print(f"{path.name}: {len(res.splines)} paths, {res.control_points} control points "
              f"({time.perf_counter() - t0:.2f} s)", file=sys.stderr)
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    ccfg = _corruption_config(args, cfg.seed)
    report = run_eval(args.gt_dir, cfg, ccfg, args.out, args.tolerance, args.jobs)
    print(json.dumps(report.summary(), sort_keys=True))
    return EXIT_OK


def _cmd_corrupt(args) -> int:
    ccfg = _corruption_config(args, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    items = []
    for k in range(args.synthetic):
        name = f"synthetic{k:03d}"
        gt = eg.synthetic_drawing(args.seed + k, (args.size, args.size))
        write_mask(args.out / f"{name}.png", gt)
        items.append((name, gt))
    items += [(p.stem, read_mask(p)) for p in _inputs(args.inputs)]
    if not items:
        raise ConfigError("nothing to corrupt: give inputs or --synthetic N")
    for i, (name, gt) in enumerate(items):
        gray, gt = eg.corrupt(gt, corruption_for(ccfg, ccfg.seed, i))
        write_gray(args.out / f"{name}.corrupt.png", gray)
        write_mask(args.out / f"{name}.gt.png", gt)
    return EXIT_OK


def _cmd_thin(args) -> int:
    if args.cord < 3:
        raise ConfigError("cord length must be >= 3")
    args.out.mkdir(parents=True, exist_ok=True)
    for path in _inputs(args.inputs):
        mask = read_mask(path)
        skel = thin.zhang_suen_thin(mask) if args.no_unbias else thin.unbiased_thin(mask, args.cord)
        write_mask(args.out / f"{path.stem}.skeleton.png", skel)
    return EXIT_OK


COMMANDS = {"vectorize": _cmd_vectorize, "eval": _cmd_eval, "corrupt": _cmd_corrupt, "thin": _cmd_thin}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"sketchvec: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, Image.UnidentifiedImageError) as e:
        print(f"sketchvec: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # input preconditions, e.g. an image smaller than the largest kernel
        print(f"sketchvec: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
