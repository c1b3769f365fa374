"""Episode configuration, runs, batch reports and SVG snapshots.

Config files are flat ``key = value`` lines; dotted prefixes select a
section (``sensor.d_max = 5.0``). ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import fixtures
from .descriptor import DescriptorConfig
from .errors import ConfigError
from .frontier import FrontierConfig
from .graph import TopoGraph, serialize
from .motion import MotionLimits
from .planner import Explorer, IterationRecord, LocalParams, PlannerConfig
from .world import SensorModel, WorldMap, load_map

METRICS_HEADER = ["iter", "t_sim", "t_map_update_ms", "t_global_ms", "t_local_ms", "coverage",
                  "nodes", "frontiers", "graph_bytes", "traj_len_m"]

EXIT_COMPLETE = 0
EXIT_BUDGET = 2
EXIT_CONFIG = 3
EXIT_CONTRACT = 4

GENERATED = "generated:"


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to reproduce one episode.

    ``map`` is a map file path or ``generated:<kind>``; generated maps use
    ``map_seed`` or, when unset, the episode seed.
    """

    map: str
    sensor: SensorModel = SensorModel()
    planner: PlannerConfig = PlannerConfig()
    seed: int = 0
    map_seed: int | None = None
    max_iterations: int = 20000
    out: str | None = None
    snapshot_every: int = 25
    timing: bool = True
    start: tuple[float, float, float] | None = None
    faults: dict = field(default_factory=dict)
    label: str | None = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.map.startswith(GENERATED):
            return self.map[len(GENERATED):]
        return Path(self.map).stem

    def load_world(self) -> WorldMap:
        if self.map.startswith(GENERATED):
            kind = self.map[len(GENERATED):]
            gen = fixtures.KINDS[kind]
            if kind in fixtures.SEEDED:
                return gen(self.seed if self.map_seed is None else self.map_seed)
            return gen()
        return load_map(Path(self.map).read_text())


# section -> (dataclass, key -> field) for the plain numeric sections
_SECTIONS = {
    "sensor": SensorModel,
    "descriptor": DescriptorConfig,
    "frontier": FrontierConfig,
    "motion": MotionLimits,
    "local": LocalParams,
}
_PLANNER_KEYS = {"dt": float, "max_blocked": int, "prune_radius": float}
_TOP_KEYS = {"seed": int, "map_seed": int, "max_iterations": int, "snapshot_every": int}
_BOOL = {"on": True, "off": False, "true": True, "false": False, "yes": True, "no": False,
         "1": True, "0": False}


def _convert(raw: str, kind):
    if kind is bool:
        v = _BOOL.get(raw.lower())
        if v is None:
            raise ValueError(f"expected on/off, got {raw!r}")
        return v
    if kind is int:
        return int(raw)
    return float(raw)


def parse_config(text: str, base_dir: str | Path | None = None) -> EpisodeConfig:
    """Parse and validate config text; every problem is reported at once."""
    problems: list[str] = []
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    planner: dict[str, object] = {}
    top: dict[str, object] = {}
    faults: dict[int, dict[int, float]] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in seen:
            problems.append(f"line {lineno}: duplicate key {key}")
            continue
        seen.add(key)
        try:
            section, _, name = key.rpartition(".")
            if section in _SECTIONS:
                types = {f.name: f.type for f in fields(_SECTIONS[section])}
                if name not in types or (section == "descriptor" and name in ("d_max", "h")):
                    raise KeyError(key)
                values[section][name] = _convert(raw, int if types[name] in (int, "int") else float)
            elif section == "planner":
                if name not in _PLANNER_KEYS:
                    raise KeyError(key)
                planner[name] = _convert(raw, _PLANNER_KEYS[name])
            elif section.startswith("fault."):
                it = int(section[len("fault."):])
                faults.setdefault(it, {})[int(name)] = float(raw)
            elif section:
                raise KeyError(key)
            elif key in _TOP_KEYS:
                top[key] = _convert(raw, _TOP_KEYS[key])
            elif key == "timing":
                top[key] = _convert(raw, bool)
            elif key in ("map", "out", "label"):
                top[key] = raw
            elif key == "start":
                xyz = tuple(float(v) for v in raw.split(","))
                if len(xyz) == 2:
                    xyz += (1.0,)
                if len(xyz) != 3:
                    raise ValueError("start needs x,y or x,y,z")
                top[key] = xyz
            else:
                raise KeyError(key)
        except KeyError:
            problems.append(f"line {lineno}: unknown key {key}")
        except ValueError as exc:
            problems.append(f"line {lineno}: {key}: {exc}")

    sensor = replace(SensorModel(), **values["sensor"])
    desc_kw = dict(values["descriptor"], d_max=sensor.d_max, h=sensor.h)
    try:
        descriptor = DescriptorConfig(**desc_kw)
    except ValueError as exc:
        # d_max and h come from the sensor section, which reports them itself
        problems.extend(m for m in str(exc).split("; ")
                        if not m.startswith(("descriptor.d_max", "descriptor.h ")))
        descriptor = DescriptorConfig(d_max=sensor.d_max if sensor.d_max > 0 else 5.0,
                                      h=sensor.h if sensor.h > 0 else 1.0)
    frontier = replace(FrontierConfig(), **values["frontier"])
    limits = replace(MotionLimits(), **values["motion"])
    local = replace(LocalParams(), **values["local"])
    problems += sensor.problems(descriptor.n)
    problems += frontier.problems(descriptor.theta_deg)
    problems += limits.problems()
    for name in ("arrival_tolerance", "window_resolution"):
        if not getattr(local, name) > 0:
            problems.append(f"local.{name} must be > 0")
    if local.window_margin < 0:
        problems.append("local.window_margin must be >= 0")
    pcfg = PlannerConfig(descriptor, frontier, limits, local, **planner)
    if not pcfg.dt > 0:
        problems.append("planner.dt must be > 0")
    if pcfg.max_blocked < 1:
        problems.append("planner.max_blocked must be >= 1")
    if pcfg.prune_radius < 0:
        problems.append("planner.prune_radius must be >= 0")
    if top.get("max_iterations", 1) < 1:
        problems.append("max_iterations must be >= 1")
    if top.get("snapshot_every", 0) < 0:
        problems.append("snapshot_every must be >= 0")
    for it, rays in faults.items():
        for ray in rays:
            if not 0 <= ray < sensor.rays_per_rev:
                problems.append(f"fault.{it}.{ray}: ray index out of range")

    map_ref = top.pop("map", None)
    if map_ref is None:
        problems.append("map is required")
    elif map_ref.startswith(GENERATED):
        if map_ref[len(GENERATED):] not in fixtures.KINDS:
            problems.append(f"map: unknown generated kind {map_ref[len(GENERATED):]!r}"
                            f" (choose from {', '.join(sorted(fixtures.KINDS))})")
    else:
        path = Path(map_ref)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            problems.append(f"map: file not found: {path}")
        map_ref = str(path)
    if problems:
        raise ConfigError(problems)
    return EpisodeConfig(map=map_ref, sensor=sensor, planner=pcfg, faults=faults, **top)


def load_config(path: str | Path) -> EpisodeConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text, base_dir=path.parent)


@dataclass
class EpisodeLog:
    config: EpisodeConfig
    rows: list[IterationRecord]
    positions: list[np.ndarray]
    terminated: bool
    peak_graph_bytes: int
    graph: TopoGraph
    explorer: Explorer

    @property
    def status(self) -> int:
        return EXIT_COMPLETE if self.terminated else EXIT_BUDGET

    def summary(self) -> dict:
        last = self.rows[-1]
        phase = {k: float(np.mean([getattr(r, k) for r in self.rows]))
                 for k in ("t_map_update_ms", "t_global_ms", "t_local_ms")}
        return {
            "terminated": self.terminated,
            "iterations": len(self.rows),
            "t_sim": last.t_sim,
            "traj_len_m": last.traj_len_m,
            "coverage": last.coverage,
            "nodes": last.nodes,
            "frontiers": last.frontiers,
            "graph_bytes": last.graph_bytes,
            "peak_graph_bytes": self.peak_graph_bytes,
            "map_update_ms": phase["t_map_update_ms"],
            "global_ms": phase["t_global_ms"],
            "local_ms": phase["t_local_ms"],
            "total_ms": sum(phase.values()),
        }

    def summary_line(self) -> str:
        s = self.summary()
        state = "complete" if s["terminated"] else "budget exhausted"
        return (f"{self.config.name} seed {self.config.seed}: {state} after {s['iterations']} iterations, "
                f"{s['t_sim']:.1f} s with a {s['traj_len_m']:.1f} m trajectory, "
                f"coverage {s['coverage']:.4f}, {s['nodes']} nodes, peak graph {s['peak_graph_bytes']} B, "
                f"mean ms map {s['map_update_ms']:.3f} global {s['global_ms']:.3f} "
                f"local {s['local_ms']:.3f} total {s['total_ms']:.3f}")


def metrics_csv(rows: Sequence[IterationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow([r.iteration, repr(r.t_sim), repr(r.t_map_update_ms), repr(r.t_global_ms),
                    repr(r.t_local_ms), repr(r.coverage), r.nodes, r.frontiers, r.graph_bytes,
                    repr(r.traj_len_m)])
    return buf.getvalue()


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_episode(config: EpisodeConfig, out: str | Path | None = None) -> EpisodeLog:
    """Run one episode; writes artifacts when an output directory is given."""
    out = out if out is not None else config.out
    world = config.load_world()
    start = config.start if config.start is not None else fixtures.default_start(world)
    ex = Explorer(world, config.sensor, config.planner, start, seed=config.seed, faults=config.faults,
                  clock=time.perf_counter if config.timing else None)
    out_dir = Path(out) if out is not None else None
    if out_dir is not None:
        (out_dir / "snapshots").mkdir(parents=True, exist_ok=True)
    positions: list[np.ndarray] = []

    def on_iteration(rec: IterationRecord):
        positions.append(ex.state.position.copy())
        if out_dir is not None and config.snapshot_every and (rec.iteration + 1) % config.snapshot_every == 0:
            render_snapshot(world, ex.graph, ex.trajectory,
                            out_dir / "snapshots" / f"iter_{rec.iteration + 1:06d}.svg")

    rows = ex.run(config.max_iterations, on_iteration)
    ex.graph.audit()
    log = EpisodeLog(config, rows, positions, ex.terminated, ex.peak_graph_bytes, ex.graph, ex)
    if out_dir is not None:
        write_artifacts(log, out_dir)
    return log


def write_artifacts(log: EpisodeLog, out_dir: Path):
    ex = log.explorer
    (out_dir / "metrics.csv").write_text(metrics_csv(log.rows))
    (out_dir / "graph_metrics.csv").write_text(_table(
        ["iter", "time_s", "nodes", "frontiers", "edges", "graph_bytes"],
        [[r.iteration, repr(r.t_sim), r.nodes, r.frontiers, r.edges, r.graph_bytes] for r in log.rows]))
    (out_dir / "graph.txt").write_text(serialize(log.graph))
    (out_dir / "trajectory.csv").write_text(_table(
        ["iter", "t_sim", "x", "y", "z"],
        [[r.iteration, repr(r.t_sim), *(repr(float(v)) for v in p)] for r, p in zip(log.rows, log.positions)]))
    (out_dir / "candidates.csv").write_text(_table(
        ["iter", "x", "y", "z", "kind", "node"],
        [[it, repr(x), repr(y), repr(z), kind, "" if fid is None else fid]
         for it, x, y, z, kind, fid in ex.candidate_log]))
    (out_dir / "events.csv").write_text(_table(["iter", "kind", "node"], ex.event_log))
    render_snapshot(ex.world, log.graph, ex.trajectory, out_dir / "snapshots" / "final.svg")
    (out_dir / "summary.txt").write_text(log.summary_line() + "\n")


# ---------------------------------------------------------------- batches

@dataclass
class BatchEntry:
    config: EpisodeConfig
    summary: dict | None = None
    coverage: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


SUMMARY_KEYS = ["terminated", "iterations", "t_sim", "traj_len_m", "coverage", "nodes",
                "peak_graph_bytes", "map_update_ms", "global_ms", "local_ms", "total_ms"]


@dataclass
class BatchReport:
    entries: list[BatchEntry]

    def aggregate(self, name: str | None = None) -> dict[str, tuple[float, float]]:
        """Mean and sample std of each summary field over successful episodes."""
        ok = [e.summary for e in self.entries if e.ok and (name is None or e.config.name == name)]
        out = {}
        for k in SUMMARY_KEYS:
            vals = [float(s[k]) for s in ok]
            if not vals:
                out[k] = (math.nan, math.nan)
                continue
            out[k] = (statistics.fmean(vals), statistics.stdev(vals) if len(vals) > 1 else 0.0)
        return out

    def summary_csv(self) -> str:
        rows = []
        for e in self.entries:
            if e.ok:
                rows.append([e.config.name, e.config.seed, "ok"] + [_fmt(e.summary[k]) for k in SUMMARY_KEYS])
            else:
                rows.append([e.config.name, e.config.seed, "failed: " + e.error] + [""] * len(SUMMARY_KEYS))
        for stat in (0, 1):
            agg = self.aggregate()
            rows.append(["all", "", ("mean", "std")[stat]] + [_fmt(agg[k][stat]) for k in SUMMARY_KEYS])
        return _table(["scenario", "seed", "status"] + SUMMARY_KEYS, rows)

    def coverage_csv(self) -> str:
        """Coverage against simulated time, one column per episode.

        Finished episodes hold their final value.
        """
        ok = [e for e in self.entries if e.ok]
        if not ok:
            return "t_sim\n"
        length = max(len(e.coverage) for e in ok)
        dt = ok[0].config.planner.dt
        cols = [f"{e.config.name}_seed{e.config.seed}" for e in ok]
        rows = []
        for i in range(length):
            rows.append([repr(round((i + 1) * dt, 9))]
                        + [repr(e.coverage[min(i, len(e.coverage) - 1)]) for e in ok])
        return _table(["t_sim"] + cols, rows)

    def latency_table(self) -> str:
        """Mean per-iteration time of each planning phase per scenario (ms)."""
        names = []
        for e in self.entries:
            if e.config.name not in names:
                names.append(e.config.name)
        lines = [f"{'scenario':<16}{'map update':>12}{'global path':>13}{'local traj':>12}{'total':>10}"]
        for n in names:
            agg = self.aggregate(n)
            lines.append(f"{n:<16}{agg['map_update_ms'][0]:>12.3f}{agg['global_ms'][0]:>13.3f}"
                         f"{agg['local_ms'][0]:>12.3f}{agg['total_ms'][0]:>10.3f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "batch_summary.csv").write_text(self.summary_csv())
        (out_dir / "coverage_vs_time.csv").write_text(self.coverage_csv())
        (out_dir / "latency.txt").write_text(self.latency_table())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return f"{v:.6g}"


def with_seeds(config: EpisodeConfig, seeds: Sequence[int]) -> list[EpisodeConfig]:
    return [replace(config, seed=int(s)) for s in seeds]


def _batch_job(args) -> BatchEntry:
    config, out = args
    try:
        log = run_episode(config, out)
    except Exception as exc:  # noqa: BLE001 - a failed episode must not stop the batch
        return BatchEntry(config, error=f"{type(exc).__name__}: {exc}")
    return BatchEntry(config, log.summary(), [r.coverage for r in log.rows])


def run_batch(configs: Sequence[EpisodeConfig], out: str | Path | None = None,
              workers: int = 1) -> BatchReport:
    """Run independent episodes, optionally in worker processes."""
    jobs = []
    for c in configs:
        sub = None if out is None else Path(out) / f"{c.name}_seed{c.seed}"
        jobs.append((c, sub))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_batch_job, jobs))
    else:
        entries = [_batch_job(j) for j in jobs]
    report = BatchReport(entries)
    if out is not None:
        report.write(out)
    return report


# ---------------------------------------------------------------- snapshots

def _occupancy_rects(occ: np.ndarray) -> list[tuple[int, int, int, int]]:
    """Cover occupied cells with rectangles (row runs merged downwards)."""
    rects = []
    open_runs: dict[tuple[int, int], int] = {}
    for iy in range(occ.shape[0] + 1):
        runs = set()
        if iy < occ.shape[0]:
            row = np.concatenate([[False], occ[iy], [False]])
            edges = np.flatnonzero(row[1:] != row[:-1])
            runs = {(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])}
        for run in sorted(set(open_runs) - runs):
            y0 = open_runs.pop(run)
            rects.append((run[0], y0, run[1] - run[0], iy - y0))
        for run in sorted(runs - set(open_runs)):
            open_runs[run] = iy
    rects.sort(key=lambda r: (r[1], r[0]))
    return rects


def render_svg(world: WorldMap, g: TopoGraph | None = None, trajectory=None) -> str:
    """Scene as SVG text in metres, y pointing up."""
    res = world.resolution
    ox, oy = world.origin
    w, h = world.extent
    top = oy + h

    def px(x):
        return f"{x - ox:.3f}"

    def py(y):
        return f"{top - y:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.3f} {h:.3f}" '
           f'width="{max(1, round(w * 10))}" height="{max(1, round(h * 10))}">',
           '<style>.occ{fill:#333}.edge{stroke:#3a3;stroke-width:0.05}'
           '.trajectory{fill:none;stroke:#26c;stroke-width:0.08}'
           '.waypoint{fill:#000}.frontier{fill:#d22}</style>',
           f'<rect x="0" y="0" width="{w:.3f}" height="{h:.3f}" fill="#fff"/>']
    for ix, iy, cw, ch in _occupancy_rects(world.occupied):
        # row iy counts up from the map bottom
        out.append(f'<rect class="occ" x="{ix * res:.3f}" y="{h - (iy + ch) * res:.3f}" '
                   f'width="{cw * res:.3f}" height="{ch * res:.3f}"/>')
    if g is not None:
        for i, j, _ in g.edges():
            a, b = g.nodes[i].position, g.nodes[j].position
            out.append(f'<line class="edge" x1="{px(a[0])}" y1="{py(a[1])}" x2="{px(b[0])}" y2="{py(b[1])}"/>')
    if trajectory is not None and len(trajectory) > 1:
        pts = " ".join(f"{px(p[0])},{py(p[1])}" for p in trajectory)
        out.append(f'<polyline class="trajectory" points="{pts}"/>')
    if g is not None:
        for nid in sorted(g.nodes):
            n = g.nodes[nid]
            cls = "frontier" if n.is_frontier else "waypoint"
            out.append(f'<circle class="{cls}" id="n{nid}" cx="{px(n.position[0])}" '
                       f'cy="{py(n.position[1])}" r="0.25"><title>{escape(cls)} {nid}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_snapshot(world: WorldMap, g: TopoGraph | None, trajectory, path: str | Path):
    Path(path).write_text(render_svg(world, g, trajectory))
