"""End-to-end experiment runner: encodings per ensemble mode, clustering,
metrics and the JSON run report."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .anchor import AnchorConfig
from .config import ExperimentConfig
from .core import derive_seed
from .datasets import GENERATORS, Dataset, lift_dataset, load_matrix, preprocess, save_binary
from .ensemble import StageError, sc_edae
from .kmeans import KMeansConfig, kmeans
from .metrics import accuracy, ari, nmi

log = logging.getLogger(__name__)

METRICS = ("acc", "nmi", "ari")


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    src = cfg.dataset
    if src.path is not None:
        ds = load_matrix(src.path)
    elif src.generator == "gaussian_classes":
        kw = {k: v for k, v in (("n", src.n), ("k", src.classes)) if v is not None}
        ds = GENERATORS[src.generator](src.seed, **kw)
    else:
        ds = GENERATORS[src.generator](src.seed)
    if src.lift != "none":
        ds = lift_dataset(ds, src.lift, src.seed if src.lift_seed is None else src.lift_seed)
    return ds


def structure_label(widths) -> str:
    return "--".join(str(w) for w in widths)


@dataclass(frozen=True)
class TrainJob:
    key: str
    widths: tuple
    snapshots: tuple  # epoch counts at which the encoding is captured
    seed: int


def _fingerprint(x) -> str:
    return hashlib.blake2b(np.ascontiguousarray(x).tobytes(), digest_size=16).hexdigest()


def _train_encodings(x, job: TrainJob, settings: dict) -> dict:
    """Train once up to the largest snapshot and encode at each snapshot epoch."""
    spec = ae.LayerSpec(job.widths, settings["encoding_dim"], settings["encoding_activation"])
    tcfg = ae.TrainConfig(epochs=max(job.snapshots), batch_size=min(settings["batch_size"], x.shape[0]),
                          learning_rate=settings["learning_rate"], adam_beta1=settings["adam_beta1"],
                          adam_beta2=settings["adam_beta2"], adam_epsilon=settings["adam_epsilon"], seed=job.seed)
    wanted = set(job.snapshots)
    out = {}

    def grab(epoch, model):
        if epoch in wanted:
            out[epoch] = ae.encode(model, x)

    ae.train(x, spec, tcfg, on_epoch_end=grab)
    return out


class EncodingCache:
    """In-process memo of trained encodings, keyed by data, job and settings."""

    def __init__(self):
        self._store = {}

    def key(self, fp, job, settings):
        return (fp, job.widths, job.snapshots, job.seed, tuple(sorted(settings.items())))

    def get(self, k):
        return self._store.get(k)

    def put(self, k, v):
        self._store[k] = v


@dataclass
class RunReport:
    config: dict
    dataset: dict
    members: list
    cells: list
    pooled: dict
    timings: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "dataset": self.dataset, "members": self.members,
                "cells": self.cells, "pooled": self.pooled, "failures": self.failures}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, path) -> None:
        """Write the report; wall-clock timings go to a ``.timings.json`` sidecar
        so the report itself stays byte-reproducible."""
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        side = path.with_name(path.stem + ".timings.json")
        side.write_text(json.dumps(self.timings, indent=2) + "\n", encoding="utf-8")

    def metric_values(self, metric="acc", cell=0) -> list:
        return [r[metric] for r in self.cells[cell]["replicates"] if metric in r]


def summarize(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return {"count": 0}
    return {"count": int(v.size), "mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "median": float(np.median(v)), "min": float(v.min()), "max": float(v.max())}


def _scores(pred, truth) -> dict:
    if truth is None:
        return {}
    return {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth), "ari": ari(pred, truth)}


def _plan(cfg: ExperimentConfig):
    """Training jobs plus the clustering cells for one replicate (seeds filled later).

    Each cell is ``(info, members)`` with members ``(member_key, job_key, epoch, p)``;
    ``job_key`` is None for members built on the raw data.
    """
    mode = cfg.mode
    base = tuple(cfg.structures[0])
    base_key = f"{structure_label(base)}|init={cfg.init_seeds[0]}"
    ep0, p0 = cfg.epochs[0], cfg.landmarks[0]
    jobs, cells = {}, []
    if mode == "ens_struct":
        members = []
        for s in cfg.structures:
            key = f"{structure_label(s)}|init={cfg.init_seeds[0]}"
            jobs[key] = (tuple(s), (ep0,))
            members.append((structure_label(s), key, ep0, p0))
        cells.append(({"structure": [m[0] for m in members], "epochs": ep0, "landmarks": p0}, members))
    elif mode == "ens_init":
        members = []
        for s in cfg.init_seeds:
            key = f"{structure_label(base)}|init={s}"
            jobs[key] = (base, (ep0,))
            members.append((f"init={s}", key, ep0, p0))
        cells.append(({"structure": structure_label(base), "epochs": ep0, "landmarks": p0}, members))
    elif mode == "ens_epochs":
        jobs[base_key] = (base, tuple(sorted(cfg.epochs)))
        members = [(f"epochs={e}", base_key, e, p0) for e in cfg.epochs]
        cells.append(({"structure": structure_label(base), "epochs": list(cfg.epochs), "landmarks": p0}, members))
    elif mode == "ens_landmarks":
        jobs[base_key] = (base, (ep0,))
        members = [(f"p={p}", base_key, ep0, p) for p in cfg.landmarks]
        cells.append(({"structure": structure_label(base), "epochs": ep0, "landmarks": list(cfg.landmarks)}, members))
    elif mode == "baseline_kmeanspp":
        cells.append(({}, []))
    elif mode == "baseline_lsc":
        for p in cfg.landmarks:
            cells.append(({"landmarks": p}, [(f"p={p}", None, None, p)]))
    elif mode in ("baseline_dae_kmeans", "baseline_dae_lsc"):
        jobs[base_key] = (base, tuple(sorted(set(cfg.epochs))))
        for e in cfg.epochs:
            if mode == "baseline_dae_kmeans":
                cells.append(({"structure": structure_label(base), "epochs": e}, [(f"epochs={e}", base_key, e, None)]))
            else:
                for p in cfg.landmarks:
                    cells.append(({"structure": structure_label(base), "epochs": e, "landmarks": p},
                                  [(f"epochs={e}|p={p}", base_key, e, p)]))
    return jobs, cells


def _export_path(template, rep, suffix):
    p = Path(template)
    return p.with_name(f"{p.stem}.rep{rep}{suffix}")


def run(cfg: ExperimentConfig, cache: EncodingCache | None = None, n_jobs: int | None = None) -> RunReport:
    """Execute every replicate of ``cfg`` and assemble the report.

    Seeds: replicate ``i`` trains job ``key`` with stream ``(seed, "train", i, key)``,
    selects landmarks from ``(seed, "landmarks", i)`` split per member key, and
    clusters with ``(seed, "kmeans", i, cell)``. Keys are content labels, so
    dropping one member leaves the others' streams unchanged.
    """
    t0 = time.perf_counter()
    ds = load_dataset(cfg)
    x = preprocess(ds.x, cfg.preprocessing.divisor, cfg.preprocessing.l2)
    k = cfg.k or ds.k_true
    if k is None:
        raise ValueError("k is not set and the dataset carries no labels")
    load_time = time.perf_counter() - t0
    settings = cfg.autoencoder.model_dump()
    fp = _fingerprint(x)
    jobs, cells = _plan(cfg)
    n_jobs = n_jobs or cfg.n_jobs or os.cpu_count() or 1
    truth = ds.labels
    kcfg = cfg.kmeans

    cell_reps = [[] for _ in cells]
    timings, failures = [], []
    for i in range(cfg.replicates):
        stage_t = {"replicate": i, "load": load_time}
        stage = "train"
        try:
            ts = time.perf_counter()
            tasks = [TrainJob(key, widths, snaps, derive_seed(cfg.seed, "train", i, key))
                     for key, (widths, snaps) in jobs.items()]
            encodings = _run_jobs(x, tasks, settings, cache, fp, n_jobs)
            if tasks:
                stage_t["train"] = time.perf_counter() - ts
            lm_seed = derive_seed(cfg.seed, "landmarks", i)
            for ci, (info, members) in enumerate(cells):
                stage = "cluster"
                ts = time.perf_counter()
                km_seed = derive_seed(cfg.seed, "kmeans", i, ci)
                kc = KMeansConfig(k, kcfg.n_init, kcfg.max_iter, kcfg.tol, km_seed)
                emb = None
                if not members:
                    stage = "kmeans"
                    part = kmeans(x, kc)
                    stage_t["kmeans"] = stage_t.get("kmeans", 0.0) + time.perf_counter() - ts
                elif members[0][3] is None:
                    stage = "kmeans"
                    part = kmeans(encodings[members[0][1]][members[0][2]], kc)
                    stage_t["kmeans"] = stage_t.get("kmeans", 0.0) + time.perf_counter() - ts
                else:
                    ys, acfgs, labels = [], [], []
                    for mkey, job_key, epoch, p in members:
                        ys.append(x if job_key is None else encodings[job_key][epoch])
                        acfgs.append(AnchorConfig(p=p, r=cfg.anchor.r, bandwidth_mode=cfg.anchor.bandwidth_mode,
                                                  sigma=cfg.anchor.sigma, max_iter=kcfg.max_iter, tol=kcfg.tol))
                        labels.append(mkey)
                    part, emb, _ = sc_edae(ys, acfgs, kc, k, seed=lm_seed, labels=labels,
                                           renormalize_rows=cfg.renormalize_rows)
                    stage_t["spectral"] = stage_t.get("spectral", 0.0) + time.perf_counter() - ts
                rec = {"replicate": i, **_scores(part.labels, truth)}
                cell_reps[ci].append(rec)
                if cfg.embedding_out and emb is not None and ci == 0:
                    save_binary(emb.b, _export_path(cfg.embedding_out, i, ".bin"))
                if cfg.labels_out and ci == 0:
                    _write_labels(part.labels, _export_path(cfg.labels_out, i, ".csv"))
        except (StageError, ae.TrainingError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            where = exc.stage if isinstance(exc, StageError) else stage
            msg = str(exc) if isinstance(exc, StageError) else f"{where}: {exc}"
            log.warning("replicate %d failed: %s", i, msg)
            failures.append({"replicate": i, "stage": where, "error": msg})
        timings.append(stage_t)

    out_cells = []
    for (info, members), reps in zip(cells, cell_reps):
        summary = {m: summarize([r[m] for r in reps if m in r]) for m in METRICS} if truth is not None else {}
        out_cells.append({**info, "replicates": reps, "summary": summary})
    pooled = {}
    if truth is not None:
        pooled = {m: summarize([r[m] for reps in cell_reps for r in reps if m in r]) for m in METRICS}
    members = [m[0] for m in cells[0][1]] if cells else []
    return RunReport(
        config=cfg.model_dump(mode="json"),
        dataset={"name": ds.name, "n": ds.n, "d": ds.d, "k": int(k)},
        members=members, cells=out_cells, pooled=pooled, timings=timings, failures=failures,
    )


def _run_jobs(x, tasks, settings, cache, fp, n_jobs) -> dict:
    results, todo = {}, []
    for t in tasks:
        hit = cache.get(cache.key(fp, t, settings)) if cache is not None else None
        if hit is not None:
            results[t.key] = hit
        else:
            todo.append(t)
    if todo:
        if n_jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=min(n_jobs, len(todo))) as pool:
                outs = list(pool.map(_train_encodings, [x] * len(todo), todo, [settings] * len(todo)))
        else:
            outs = [_train_encodings(x, t, settings) for t in todo]
        for t, o in zip(todo, outs):
            results[t.key] = o
            if cache is not None:
                cache.put(cache.key(fp, t, settings), o)
    return results


def _write_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in labels)
