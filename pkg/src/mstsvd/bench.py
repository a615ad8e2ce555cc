"""Benchmark harness: a (image x method x sigma) matrix with a report.

The config is a plain dict (JSON at the CLI). Images are file paths or
bundled synthetic generators; ``"noisy"`` is accepted as a method and
reports the metrics of the corrupted input itself, which gives every
table a baseline row. Noise seeds are derived deterministically from the
base seed and the (image, sigma) indices, so a rerun with the same config
reproduces the same numbers; pass ``"timing": false`` to also make the
report byte-identical across reruns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .imageio import read_image
from .metrics import metric_block
from .noise import add_awgn
from .pipeline import COLOR, MSI, default_params, denoise
from .synthetic import make_color_image, make_msi_cube, make_piecewise_constant

_SYNTHETIC = {
    "synthetic-color": make_color_image,
    "synthetic-blocks": make_piecewise_constant,
    "synthetic-msi": make_msi_cube,
}

_MD_COLUMNS = ("image", "method", "sigma", "psnr", "ssim", "ergas", "sam", "seconds")


@dataclass
class BenchRow:
    image: str
    method: str
    sigma: float
    psnr: float = float("nan")
    ssim: float = float("nan")
    ergas: float = float("nan")
    sam: float = float("nan")
    seconds: float = 0.0
    error: str | None = None


def _load_image(entry) -> tuple[str, np.ndarray]:
    if isinstance(entry, str):
        return entry, read_image(entry)
    if "path" in entry:
        return entry.get("name", str(entry["path"])), read_image(entry["path"])
    kind = entry.get("kind")
    if kind not in _SYNTHETIC:
        raise ValueError(f"image entry needs a 'path' or a synthetic 'kind', got {entry!r}")
    maker = _SYNTHETIC[kind]
    kwargs = {k: v for k, v in entry.items() if k not in ("kind", "name")}
    img = maker(**kwargs)
    name = entry.get("name", f"{kind}-{img.shape[0]}x{img.shape[1]}x{img.shape[2]}")
    return name, img


def _noise_seed(base: int, image_idx: int, sigma_idx: int) -> int:
    return int(base) + 977 * image_idx + sigma_idx


def run_bench(config: dict) -> tuple[list[BenchRow], str, str]:
    """Execute the matrix; returns (rows, markdown report, csv report)."""
    images = config.get("images", [])
    methods = config.get("methods", [])
    sigmas = config.get("sigmas", [])
    seed = int(config.get("seed", 0))
    threads = int(config.get("threads", 1))
    overrides = config.get("overrides", {})
    timing = bool(config.get("timing", True))

    rows: list[BenchRow] = []
    for i, entry in enumerate(images):
        name, clean = _load_image(entry)
        kind = COLOR if clean.shape[2] <= 3 else MSI
        for s_idx, sigma in enumerate(sigmas):
            noisy = add_awgn(clean, float(sigma), seed=_noise_seed(seed, i, s_idx))
            for method in methods:
                row = BenchRow(image=name, method=method, sigma=float(sigma))
                t0 = time.perf_counter()
                try:
                    report = None
                    if method == "noisy":
                        out = noisy
                    else:
                        params = default_params(method, kind, float(sigma))
                        if overrides:
                            params = params.with_overrides(**overrides).validate()
                        out, report = denoise(noisy, params, threads=threads)
                    mb = metric_block(clean, out)
                    if report is not None:
                        report.metrics = mb
                    row.psnr, row.ssim = mb.psnr, mb.ssim
                    row.ergas, row.sam = mb.ergas, mb.sam
                except Exception as exc:  # keep the matrix going, mark the row
                    row.error = f"{type(exc).__name__}: {exc}"
                row.seconds = time.perf_counter() - t0
                rows.append(row)
    return rows, render_markdown(rows, timing=timing), render_csv(rows, timing=timing)


def _fmt(v: float) -> str:
    if v != v:  # NaN from a failed row
        return "-"
    if v == float("inf"):
        return "inf"
    return f"{v:.4f}"


def _row_cells(r: BenchRow, timing: bool) -> list[str]:
    sec = _fmt(r.seconds) if timing else "-"
    if r.error is not None:
        return [r.image, r.method, f"{r.sigma:g}", f"failed: {r.error}", "-", "-", "-", sec]
    return [r.image, r.method, f"{r.sigma:g}", _fmt(r.psnr), _fmt(r.ssim),
            _fmt(r.ergas), _fmt(r.sam), sec]


def _aggregates(rows: list[BenchRow]) -> list[tuple[str, np.ndarray, float]]:
    out = []
    for method in dict.fromkeys(r.method for r in rows):
        ok = [r for r in rows if r.method == method and r.error is None]
        if not ok:
            continue
        vals = np.array([[r.psnr, r.ssim, r.ergas, r.sam] for r in ok])
        secs = float(np.mean([r.seconds for r in ok]))
        out.append((method, vals.mean(axis=0), secs))
    return out


def render_markdown(rows: list[BenchRow], timing: bool = True) -> str:
    lines = ["| " + " | ".join(_MD_COLUMNS) + " |",
             "|" + "---|" * len(_MD_COLUMNS)]
    for r in rows:
        lines.append("| " + " | ".join(_row_cells(r, timing)) + " |")
    for method, means, secs in _aggregates(rows):
        cells = ["mean", method, "-", _fmt(means[0]), _fmt(means[1]),
                 _fmt(means[2]), _fmt(means[3]), _fmt(secs) if timing else "-"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_csv(rows: list[BenchRow], timing: bool = True) -> str:
    lines = ["image,method,sigma,psnr,ssim,ergas,sam,seconds,status"]
    for r in rows:
        sec = _fmt(r.seconds) if timing else "-"
        status = "ok" if r.error is None else f"failed: {r.error}"
        lines.append(",".join([
            r.image, r.method, f"{r.sigma:g}", _fmt(r.psnr), _fmt(r.ssim),
            _fmt(r.ergas), _fmt(r.sam), sec, status.replace(",", ";"),
        ]))
    for method, means, secs in _aggregates(rows):
        lines.append(",".join([
            "mean", method, "-", _fmt(means[0]), _fmt(means[1]),
            _fmt(means[2]), _fmt(means[3]), _fmt(secs) if timing else "-", "ok",
        ]))
    return "\n".join(lines) + "\n"
