"""Command-line front end: gen-dataset -> train -> qtable / chain / render, plus verify."""

from __future__ import annotations

import functools
import os
import sys
from pathlib import Path

import click
import numpy as np

from cbrn.codec import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    DatasetManifest,
    PatternVector,
    safe_filename,
    save_pbm,
    synth_pattern,
    vectorize,
)
from cbrn.errors import CbrnError
from cbrn.learning import train_system
from cbrn.model import CbrnSystem, SystemConfig
from cbrn.persistence import load_weights, save_weights
from cbrn.recall import chain_direction, chain_recall, identify, reconstruct


def _friendly_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CbrnError, KeyError, ValueError, IndexError, OSError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
            raise click.ClickException(str(msg)) from exc

    return wrapper


def _parse_thetas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


def _ball_name(system: CbrnSystem, name: str) -> str:
    for known in system.config.chain_order:
        if known.lower() == name.lower():
            return known
    raise click.ClickException(f"unknown cue ball {name!r}; choose from {', '.join(system.config.chain_order)}")


def _load_system(path: Path) -> CbrnSystem:
    return load_weights(Path(path).read_bytes())


def _presented(system: CbrnSystem, label: str, manifest: Path | None) -> tuple[str, PatternVector]:
    """Resolve a label to (attribute, vector): from the manifest if given, else from stored labels."""
    cfg = system.config
    if manifest is not None:
        m = DatasetManifest.read(manifest)
        attribute, index = m.find(label)
        image = m.resolve(manifest.parent, cfg.image_width, cfg.image_height)[attribute][index]
        if (image.width, image.height) != (cfg.image_width, cfg.image_height):
            raise click.ClickException(
                f"{label}: image is {image.width}x{image.height}, weights expect "
                f"{cfg.image_width}x{cfg.image_height}"
            )
        return attribute, vectorize(image)
    try:
        ball, i = system.find_label(label)
    except KeyError:
        raise click.ClickException(
            f"unknown label {label!r} (not stored in the weights; pass --manifest to look it up)"
        ) from None
    return ball, vectorize(reconstruct(system, ball, i))


manifest_option = click.option(
    "--manifest",
    type=click.Path(path_type=Path, dir_okay=False),
    envvar="CBRN_MANIFEST",
    help="Dataset manifest (env CBRN_MANIFEST).",
)
weights_option = click.option(
    "--weights",
    type=click.Path(path_type=Path, dir_okay=False),
    envvar="CBRN_WEIGHTS",
    required=True,
    help="Weight archive (env CBRN_WEIGHTS).",
)
format_option = click.option(
    "--format", "fmt", type=click.Choice(["csv", "text"]), default="csv", show_default=True
)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Cue Ball / Recall Net associative memory."""


@main.command("gen-dataset")
@click.option("--out-dir", type=click.Path(path_type=Path, file_okay=False), required=True)
@click.option(
    "--manifest",
    type=click.Path(path_type=Path, dir_okay=False),
    default=None,
    help="Manifest path [default: OUT_DIR/manifest.tsv].",
)
@click.option("--width", type=click.IntRange(min=1), default=DEFAULT_WIDTH, show_default=True)
@click.option("--height", type=click.IntRange(min=1), default=DEFAULT_HEIGHT, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite existing files.")
@_friendly_errors
def gen_dataset(out_dir: Path, manifest: Path | None, width: int, height: int, force: bool):
    """Write one synthetic PBM per element of the default dataset plus a manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = manifest or out_dir / "manifest.tsv"
    m = DatasetManifest.default()
    files = {}
    for name, labels in m.attributes:
        for i, label in enumerate(labels):
            path = out_dir / f"{safe_filename(label)}.pbm"
            if path in files.values():
                raise click.ClickException(f"duplicate file name {path.name}")
            files[(name, i, label)] = path
    targets = list(files.values()) + [manifest]
    if not force:
        existing = [p for p in targets if p.exists()]
        if existing:
            raise click.ClickException(f"{existing[0]} exists; use --force to overwrite")
    for (name, i, label), path in files.items():
        path.write_bytes(save_pbm(synth_pattern(label, width, height)))
        m.sources[(name, i)] = os.path.relpath(path.resolve(), manifest.parent.resolve())
    m.write(manifest)
    click.echo(f"wrote {len(files)} images and {manifest}")


@main.command()
@manifest_option
@weights_option
@click.option("--theta", default="100,110", show_default=True, help="Comma-separated theta per series.")
@click.option("--threshold", "threshold_d", type=float, default=72.0, show_default=True)
@click.option("--width", type=click.IntRange(min=1), default=DEFAULT_WIDTH, show_default=True,
              help="Size of synthetic images.")
@click.option("--height", type=click.IntRange(min=1), default=DEFAULT_HEIGHT, show_default=True)
@click.option("--report", type=click.Path(path_type=Path, dir_okay=False), help="Write the training report CSV.")
@_friendly_errors
def train(manifest, weights, theta, threshold_d, width, height, report):
    """Learn w, v for every element and u along both chains; write the weight archive."""
    if manifest is None:
        m, base = DatasetManifest.default(), None
    else:
        m, base = DatasetManifest.read(manifest), manifest.parent
    n = max(len(labels) for _, labels in m.attributes)
    for name, labels in m.attributes:
        if len(labels) < n:
            raise click.ClickException(f"attribute {name} is missing element index {len(labels)}")
    images = m.resolve(base, width, height)
    sizes = {(img.width, img.height) for imgs in images.values() for img in imgs}
    if len(sizes) != 1:
        raise click.ClickException(f"images differ in size: {sorted(sizes)}")
    (w, h), = sizes
    cfg = SystemConfig(
        image_width=w,
        image_height=h,
        neurons_per_ball=n,
        theta_series=_parse_thetas(theta),
        threshold_d=threshold_d,
        chain_order=tuple(m.attribute_names),
    )
    system = CbrnSystem(cfg)
    patterns = {name: [vectorize(img) for img in imgs] for name, imgs in images.items()}
    result = train_system(system, patterns)
    weights.write_bytes(save_weights(system))
    if report is not None:
        report.write_text(result.to_csv())
    click.echo(result.summary())
    click.echo(f"weights written to {weights}")


@main.command()
@weights_option
@click.option("--ball", required=True)
@click.option("--label", required=True, help="Element label whose pattern is presented.")
@manifest_option
@format_option
@_friendly_errors
def qtable(weights, ball, label, manifest, fmt):
    """Present a pattern to one ball and list every cue neuron's pre-activation q."""
    system = _load_system(weights)
    ball = _ball_name(system, ball)
    _, vec = _presented(system, label, manifest)
    resp = identify(system, ball, vec)
    fired = resp.fired_indices
    if fmt == "csv":
        click.echo("neuron,q,fired,argmax")
        for i, q in enumerate(resp.q_values):
            click.echo(f"{i},{q!r},{int(i in fired)},{int(i == resp.argmax_index)}")
    else:
        click.echo(f"{ball} cue ball, presented {label!r}, D={system.config.threshold_d:g}")
        click.echo(f"{'neuron':>6}  {'q':>10}  fired")
        for i, q in enumerate(resp.q_values):
            mark = " *" if i == resp.argmax_index else ""
            click.echo(f"{i:>6}  {q:>10.4f}  {int(i in fired)}{mark}")


@main.command()
@weights_option
@click.option("--cmb", type=click.IntRange(0, 1), required=True, help="Chain group: 0 forward, 1 backward.")
@click.option("--label", required=True, help="Element label of the start ball to present.")
@manifest_option
@format_option
@click.option("--no-images", is_flag=True, help="Text format: omit the ASCII images.")
@_friendly_errors
def chain(weights, cmb, label, manifest, fmt, no_images):
    """Chain recall from the group's start ball; exits nonzero if recall fails."""
    system = _load_system(weights)
    start = chain_direction(system, cmb)[0]
    attribute, vec = _presented(system, label, manifest)
    if attribute != start:
        raise click.ClickException(
            f"wrong starting ball: {label!r} belongs to {attribute}, cmb={cmb} starts at {start}"
        )
    trace = chain_recall(system, cmb, vec)
    if fmt == "csv":
        click.echo(trace.to_csv(system), nl=False)
    else:
        click.echo(trace.to_text(show_images=not no_images))
    if trace.failed:
        click.echo(f"recall failed: {trace.reason}", err=True)
        sys.exit(2)


@main.command()
@weights_option
@click.option("--ball", required=True)
@click.option("--neuron", type=int, required=True)
@click.option("--out", type=click.Path(path_type=Path, dir_okay=False))
@click.option("--ascii", "as_ascii", is_flag=True, help="Print the image to standard output.")
@_friendly_errors
def render(weights, ball, neuron, out, as_ascii):
    """Reconstruct the image stored by one cue neuron."""
    if out is None and not as_ascii:
        raise click.UsageError("give --out and/or --ascii")
    system = _load_system(weights)
    image = reconstruct(system, _ball_name(system, ball), neuron)
    if out is not None:
        out.write_bytes(save_pbm(image))
    if as_ascii:
        click.echo(image.to_ascii())


@main.command()
@click.option("--width", type=click.IntRange(min=1), default=DEFAULT_WIDTH, show_default=True)
@click.option("--height", type=click.IntRange(min=1), default=DEFAULT_HEIGHT, show_default=True)
@_friendly_errors
def verify(width, height):
    """Run the whole experiment in memory on the synthetic dataset and check its outcomes."""
    cfg = SystemConfig(image_width=width, image_height=height)
    m = DatasetManifest.default()
    images = m.resolve(None, width, height)
    patterns = {name: [vectorize(img) for img in imgs] for name, imgs in images.items()}
    system = CbrnSystem(cfg)
    report = train_system(system, patterns)

    checks = []
    counts = report.counts()
    checks.append(("learning counts 35/35/16", counts == {"w": 35, "v": 35, "u": 16}))
    targets = [
        (e.final_q, cfg.theta_series[0] if e.phase == "v" else cfg.theta_series[e.series - 1])
        for e in report.entries
        if e.phase != "w"
    ]
    checks.append(("learned q equals theta", all(abs(q - t) < 1e-6 for q, t in targets)))
    ident = True
    for name, vecs in patterns.items():
        for p, vec in enumerate(vecs):
            r = identify(system, name, vec)
            ident &= r.argmax_index == p and r.fired_indices == {p}
    checks.append(("identification 35/35, single firing", ident))
    expected = {
        0: {"Color": {0}, "Shape": {1, 4}, "Volume": {2, 3}, "SpectacularView": {3, 2}, "Constellation": {4, 1}},
        1: {"Constellation": {0}, "SpectacularView": {6, 3}, "Volume": {5, 4}, "Shape": {4, 5}, "Color": {3, 6}},
    }
    total = 0
    for cmb, start_label in ((0, "red"), (1, "Andromeda")):
        attribute, idx = m.find(start_label)
        trace = chain_recall(system, cmb, patterns[attribute][idx])
        total += len(trace.recalled)
        checks.append((f"chain cmb={cmb} from {start_label}", not trace.failed and trace.fired_by_ball() == expected[cmb]))
        downstream = [q for r in trace.responses[1:] for _, q in r.fired]
        checks.append((f"chain cmb={cmb} q in theta series", all(q in cfg.theta_series for q in downstream)))
    checks.append(("18 recalled images", total == 18))
    restored = load_weights(save_weights(system))
    checks.append((
        "weight archive round-trip",
        all(np.array_equal(restored.balls[n].w, system.balls[n].w) and np.array_equal(restored.balls[n].v, system.balls[n].v)
            for n in cfg.chain_order),
    ))

    ok = True
    for name, passed in checks:
        click.echo(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    if not ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
