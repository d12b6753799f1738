"""Command-line interface tying the pipeline together.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
Structured logs go to stderr; data goes to stdout and files.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .backends import BackendServer, HttpBackendClient, MockConfig, make_mock_backends
from .backends.base import BackendSet
from .dataset import (
    SplitConfig,
    build_dataset,
    load_dataset,
    read_chartevents_csv,
    read_image_index_csv,
    read_labels_csv,
    synth_generate,
    write_dataset,
    write_synth_data,
)
from .errors import BackendFailure, DataError, InvalidParamsError, NearshotError
from .evaluation import ExperimentConfig, run_experiment, sweep
from .reporting import (
    load_report,
    plot_sweep_metric,
    render_report_table,
    render_sweep_table,
    report_dict_row,
    render_table,
    write_sweep_csv,
)

logger = logging.getLogger(__name__)

DEFAULT_LABELS = "Cardiomegaly,Edema,Pneumonia"


@click.group(name="nearshot")
def cli() -> None:
    """Grounded few-shot prompting pipeline."""


@cli.command("synth-data")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--patients", type=int, default=60, show_default=True)
@click.option("--features", type=int, default=24, show_default=True)
@click.option("--labels", default=DEFAULT_LABELS, show_default=True,
              help="Comma-separated condition names.")
@click.option("--missingness", type=float, default=0.2, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def synth_data_cmd(seed: int, patients: int, features: int, labels: str,
                   missingness: float, out_dir: Path) -> None:
    """Generate a seeded synthetic chartevents corpus with planted signal."""
    conditions = [c.strip() for c in labels.split(",") if c.strip()]
    data = synth_generate(seed=seed, n_patients=patients, n_features=features,
                          labels=conditions, out_dir=out_dir, missingness=missingness)
    paths = write_synth_data(data, out_dir)
    logger.info("wrote %d chart rows for %d patients", len(data.rows), patients)
    click.echo(json.dumps({name: str(path) for name, path in paths.items()},
                          indent=2, sort_keys=True))


@cli.command("build-dataset")
@click.option("--chartevents", type=click.Path(path_type=Path), required=True)
@click.option("--image-index", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_csv", type=click.Path(path_type=Path), required=True,
              help="CSV of patient_id plus one binary column per condition.")
@click.option("--k", type=int, default=10, show_default=True,
              help="Max features kept per label.")
@click.option("--pool-size", type=int, default=6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--source", default="synthetic", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def build_dataset_cmd(chartevents: Path, image_index: Path, labels_csv: Path,
                      k: int, pool_size: int, seed: int, source: str,
                      out_path: Path) -> None:
    """Build the in-context dataset (JSONL + manifest) from CSV inputs."""
    matrix = read_chartevents_csv(chartevents)
    index = read_image_index_csv(image_index)
    labels = read_labels_csv(labels_csv)
    dataset = build_dataset(matrix, labels, index, k=k,
                            split=SplitConfig(pool_size=pool_size),
                            seed=seed, source=source)
    manifest = write_dataset(dataset, out_path)
    logger.info("wrote %d records across %d labels", len(dataset.records),
                len(dataset.labels))
    click.echo(json.dumps({"dataset": str(out_path), "manifest": str(manifest),
                           "records": len(dataset.records)}, indent=2, sort_keys=True))


def _backend_set(spec: str, seed: int) -> BackendSet:
    if spec == "mock":
        return make_mock_backends(MockConfig(seed=seed))
    url = spec
    if url.startswith("http:") and not url.startswith("http://"):
        url = url[len("http:"):]
    if url.startswith("http://") or url.startswith("https://"):
        return HttpBackendClient(base_url=url).backend_set()
    raise InvalidParamsError(
        f"unknown backend {spec!r}; expected 'mock' or an http(s) URL")


def _experiment_config(config_path: Path | None, **overrides) -> ExperimentConfig:
    if config_path is not None:
        if not config_path.exists():
            raise DataError(f"config file not found: {config_path}")
        try:
            base = ExperimentConfig.from_dict(json.loads(config_path.read_text()))
        except json.JSONDecodeError as exc:
            raise DataError(f"{config_path}: invalid JSON ({exc})") from exc
    else:
        base = ExperimentConfig()
    fields = base.to_dict()
    for key, value in overrides.items():
        if value is not None:
            fields[key] = value
    return ExperimentConfig.from_dict(fields)


_config_options = [
    click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
                 help="JSON experiment config; flags override it."),
    click.option("--seed", type=int, default=None),
    click.option("--threshold", type=float, default=None,
                 help="Similarity threshold for shot retention (default 0.7)."),
    click.option("--shots", type=int, default=None,
                 help="Candidates initializing selection (default 6)."),
    click.option("--dps/--no-dps", "dps_enabled", default=None,
                 help="Enable/disable proximity selection."),
    click.option("--vg/--no-vg", "vg_enabled", default=None,
                 help="Enable/disable visual grounding."),
    click.option("--modality", type=click.Choice(["text", "image", "multimodal"]),
                 default=None),
    click.option("--template",
                 type=click.Choice(["image-text", "ehr-text", "image-ehr-text"]),
                 default=None),
    click.option("--unparseable-policy",
                 type=click.Choice(["count-incorrect", "exclude"]), default=None),
    click.option("--backend", default="mock", show_default=True,
                 help="'mock' or a server URL, e.g. http://127.0.0.1:8008"),
    click.option("--workdir", type=click.Path(path_type=Path), default=None,
                 help="Scratch directory for grounded crops."),
    click.option("--concurrency", type=int, default=1, show_default=True),
]


def _with_config_options(fn):
    for option in reversed(_config_options):
        fn = option(fn)
    return fn


@cli.command("run")
@click.option("--dataset", "dataset_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("report.json"),
              show_default=True)
@_with_config_options
def run_cmd(dataset_path: Path, out_path: Path, config_path: Path | None,
            backend: str, workdir: Path | None, concurrency: int, **overrides) -> None:
    """Run one experiment over a dataset and write its report."""
    config = _experiment_config(config_path, **overrides)
    dataset = load_dataset(dataset_path)
    backends = _backend_set(backend, config.seed)
    report = run_experiment(config, dataset, backends, scratch_dir=workdir,
                            concurrency=concurrency)
    report.write(out_path)
    logger.info("report written to %s", out_path)
    click.echo(render_report_table([report]))
    if report.errors:
        logger.warning("%d quer(ies) failed; see the report's errors list",
                       len(report.errors))


@cli.command("sweep")
@click.option("--dataset", "dataset_path", type=click.Path(path_type=Path), required=True)
@click.option("--axis", type=click.Choice(["shots", "threshold", "modality", "grid"]),
              required=True)
@click.option("--values", default=None,
              help="Comma-separated values for the axis (defaults per axis).")
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), default=None,
              help="Write one CSV row per configuration.")
@click.option("--report-dir", type=click.Path(path_type=Path), default=None,
              help="Write the individual report JSONs here.")
@_with_config_options
def sweep_cmd(dataset_path: Path, axis: str, values: str | None,
              csv_path: Path | None, report_dir: Path | None,
              config_path: Path | None, backend: str, workdir: Path | None,
              concurrency: int, **overrides) -> None:
    """Run an ablation sweep and print the comparison table."""
    config = _experiment_config(config_path, **overrides)
    dataset = load_dataset(dataset_path)
    backends = _backend_set(backend, config.seed)
    parsed_values = None
    if values:
        parsed_values = [v.strip() for v in values.split(",") if v.strip()]
    result = sweep(axis, parsed_values, config, dataset, backends,
                   scratch_dir=workdir, concurrency=concurrency)
    click.echo(render_sweep_table(result))
    if csv_path is not None:
        write_sweep_csv(result, csv_path)
        logger.info("sweep CSV written to %s", csv_path)
    if report_dir is not None:
        report_dir.mkdir(parents=True, exist_ok=True)
        for setting, report in zip(result.settings, result.reports):
            slug = setting.replace("=", "-").replace(",", "_").replace(".", "p")
            report.write(report_dir / f"{axis}_{slug}.json")
        logger.info("individual reports written to %s", report_dir)


@cli.command("report")
@click.option("--from-json", "json_paths", type=click.Path(path_type=Path),
              multiple=True, help="Render a table from stored report JSONs.")
@click.option("--plot-csv", "plot_csv_path", type=click.Path(path_type=Path), default=None,
              help="Render an SVG line chart from a sweep CSV.")
@click.option("--metric", default="f1", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Output SVG path for --plot-csv.")
def report_cmd(json_paths: tuple[Path, ...], plot_csv_path: Path | None,
               metric: str, out_path: Path | None) -> None:
    """Render stored reports as a table, or plot a sweep CSV as SVG."""
    if not json_paths and plot_csv_path is None:
        raise click.UsageError("provide --from-json and/or --plot-csv")
    if json_paths:
        rows = [report_dict_row(load_report(p)) for p in json_paths]
        click.echo(render_table(
            rows,
            columns=("setting", "precision", "recall", "f1", "accuracy",
                     "weighted_f1", "mean_retained"),
            headers=("Setting", "Precision", "Recall", "F1-score", "Accuracy",
                     "Weighted-F1", "Mean shots"),
        ))
    if plot_csv_path is not None:
        if out_path is None:
            out_path = plot_csv_path.with_suffix(f".{metric}.svg")
        plot_sweep_metric(plot_csv_path, metric, out_path)
        logger.info("plot written to %s", out_path)
        click.echo(str(out_path))


@cli.command("serve-mock")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
def serve_mock_cmd(host: str, port: int, seed: int, dim: int) -> None:
    """Host the deterministic mock backends over the wire protocol."""
    backends = make_mock_backends(MockConfig(seed=seed, embedding_dim=dim))
    server = BackendServer(backends, host=host, port=port)
    click.echo(f"serving mock backends on {server.address}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


def _setup_logging() -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    _setup_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except BackendFailure as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NearshotError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0
