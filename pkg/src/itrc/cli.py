"""Command-line interface: a thin client over the pipeline service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .client import ServiceClient, ServiceError
from .fusion import MODEL_MATRIX


def _abspath(value: str) -> str:
    return str(Path(value).absolute())


def _call(ctx: click.Context, path: str, payload: dict) -> dict:
    client: ServiceClient = ctx.obj
    try:
        return client.post(path, payload)
    except ServiceError as exc:
        click.echo(f"error at {exc.stage}: {exc.message}", err=True)
        sys.exit(1)


@click.group()
@click.option("--server", envvar="ITRC_SERVER", default=None,
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None):
    """Image-text relation classification pipeline."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--dir", "store_dir", required=True, type=click.Path())
@click.pass_context
def ingest(ctx, store_dir):
    """Validate an embedding store directory."""
    body = _call(ctx, "/ingest", {"dir": _abspath(store_dir)})
    counts = ", ".join(f"{k}={v}" for k, v in sorted(body["label_counts"].items()))
    click.echo(f"OK, n={body['n']}, dim={body['dim']}, {counts}")


@main.command()
@click.option("--n", required=True, type=int)
@click.option("--separation", required=True, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def synth(ctx, n, separation, seed, out):
    """Generate a synthetic two-class embedding store."""
    body = _call(ctx, "/synth", {"n": n, "separation": separation, "seed": seed,
                                 "out": _abspath(out)})
    click.echo(f"wrote {body['out']} (n={body['n']}, dim={body['dim']})")


@main.command()
@click.option("--store", required=True, type=click.Path())
@click.option("--k", default=100, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--max-iter", default=100, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def cluster(ctx, store, k, seed, max_iter, out):
    """Cluster both modalities with seeded spherical k-means."""
    body = _call(ctx, "/cluster", {"store": _abspath(store), "k": k, "seed": seed,
                                   "max_iter": max_iter, "out": _abspath(out)})
    click.echo(f"wrote {body['out']} "
               f"(text obj={body['text']['objective']:.4f} iters={body['text']['iterations']}, "
               f"image obj={body['image']['objective']:.4f} iters={body['image']['iterations']})")


@main.command("build-graph")
@click.option("--store", required=True, type=click.Path())
@click.option("--clusters", required=True, type=click.Path())
@click.option("--split", "ratios", default="0.6,0.2,0.2", show_default=True,
              help="train,val,test ratios")
@click.option("--j", default=5, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--order", default="remove-then-add",
              type=click.Choice(["remove-then-add", "add-then-remove"]))
@click.option("--no-remove", is_flag=True, help="skip same-label train-train removal")
@click.option("--no-knn", is_flag=True, help="skip nearest-neighbor connection")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def build_graph(ctx, store, clusters, ratios, j, seed, order, no_remove, no_knn, out):
    """Build, label, and reduce the relation graph and its line graph."""
    body = _call(ctx, "/build-graph", {
        "store": _abspath(store), "clusters": _abspath(clusters),
        "ratios": [float(r) for r in ratios.split(",")], "j": j, "seed": seed,
        "order": order, "remove_same_label": not no_remove, "add_knn": not no_knn,
        "out": _abspath(out)})
    s = body["stats"]
    click.echo(f"wrote {body['out']} (L={s['num_nodes']}, "
               f"edges {s['edges_before_reduction']} -> {s['edges_after_reduction']}, "
               f"train nodes={s['train_nodes']}, test nodes={s['test_nodes']})")


@main.command("train-gcn")
@click.option("--graph", required=True, type=click.Path())
@click.option("--epochs", default=100, type=int)
@click.option("--lr", default=0.005, type=float)
@click.option("--layers", default=64, type=int)
@click.option("--alpha", default=0.1, type=float)
@click.option("--lam", default=0.5, type=float)
@click.option("--dropout", default=0.5, type=float)
@click.option("--channels", default=None, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--metrics-out", default=None, type=click.Path())
@click.pass_context
def train_gcn_cmd(ctx, graph, epochs, lr, layers, alpha, lam, dropout, channels, seed,
                  out, metrics_out):
    """Train the line-graph GCN and export per-pair edge vectors."""
    if metrics_out is None:
        metrics_out = str(Path(out).with_suffix(".metrics.json"))
    body = _call(ctx, "/train-gcn", {
        "graph": _abspath(graph), "epochs": epochs, "lr": lr, "layers": layers,
        "alpha": alpha, "lam": lam, "dropout": dropout, "channels": channels,
        "seed": seed, "out": _abspath(out), "metrics_out": _abspath(metrics_out)})
    line = f"wrote {body['out']} (final loss {body['final_loss']:.4f}"
    if body.get("node_metrics"):
        line += (f", node acc {body['node_metrics']['accuracy']:.3f}"
                 f", macro-F1 {body['node_metrics']['macro_f1']:.3f}")
    click.echo(line + ")")


@main.command("train-clf")
@click.option("--store", required=True, type=click.Path())
@click.option("--edges", default=None, type=click.Path(),
              help="edge-vector blob; required for models using E")
@click.option("--model", "model_name", required=True,
              type=click.Choice(sorted(MODEL_MATRIX)))
@click.option("--split", "ratios", default="0.6,0.2,0.2", show_default=True)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def train_clf(ctx, store, edges, model_name, ratios, seed, out):
    """Fuse vectors and train the MLP classifier."""
    body = _call(ctx, "/train-clf", {
        "store": _abspath(store), "edges": _abspath(edges) if edges else "",
        "model": model_name, "ratios": [float(r) for r in ratios.split(",")],
        "seed": seed, "out": _abspath(out)})
    m = body["test_metrics"]
    click.echo(f"wrote {body['out']} (best epoch {body['best_epoch']}, "
               f"val loss {body['val_loss']:.4f}, test acc {m['accuracy']:.3f}, "
               f"macro-F1 {m['macro_f1']:.3f})")


def _read_config(path: str) -> dict:
    """Config file mirroring experiment flags: JSON or key=value lines."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value.strip())
    return out


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


EXPERIMENT_FLAGS = {
    "models": "all", "trials": 10, "seed": 0, "format": "csv",
    "ratios": "0.6,0.2,0.2", "k": 100, "kmeans_max_iter": 100, "j": 5,
    "order": "remove-then-add", "remove_same_label": True, "add_knn": True,
    "gcn_epochs": 100, "gcn_lr": 0.005, "gcn_layers": 64, "gcn_alpha": 0.1,
    "gcn_lam": 0.5, "gcn_dropout": 0.5, "gcn_channels": None,
    "mlp_hidden1": 256, "mlp_hidden2": 64, "mlp_dropout": 0.5, "mlp_epochs": 100,
    "batch_size": 4, "mlp_lr": 0.001, "patience": 10,
}


@main.command()
@click.option("--store", required=True, type=click.Path())
@click.option("--models", default="all", show_default=True,
              help="'all' or comma-separated model names, e.g. T+E(C),T+I(C)")
@click.option("--trials", default=10, type=int, show_default=True)
@click.option("--seed", default=0, type=int)
@click.option("--report", required=True, type=click.Path())
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "md"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="key=value or JSON file mirroring every flag; explicit flags win")
@click.option("--ratios", default="0.6,0.2,0.2", show_default=True)
@click.option("--k", default=100, type=int, show_default=True)
@click.option("--kmeans-max-iter", default=100, type=int)
@click.option("--j", default=5, type=int, show_default=True)
@click.option("--order", default="remove-then-add",
              type=click.Choice(["remove-then-add", "add-then-remove"]))
@click.option("--gcn-epochs", default=100, type=int)
@click.option("--gcn-lr", default=0.005, type=float)
@click.option("--gcn-layers", default=64, type=int)
@click.option("--gcn-alpha", default=0.1, type=float)
@click.option("--gcn-lam", default=0.5, type=float)
@click.option("--gcn-dropout", default=0.5, type=float)
@click.option("--gcn-channels", default=None, type=int)
@click.option("--mlp-hidden1", default=256, type=int)
@click.option("--mlp-hidden2", default=64, type=int)
@click.option("--mlp-dropout", default=0.5, type=float)
@click.option("--mlp-epochs", default=100, type=int)
@click.option("--batch-size", default=4, type=int)
@click.option("--mlp-lr", default=0.001, type=float)
@click.option("--patience", default=10, type=int)
@click.pass_context
def experiment(ctx, store, config_path, fmt, report, **flags):
    """Run the model matrix over seeded trials and write the report."""
    merged = dict(EXPERIMENT_FLAGS)
    merged["format"] = fmt
    if config_path:
        cfg = _read_config(config_path)
        unknown = set(cfg) - set(EXPERIMENT_FLAGS) - {"store", "report", "format"}
        if unknown:
            raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
        merged.update(cfg)
    for key, value in flags.items():
        src = ctx.get_parameter_source(key)
        if src is not None and src.name == "COMMANDLINE":
            merged[key] = value
    if ctx.get_parameter_source("fmt").name == "COMMANDLINE":
        merged["format"] = fmt

    models = merged["models"]
    model_list = ["all"] if models == "all" else [m.strip() for m in str(models).split(",")]
    ratios = merged["ratios"]
    if isinstance(ratios, str):
        ratios = [float(r) for r in ratios.split(",")]
    payload = {
        "store": _abspath(store), "models": model_list, "trials": merged["trials"],
        "seed": merged["seed"], "report": _abspath(report), "format": merged["format"],
        "ratios": ratios, "k": merged["k"], "kmeans_max_iter": merged["kmeans_max_iter"],
        "j": merged["j"], "order": merged["order"],
        "remove_same_label": merged["remove_same_label"], "add_knn": merged["add_knn"],
        "epochs": merged["gcn_epochs"], "lr": merged["gcn_lr"], "layers": merged["gcn_layers"],
        "alpha": merged["gcn_alpha"], "lam": merged["gcn_lam"], "dropout": merged["gcn_dropout"],
        "channels": merged["gcn_channels"],
        "hidden1": merged["mlp_hidden1"], "hidden2": merged["mlp_hidden2"],
        "mlp_dropout": merged["mlp_dropout"], "mlp_epochs": merged["mlp_epochs"],
        "batch_size": merged["batch_size"], "mlp_lr": merged["mlp_lr"],
        "patience": merged["patience"],
    }
    body = _call(ctx, "/experiment", payload)
    for row in body["rows"]:
        click.echo(f"{row['model']}: acc={row['means']['accuracy']:.3f} "
                   f"macro-F1={row['means']['macro_f1']:.3f}")
    click.echo(f"report written to {body['report']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, type=int, show_default=True)
def serve(host, port):
    """Run the pipeline service as an HTTP server."""
    import uvicorn

    uvicorn.run("itrc.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
