"""Command-line entry points for the full pipeline.

Layout of the command tree::

    talents env describe          inspect a layout, its reward table and
                                  the 27-action enumeration
    talents collect               roll out scripted pairings into a dataset
    talents dataset export        dump a dataset as line-delimited JSON
    talents vae train             fit the strategy VAE
    talents clusters fit|select   build a ClusterSet from VAE latents
    talents train cooperator      PPO training of the conditioned policy
    talents eval crossplay|swap|sweep
                                  evaluation reports; the report path also
                                  renders figures next to the tables
    talents serve                 realtime human-vs-agent game server
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, replace
from pathlib import Path

import click
import numpy as np

from . import bp
from .bp import PreferenceVector, ScriptedPolicy
from .clusters import (fit_kmeans, load_clusters, save_clusters, select_k)
from .cooperator import (PPOConfig, desk_ppo_config, load_cooperator,
                         paper_ppo_config, save_cooperator, tiny_ppo_config,
                         train_cooperator)
from .env import action_table
from .env.layout import TILE_TO_CHAR, load_builtin, load_layout
from .env.state import RewardTable
from .evalharness import (cluster_sweep, crossplay, export_csv,
                          export_jsonl, partner_swap)
from .vae import (VaeConfig, desk_config, embed_dataset, load_vae,
                  paper_config, tiny_config)
from .vae import train as vae_train_loop

VAE_PRESETS = {"paper": paper_config, "desk": desk_config,
               "tiny": tiny_config}
PPO_PRESETS = {"paper": paper_ppo_config, "desk": desk_ppo_config,
               "tiny": tiny_ppo_config}


def _layout_argument(name_or_path: str):
    path = Path(name_or_path)
    if path.suffix == ".layout" or path.exists():
        return load_layout(path)
    return load_builtin(name_or_path)


def _policy_from_code(code: str, seed: int) -> ScriptedPolicy:
    try:
        prefs = PreferenceVector.from_code(code)
    except (ValueError, KeyError) as exc:
        raise click.BadParameter(str(exc)) from exc
    return ScriptedPolicy(prefs, seed=seed, name=f"bp_{code}")


def _echo_rows(rows) -> None:
    for row in rows:
        click.echo("  ".join(f"{k}={v}" for k, v in row.items()))


@click.group()
def main() -> None:
    """Strategy-conditioned cooperation pipeline."""


# ---------------------------------------------------------------------------
# env


@main.group("env")
def env_group() -> None:
    """Environment introspection."""


@env_group.command("describe")
@click.option("--layout", "layout_name", default="open", show_default=True,
              help="Builtin layout name or a .layout file path.")
def env_describe(layout_name: str) -> None:
    """Emit layout facts, the reward table and the 27-action table as
    line-delimited key-value text."""
    layout = _layout_argument(layout_name)
    click.echo(f"layout.name={layout.name}")
    click.echo(f"layout.height={layout.height}")
    click.echo(f"layout.width={layout.width}")
    for r, row in enumerate(layout.grid):
        click.echo(f"layout.row.{r}="
                   + "".join(TILE_TO_CHAR[t] for t in row))
    rewards = RewardTable.from_layout(layout)
    for key, value in asdict(rewards).items():
        click.echo(f"reward.{key}={value}")
    for order_idx, order in enumerate(layout.order_schedule):
        click.echo(f"order.{order_idx}={order.recipe}:"
                   f"arrival={order.arrival}:deadline={order.deadline}")
    for action_id, name, kind in action_table():
        click.echo(f"action.{action_id}={name}:{kind}")


# ---------------------------------------------------------------------------
# data


@main.command("collect")
@click.option("--layout", "layout_name", default="open", show_default=True)
@click.option("--code", "codes", multiple=True,
              help="9-character preference code over {E,D,N}; repeatable. "
                   "Defaults to the full training population.")
@click.option("--episodes", default=2, show_default=True,
              help="Episodes per pairing.")
@click.option("--ticks", default=2400, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
def collect_cmd(layout_name: str, codes, episodes: int, ticks: int,
                seed: int, out_path: Path) -> None:
    """Roll out scripted pairings (each against a neutral anchor) into a
    trajectory dataset."""
    from .data import CollectError, collect, save

    if codes:
        partners = [_policy_from_code(code, seed + i)
                    for i, code in enumerate(codes)]
    else:
        partners = bp.build_population(seed=seed)
    anchor = bp.neutral_planner(seed=seed + 10_000)
    plan = [(policy, anchor) for policy in partners]
    try:
        dataset = collect(plan, episodes, seed, layout_name=layout_name,
                          episode_ticks=ticks)
    except CollectError as exc:
        click.echo(f"collection aborted: {exc}", err=True)
        for key, value in exc.report.items():
            click.echo(f"  {key}={value}", err=True)
        raise SystemExit(1)
    save(dataset, out_path)
    click.echo(f"wrote {len(dataset.trajectories)} trajectories to "
               f"{out_path}")


@main.group("dataset")
def dataset_group() -> None:
    """Dataset file utilities."""


@dataset_group.command("export")
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
def dataset_export(dataset_path: Path, out_path: Path) -> None:
    """Dump a binary dataset as line-delimited JSON for inspection."""
    from .data import export_jsonl as dataset_export_jsonl
    from .data import load

    dataset = load(dataset_path)
    n = dataset_export_jsonl(dataset, out_path)
    click.echo(f"wrote {n} records to {out_path}")


# ---------------------------------------------------------------------------
# vae


@main.group("vae")
def vae_group() -> None:
    """Strategy-VAE training."""


@vae_group.command("train")
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--preset", type=click.Choice(sorted(VAE_PRESETS)),
              default="desk", show_default=True)
@click.option("--epochs", default=None, type=int,
              help="Override the preset's epoch count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
@click.option("--eval", "run_eval", is_flag=True,
              help="Report the validation NLL of the final model.")
def vae_train(dataset_path: Path, preset: str, epochs: int | None,
              seed: int, out_path: Path, run_eval: bool) -> None:
    """Fit the sequential strategy VAE and write its checkpoint; the
    training curve lands next to it as CSV and PNG."""
    from .data import load
    from .nn.optim import save_checkpoint
    from .plots import training_curve_figure
    from .vae import validation_nll

    config = VAE_PRESETS[preset]()
    if epochs is not None:
        config = replace(config, epochs=epochs)
    dataset = load(dataset_path)
    model, curve = vae_train_loop(
        dataset, config, seed,
        progress=lambda row: click.echo(
            f"epoch {row['epoch']:3d}  loss {row['loss']:.4f}  "
            f"kl {row['kl']:.4f}  val {row['val_recon']:.4f}"))
    obs_shape = dataset.trajectories[0].observations(0).shape[1:]
    save_checkpoint(model.store, out_path,
                    extra={"config": asdict(config),
                           "obs_shape": list(obs_shape),
                           "epoch": config.epochs - 1})
    curve_csv = out_path.with_suffix(".curve.csv")
    with open(curve_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(curve[0]))
        writer.writeheader()
        writer.writerows(curve)
    training_curve_figure(curve, out_path.with_suffix(".curve.png"),
                          y="val_recon", x="epoch")
    click.echo(f"wrote checkpoint to {out_path}")
    if run_eval:
        click.echo(f"validation nll: "
                   f"{validation_nll(model, dataset, seed):.4f}")


# ---------------------------------------------------------------------------
# clusters


@main.group("clusters")
def clusters_group() -> None:
    """Latent-space clustering."""


def _latents_for(vae_path: Path, dataset_path: Path, seed: int):
    from .data import load

    model = load_vae(vae_path)
    dataset = load(dataset_path)
    latents, labels = embed_dataset(model, dataset, seed=seed)
    if not len(latents):
        raise click.ClickException("dataset produced no windows")
    return latents, labels


@clusters_group.command("fit")
@click.option("--vae", "vae_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--k", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
def clusters_fit(vae_path: Path, dataset_path: Path, k: int, seed: int,
                 out_path: Path) -> None:
    """K-means on the dataset's mean latents at a fixed K."""
    latents, _ = _latents_for(vae_path, dataset_path, seed)
    _, clusters, trace = fit_kmeans(latents, k, seed=seed)
    save_clusters(clusters, out_path)
    click.echo(f"k={k}  inertia={trace[-1]:.4f}  "
               f"hash={clusters.content_hash()}")
    click.echo(f"wrote cluster set to {out_path}")


@clusters_group.command("select")
@click.option("--vae", "vae_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--k-min", default=2, show_default=True)
@click.option("--k-max", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
def clusters_select(vae_path: Path, dataset_path: Path, k_min: int,
                    k_max: int, seed: int, out_path: Path) -> None:
    """Silhouette-based K selection over a K range."""
    latents, _ = _latents_for(vae_path, dataset_path, seed)
    result = select_k(latents, range(k_min, k_max + 1), seed=seed)
    for k in sorted(result.report.scores):
        click.echo(f"k={k}  silhouette={result.report.scores[k]:.4f}")
    click.echo(f"chosen k={result.report.chosen_k}")
    save_clusters(result.clusters, out_path)
    click.echo(f"wrote cluster set to {out_path}")


# ---------------------------------------------------------------------------
# train


@main.group("train")
def train_group() -> None:
    """Policy training."""


def _ppo_config(preset: str, total_steps: int | None, ticks: int | None
                ) -> PPOConfig:
    config = PPO_PRESETS[preset]()
    if total_steps is not None:
        config.total_steps = total_steps
        config.batch = min(config.batch, total_steps)
    if ticks is not None:
        config.episode_ticks = ticks
    return config


@train_group.command("cooperator")
@click.option("--vae", "vae_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--clusters", "clusters_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--preset", type=click.Choice(sorted(PPO_PRESETS)),
              default="desk", show_default=True)
@click.option("--total-steps", default=None, type=int,
              help="Override the preset's environment-step budget.")
@click.option("--ticks", default=None, type=int,
              help="Override the preset's episode length.")
@click.option("--br", "br_baseline", is_flag=True,
              help="Train the unconditioned best-response baseline "
                   "against the scripted population.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
def train_cooperator_cmd(vae_path: Path, clusters_path: Path, preset: str,
                         total_steps: int | None, ticks: int | None,
                         br_baseline: bool, seed: int,
                         out_path: Path) -> None:
    """PPO training of the cluster-conditioned cooperator."""
    from .plots import training_curve_figure

    model = load_vae(vae_path)
    clusters = load_clusters(clusters_path)
    config = _ppo_config(preset, total_steps, ticks)
    config.br_baseline = br_baseline
    scripted = bp.build_population(seed=seed) if br_baseline else None
    policy, curve = train_cooperator(
        model, clusters, config, seed, scripted_partners=scripted,
        progress=lambda row: click.echo(
            f"steps {row['steps']:>10d}  "
            f"return {row['mean_return']:8.3f}"))
    save_cooperator(policy, out_path, clusters)
    if curve:
        training_curve_figure(curve, out_path.with_suffix(".curve.png"))
    click.echo(f"wrote policy checkpoint to {out_path}")


# ---------------------------------------------------------------------------
# eval


@main.group("eval")
def eval_group() -> None:
    """Evaluation reports with figures rendered beside the tables."""


EVAL_PRESETS = {"desk": {"episodes": 10, "ticks": 400},
                "paper": {"episodes": 10, "ticks": 2400}}


def _eval_common(fn):
    fn = click.option("--out", "out_dir", required=True,
                      type=click.Path(file_okay=False, path_type=Path))(fn)
    fn = click.option("--seed", default=0, show_default=True)(fn)
    fn = click.option("--preset", type=click.Choice(sorted(EVAL_PRESETS)),
                      default="desk", show_default=True)(fn)
    fn = click.option("--layout", "layout_name", default="open",
                      show_default=True)(fn)
    fn = click.option("--episodes", default=None, type=int,
                      help="Override the preset's episode count.")(fn)
    fn = click.option("--ticks", default=None, type=int,
                      help="Override the preset's episode length.")(fn)
    fn = click.option("--vae", "vae_path", required=True,
                      type=click.Path(exists=True, dir_okay=False,
                                      path_type=Path))(fn)
    return fn


def _eval_params(preset: str, episodes: int | None, ticks: int | None):
    params = dict(EVAL_PRESETS[preset])
    if episodes is not None:
        params["episodes"] = episodes
    if ticks is not None:
        params["ticks"] = ticks
    return params["episodes"], params["ticks"]


def _write_report(report, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    export_csv(report, out_dir / f"{stem}.csv")
    export_jsonl(report, out_dir / f"{stem}.jsonl")


@eval_group.command("crossplay")
@_eval_common
@click.option("--policy", "policy_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--clusters", "clusters_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--no-adapt", is_flag=True,
              help="Pin cluster 0 (BR-degenerate ablation).")
def eval_crossplay(vae_path: Path, policy_path: Path, clusters_path: Path,
                   layout_name: str, preset: str, episodes: int | None,
                   ticks: int | None, seed: int, out_dir: Path,
                   no_adapt: bool) -> None:
    """Held-out cross-play table over the 12 holdout partners."""
    from .plots import crossplay_figure

    model = load_vae(vae_path)
    clusters = load_clusters(clusters_path)
    policy = load_cooperator(policy_path, clusters)
    episodes, ticks = _eval_params(preset, episodes, ticks)
    partners = {p.name: p for p in bp.holdout_set(seed=seed)}
    report = crossplay(policy, model, clusters, partners, layout_name,
                       episodes=episodes, seed=seed, ticks=ticks,
                       adapt=not no_adapt)
    _write_report(report, out_dir, "crossplay")
    crossplay_figure(report, out_dir / "crossplay.png")
    _echo_rows(report.rows)
    click.echo(f"wrote report + figure to {out_dir}")


@eval_group.command("swap")
@_eval_common
@click.option("--policy", "policy_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--clusters", "clusters_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--partner-a", default="NNENNNNNN", show_default=True,
              help="Preference code of the pre-swap partner.")
@click.option("--partner-b", default="NNDNNNNNN", show_default=True,
              help="Preference code of the post-swap partner.")
@click.option("--swap-tick", default=None, type=int,
              help="Swap tick (default: mid-episode).")
def eval_swap(vae_path: Path, policy_path: Path, clusters_path: Path,
              layout_name: str, preset: str, episodes: int | None,
              ticks: int | None, seed: int, out_dir: Path, partner_a: str,
              partner_b: str, swap_tick: int | None) -> None:
    """Mid-episode partner replacement: fixed-share vs the static
    ablation, with belief traces."""
    from .plots import swap_figure

    model = load_vae(vae_path)
    clusters = load_clusters(clusters_path)
    policy = load_cooperator(policy_path, clusters)
    episodes, ticks = _eval_params(preset, episodes, ticks)
    result = partner_swap(
        policy, model, clusters,
        _policy_from_code(partner_a, seed),
        _policy_from_code(partner_b, seed + 1),
        layout_name, swap_tick=swap_tick or ticks // 2,
        episodes=episodes, seed=seed, ticks=ticks)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "swap_tick": result["swap_tick"], "ticks": result["ticks"],
        "config_hash": result["config_hash"],
        "modes": {mode: {"mean_final_score":
                         float(np.mean([run["score"] for run in runs]))}
                  for mode, runs in result["modes"].items()},
    }
    with open(out_dir / "swap.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    swap_figure(result, out_dir / "swap.png")
    for mode, stats in summary["modes"].items():
        click.echo(f"{mode}: mean final score "
                   f"{stats['mean_final_score']:.3f}")
    click.echo(f"wrote summary + figure to {out_dir}")


@eval_group.command("sweep")
@_eval_common
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--k", "k_list", multiple=True, type=int,
              default=(1, 2, 4), show_default=True)
@click.option("--train-preset", type=click.Choice(sorted(PPO_PRESETS)),
              default="desk", show_default=True)
@click.option("--total-steps", default=None, type=int)
def eval_sweep(vae_path: Path, dataset_path: Path, layout_name: str,
               preset: str, episodes: int | None, ticks: int | None,
               seed: int, out_dir: Path, k_list, train_preset: str,
               total_steps: int | None) -> None:
    """Cluster-count sweep: refit clusters, retrain, and evaluate per K."""
    from .plots import sweep_figure

    model = load_vae(vae_path)
    latents, _ = _latents_for(vae_path, dataset_path, seed)
    episodes, eval_ticks = _eval_params(preset, episodes, ticks)
    config = _ppo_config(train_preset, total_steps, None)
    partners = {p.name: p for p in bp.holdout_set(seed=seed)}
    reports = cluster_sweep(model, latents, partners, sorted(set(k_list)),
                            config, layout_name, episodes=episodes,
                            seed=seed, ticks=eval_ticks)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, report in reports.items():
        _write_report(report, out_dir, f"sweep_k{k}")
        click.echo(f"k={k}  pooled mean return "
                   f"{report.mean_return():.3f}")
    sweep_figure(reports, out_dir / "sweep.png")
    click.echo(f"wrote reports + figure to {out_dir}")


# ---------------------------------------------------------------------------
# serve


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--vae", "vae_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--policy", "policy_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--clusters", "clusters_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--log-dir", default="sessions",
              type=click.Path(file_okay=False, path_type=Path),
              show_default=True)
def serve(host: str, port: int, vae_path, policy_path, clusters_path,
          log_dir: Path) -> None:
    """Run the realtime human-vs-agent game server."""
    import uvicorn

    from .server import build_app

    artifacts = None
    if policy_path is not None:
        if vae_path is None or clusters_path is None:
            raise click.ClickException(
                "--policy requires --vae and --clusters")
        model = load_vae(vae_path)
        clusters = load_clusters(clusters_path)
        artifacts = {"vae": model, "clusters": clusters,
                     "policy": load_cooperator(policy_path, clusters)}
    app = build_app(artifacts=artifacts, log_dir=log_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
