# main.py
"""Interface en ligne de commande : train, apply, eval, bench, inspect."""
import functools
import logging
from pathlib import Path

import click
from pydantic import ValidationError

from config import (
    DEFAULT_THREADS,
    LOG_LEVEL,
    WB_LETTERS,
    WB_TEMPERATURES,
    PipelineConfig,
    TrainConfig,
    WbSimConfig,
    ensure_output_dir,
)
from core.bench import bench, size_mb, speedup
from core.dncm import PARAM_NAMES, identity_params, init_params
from core.encoder import init_encoder
from core.errors import DenimError, EmptyDatasetError
from core.metrics import evaluate
from core.params_io import load_params, save_params
from core.pipeline import run_pipeline, stack_from_files, stack_from_npy
from core.report import save_frame_csv, save_loss_plot, save_metrics_csv, save_metrics_excel, save_metrics_json
from core.trainer import load_dataset, synthesize_sample, synthetic_bases, train
from utils.file_loader import list_images, load_image, save_image
from utils.parser import parse_inputs, parse_resolutions, parse_settings

logger = logging.getLogger("denim")

PARAM_LABELS = {"pc": "Pc", "qc": "Qc", "rc": "Rc", "pa": "Pa", "qa": "Qa", "ra": "Ra"}


def _guard(fn):
    """Erreurs de validation -> code 2 ; erreurs d'exécution -> code 1, sans trace."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as e:
            raise click.UsageError(f"❌ Configuration invalide :\n{e}") from e
        except (DenimError, OSError) as e:
            logger.debug("échec", exc_info=True)
            raise click.ClickException(str(e)) from e
    return wrapper


def _settings_option(_ctx, _param, value):
    if value is None:
        return None
    try:
        return parse_settings(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


def _resolutions_option(_ctx, _param, value):
    try:
        return parse_resolutions(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


def _inputs_option(_ctx, _param, value):
    try:
        return parse_inputs(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


@click.group()
@click.option("-v", "--verbose", count=True, help="-v : INFO, -vv : DEBUG")
def cli(verbose: int):
    """DeNIM : correction automatique de la balance des blancs par projection couleur par pixel."""
    level = {0: LOG_LEVEL, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s : %(message)s")


# =========================================================
#   train
# =========================================================
@cli.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Dossier d'images (références simples ou groupes <stem>_<L> / <stem>_G).")
@click.option("--synthetic", type=click.IntRange(min=1), help="Nombre d'images synthétiques à générer.")
@click.option("--image-side", type=click.IntRange(min=8), default=64, show_default=True)
@click.option("--settings", default="default", show_default=True, callback=_settings_option)
@click.option("--steps", type=int, required=True)
@click.option("--lr", type=float, default=1e-4, show_default=True)
@click.option("--weight-decay", type=float, default=1e-2, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--k", "k", type=int, default=32, show_default=True)
@click.option("--low-res-side", type=int, default=256, show_default=True)
@click.option("--patch-size", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--freeze-encoder", is_flag=True)
@click.option("--init", "init_mode", type=click.Choice(["random", "identity"]), default="random", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Fichier DNIM (défaut : <DENIM_OUTPUT_DIR>/denim.dnim).")
@click.option("--curve", type=click.Path(dir_okay=False, path_type=Path), help="CSV de la courbe de perte.")
@click.option("--plot", type=click.Path(dir_okay=False, path_type=Path), help="Graphique HTML de la perte.")
@click.option("--progress/--no-progress", default=True)
@_guard
def train_cmd(data_dir, synthetic, image_side, settings, steps, lr, weight_decay, batch_size, k,
              low_res_side, patch_size, seed, workers, freeze_encoder, init_mode, out, curve, plot, progress):
    """Entraîne les matrices DNCM (et l'encodeur) puis écrit un fichier DNIM."""
    if (data_dir is None) == (synthetic is None):
        raise click.UsageError("❌ Indiquer exactement une source : --data ou --synthetic")
    cfg = TrainConfig(
        lr=lr, weight_decay=weight_decay, batch_size=batch_size, steps=steps, k=k,
        low_res_side=low_res_side, patch_size=patch_size, seed=seed, workers=workers,
        freeze_encoder=freeze_encoder,
    )
    sim = WbSimConfig()
    if data_dir is not None:
        dataset = load_dataset(data_dir, settings, sim)
    else:
        dataset = [synthesize_sample(b, sim, settings) for b in synthetic_bases(synthetic, image_side, seed)]
    if not dataset:
        raise EmptyDatasetError("❌ Aucun échantillon d'entraînement")

    click.echo("📊 Réglages : " + ", ".join(f"{c} ({WB_TEMPERATURES[c]}K)" for c in settings))
    params = identity_params(cfg.k, len(settings)) if init_mode == "identity" else None
    result = train(dataset, cfg, params=params, progress=progress)
    out = out or ensure_output_dir() / "denim.dnim"
    save_params(out, result.params, result.encoder)
    click.echo(f"✅ Paramètres enregistrés : {out}")
    last = result.curve.iloc[-1] if len(result.curve) else None
    if last is not None:
        click.echo(f"📊 Perte finale : {last['loss_per_pixel']:.6g} par pixel ({int(last['step'])} pas)")
    if curve:
        save_frame_csv(result.curve, curve)
        click.echo(f"📊 Courbe de perte : {curve}")
    if plot:
        save_loss_plot(result.curve, plot)
        click.echo(f"📊 Graphique : {plot}")


# =========================================================
#   apply
# =========================================================
@cli.command("apply")
@click.option("-i", "--input", "inputs", multiple=True, callback=_inputs_option,
              help="Rendu par réglage : lettre=chemin (répéter).")
@click.option("--stack", "stack_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Pile brute H×W×3N au format .npy.")
@click.option("--settings", default=None, callback=_settings_option,
              help="Ordre des réglages (par défaut : ordre des -i).")
@click.option("--params", "params_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--canonical-out", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--awb-out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--precompose/--no-precompose", default=True, show_default=True)
@click.option("--threads", type=int, default=DEFAULT_THREADS, show_default=True)
@click.option("--low-res-side", type=int, default=256, show_default=True)
@_guard
def apply_cmd(inputs, stack_path, settings, params_path, canonical_out, awb_out, precompose, threads, low_res_side):
    """Applique DNCMc puis DNCMa à une pile de rendus WB."""
    if bool(inputs) == (stack_path is not None):
        raise click.UsageError("❌ Indiquer soit des entrées -i lettre=chemin, soit --stack")
    params, enc = load_params(params_path)
    if stack_path is not None:
        stack = stack_from_npy(stack_path)
        order = settings or "".join(WB_LETTERS[:stack.settings])
    else:
        order = settings or "".join(inputs)
        stack = stack_from_files(inputs, order)
    cfg = PipelineConfig(
        params_path=params_path, k=params.k, settings=order, low_res_side=low_res_side,
        use_precompose=precompose, threads=threads,
    )
    result = run_pipeline(stack, params, enc, cfg)
    if canonical_out:
        save_image(canonical_out, result.canonical)
        click.echo(f"✅ Forme canonique : {canonical_out}")
    save_image(awb_out, result.awb)
    click.echo(f"✅ Image AWB : {awb_out}")


# =========================================================
#   eval
# =========================================================
@cli.command("eval")
@click.option("--pred", "pred_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--gt", "gt_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--json", "json_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--excel", "excel_path", type=click.Path(dir_okay=False, path_type=Path))
@_guard
def eval_cmd(pred_dir, gt_dir, csv_path, json_path, excel_path):
    """Compare les prédictions aux vérités terrain (appariées par nom de fichier sans extension)."""
    preds = {p.stem: p for p in list_images(pred_dir)}
    pairs = []
    for gt in list_images(gt_dir):
        pred = preds.get(gt.stem)
        if pred is None:
            logger.warning("pas de prédiction pour %s", gt.name)
            continue
        pairs.append((gt.stem, load_image(pred), load_image(gt)))
    if not pairs:
        raise EmptyDatasetError(f"❌ Aucune paire prédiction / vérité terrain entre {pred_dir} et {gt_dir}")
    report = evaluate(pairs)
    save_metrics_csv(report, csv_path)
    click.echo(f"📊 Métriques ({len(pairs)} images) : {csv_path}")
    if json_path:
        save_metrics_json(report, json_path)
        click.echo(f"📊 Synthèse JSON : {json_path}")
    if excel_path:
        save_metrics_excel(report, excel_path)
        click.echo(f"📊 Classeur Excel : {excel_path}")
    for metric, row in report.aggregates.iterrows():
        click.echo(f"   {metric:8s} moyenne={row['mean']:.4f}  Q1={row['q1']:.4f}  Q2={row['q2']:.4f}  Q3={row['q3']:.4f}")


# =========================================================
#   bench
# =========================================================
@cli.command("bench")
@click.option("--resolutions", default="512x512,1024x1024", show_default=True, callback=_resolutions_option)
@click.option("--params", "params_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Fichier DNIM (sinon paramètres aléatoires).")
@click.option("--settings", default="all", show_default=True, callback=_settings_option)
@click.option("--k", "k", type=int, default=32, show_default=True)
@click.option("--low-res-side", type=int, default=256, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--repeats", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--warmup", type=click.IntRange(min=0), default=2, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path))
@_guard
def bench_cmd(resolutions, params_path, settings, k, low_res_side, threads, repeats, warmup, csv_path):
    """Compare la chaîne naïve et les matrices précomposées."""
    if params_path is not None:
        params, enc = load_params(params_path)
    else:
        cfg = PipelineConfig(k=k, settings=settings, low_res_side=low_res_side, threads=threads)
        params = init_params(cfg.k, cfg.n_settings)
        enc = init_encoder(cfg.n_settings, cfg.k, seed=1)
    report = bench(resolutions, params, enc, low_res_side=low_res_side, threads=threads,
                   repeats=repeats, warmup=warmup)
    for _, row in report.iterrows():
        click.echo(
            f"   {row['variant']:11s} {row['width']}×{row['height']}  {row['wall_time_seconds']:.4f} s  "
            f"{row['mul_count_per_pixel']} mult./pixel  {row['mul_count']} mult."
        )
    for _, row in speedup(report).iterrows():
        click.echo(f"📊 {row['width']}×{row['height']} : accélération ×{row['speedup']:.1f}")
    if csv_path:
        save_frame_csv(report, csv_path)
        click.echo(f"📊 Résultats : {csv_path}")


# =========================================================
#   inspect
# =========================================================
@cli.command("inspect")
@click.argument("params_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_guard
def inspect_cmd(params_path):
    """Affiche les formes et le nombre de paramètres d'un fichier DNIM."""
    params, enc = load_params(params_path)
    click.echo(f"k = {params.k}, N = {params.n_settings}")
    tensors = params.tensors()
    for name in PARAM_NAMES:
        rows, cols = tensors[name].shape
        click.echo(f"   {PARAM_LABELS[name]} {rows}×{cols}")
    total = params.parameter_count
    click.echo(f"📊 DNCM : {params.parameter_count} paramètres")
    if enc is not None:
        for i, st in enumerate(enc.stages):
            click.echo(f"   étage {i} : conv 3×3 s2 {st.c_in} -> {st.c_out}")
        click.echo(f"   tête 1×1 : {enc.head_weight.shape[0]} -> {enc.head_weight.shape[1]}")
        click.echo(f"📊 Encodeur : {enc.parameter_count} paramètres")
        total += enc.parameter_count
    click.echo(f"📊 Total : {total} paramètres ({size_mb(total):.4f} Mo)")


if __name__ == "__main__":
    cli()
