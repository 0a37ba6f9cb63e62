"""Command line front end: synth, features, label, train, eval, classify, analyze.

Every subcommand writes ``run_manifest.json`` next to its outputs with the
resolved options and sha256 digests of every input and output file.  The
manifest holds no wall-clock time, so equal runs give equal manifests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from functools import wraps
from ipaddress import IPv4Address
from pathlib import Path
from typing import Optional

import click
import yaml

from . import __version__
from .datamodel import Stage, format_ip, load_suffix_list, parse_ip
from .errors import ConfigError, HostingTypeError, IngestError

log = logging.getLogger("hostingtype")

MANIFEST = "run_manifest.json"


def sub_seed(seed: int, command: str) -> int:
    """Stable 63-bit seed for one subcommand."""
    digest = hashlib.sha256(f"{seed}:{command}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_reference(text) -> int:
    """Epoch seconds, or an ISO-8601 date/time taken as UTC."""
    if isinstance(text, int):
        return text
    s = str(text).strip()
    if s.lstrip("-").isdigit():
        return int(s)
    try:
        dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"reference must be epoch seconds or ISO-8601, got {s!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def write_manifest(out_dir, command: str, options: dict, inputs: list, outputs: list) -> Path:
    def digests(paths):
        return {str(p): file_digest(p) for p in sorted({str(p) for p in paths if p is not None})}

    manifest = {
        "tool": "hostingtype",
        "version": __version__,
        "command": command,
        "options": {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(options.items())},
        "inputs": digests(inputs),
        "outputs": digests(outputs),
    }
    path = Path(out_dir) / MANIFEST
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _dump_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config_file(path) -> dict:
    """YAML or JSON mapping.  Top-level keys apply to every subcommand; a key
    named after a subcommand holds options for that subcommand alone."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping")
    return data


def _default_map(data: dict, commands) -> dict:
    common = {k.replace("-", "_"): v for k, v in data.items() if k not in commands}
    out = {}
    for name in commands:
        section = data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be a mapping")
        out[name] = {**common, **{k.replace("-", "_"): v for k, v in section.items()}}
    return out


def _fail(exc: BaseException) -> None:
    code = getattr(exc, "code", "E_GENERIC") if isinstance(exc, HostingTypeError) else "E_IO"
    msg = " ".join(str(exc).split())
    click.echo(f"error: {code}: {msg}", err=True)
    sys.exit(2)


def guarded(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HostingTypeError as exc:
            _fail(exc)
        except OSError as exc:
            _fail(exc)

    return wrapper


# ------------------------------------------------------------------ options


def seed_option(f):
    return click.option("--seed", type=int, default=0, show_default=True, help="Root seed; subcommands derive their own.")(f)


def reference_option(f):
    return click.option("--reference", required=True, help="Reference time: epoch seconds or ISO-8601 (UTC).")(f)


def jobs_option(f):
    return click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Worker processes.")(f)


def strict_option(f):
    return click.option("--strict", is_flag=True, help="Abort on the first malformed input line.")(f)


def suffixes_option(f):
    return click.option("--suffixes", type=click.Path(exists=True, dir_okay=False), help="Public suffix list file.")(f)


def stage_option(f):
    return click.option("--stage", type=click.Choice([s.value for s in Stage]), required=True)(f)


def _suffixes(path) -> Optional[frozenset[str]]:
    return load_suffix_list(path) if path else None


def _out_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p


def _out_file(path) -> Path:
    p = Path(path)
    os.makedirs(p.parent, exist_ok=True)
    return p


def _read_ip_list(path) -> list[IPv4Address]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text or text == "ip":
                continue
            try:
                out.append(parse_ip(text.split(",")[0]))
            except ValueError as exc:
                raise IngestError(str(exc), str(path), n) from exc
    return out


def _truth_labels(path, stage: Stage, cohort: Optional[str]) -> dict[IPv4Address, str]:
    from .synth import read_truth

    out = {}
    for t in read_truth(path):
        if cohort and t.cohort != cohort:
            continue
        label = t.stage1_truth if stage is Stage.HOSTING else t.stage2_truth
        if label is not None:
            out[t.ip] = label
    return out


def _csv_labels(path) -> dict[IPv4Address, str]:
    import csv

    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "ip" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise IngestError("label file needs ip and label columns", str(path), 1)
        for n, row in enumerate(reader, 2):
            if row["label"] in ("", "NA"):
                continue
            try:
                out[parse_ip(row["ip"])] = row["label"]
            except ValueError as exc:
                raise IngestError(str(exc), str(path), n) from exc
    return out


# ---------------------------------------------------------------------- cli

COMMANDS = ("synth", "features", "label", "train", "eval", "classify", "analyze")


@click.group()
@click.version_option(__version__, prog_name="hostingtype")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML/JSON file mirroring the flags; flags win.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str], verbose: bool):
    """Hosting / non-hosting and dedicated / shared IP classification."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    if config_path:
        try:
            ctx.default_map = _default_map(load_config_file(config_path), COMMANDS)
        except HostingTypeError as exc:
            _fail(exc)


def _config_inputs(ctx: click.Context) -> list:
    p = ctx.obj.get("config_path") if ctx.obj else None
    return [p] if p else []


@main.command()
@click.option("--n", "n", type=click.IntRange(0), default=1000, show_default=True, help="IPs per class in the hosting cohort.")
@click.option("--n-stage2", type=click.IntRange(0), default=None, help="IPs per class in the dedicated/shared cohort [default: --n].")
@click.option("--malicious", "n_malicious", type=click.IntRange(0), default=0, show_default=True, help="IPs hosting malicious apexes.")
@click.option("--privacy-fraction", type=click.FloatRange(0, 1), default=0.0, show_default=True)
@click.option("--window-days", type=click.IntRange(2), default=60, show_default=True)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@seed_option
@reference_option
@click.pass_context
@guarded
def synth(ctx, n, n_stage2, n_malicious, privacy_fraction, window_days, out, seed, reference):
    """Generate a synthetic corpus with planted truth."""
    from .synth import MaliciousConfig, SynthConfig, generate

    ref = parse_reference(reference)
    n2 = n if n_stage2 is None else n_stage2
    cfg = SynthConfig(
        n_nonhosting=n,
        n_hosting=n,
        n_dedicated=n2,
        n_shared=n2,
        malicious=MaliciousConfig(n_ips=n_malicious) if n_malicious else None,
        privacy_fraction=privacy_fraction,
        seed=sub_seed(seed, "synth"),
        reference=ref,
        window_days=window_days,
    ).validate()
    out_dir = _out_dir(out)
    corpus = generate(cfg)
    paths = corpus.write(out_dir)
    opts = dict(n=n, n_stage2=n2, malicious=n_malicious, privacy_fraction=privacy_fraction,
                window_days=window_days, seed=seed, reference=ref)
    write_manifest(out_dir, "synth", opts, _config_inputs(ctx), list(paths.values()))
    click.echo(f"wrote {len(corpus.truth)} IPs, {len(corpus.pdns)} pdns records to {out_dir}")


def _ip_source(stage: Stage, labels, truth, cohort, ips) -> tuple[list[IPv4Address], Optional[dict], list]:
    given = [x for x in (labels, truth, ips) if x]
    if len(given) != 1:
        raise ConfigError("give exactly one of --labels, --truth, --ips")
    if labels:
        lab = _csv_labels(labels)
        return sorted(lab, key=int), lab, [labels]
    if truth:
        lab = _truth_labels(truth, stage, cohort)
        return sorted(lab, key=int), lab, [truth]
    return _read_ip_list(ips), None, [ips]


@main.command()
@stage_option
@click.option("--pdns", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--whois", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), help="CSV with ip,label columns (NA rows dropped).")
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), help="Synthetic truth file to take labels from.")
@click.option("--cohort", default=None, help="Restrict --truth to one cohort (hgt, dgt, mal).")
@click.option("--ips", type=click.Path(exists=True, dir_okay=False), help="Plain IP list; output is unlabeled.")
@click.option("--window-days", type=click.IntRange(2), default=60, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@suffixes_option
@reference_option
@strict_option
@click.pass_context
@guarded
def features(ctx, stage, pdns, whois, labels, truth, cohort, ips, window_days, out, suffixes, reference, strict):
    """Feature CSV for one stage."""
    from .featureset import feature_matrix, schema_for, write_feature_csv
    from .ingest import load_pdns, load_whois

    stage = Stage(stage)
    ref = parse_reference(reference)
    ip_list, lab, src = _ip_source(stage, labels, truth, cohort, ips)
    store = load_pdns(pdns, _suffixes(suffixes), strict)
    wstore = load_whois(whois, strict)
    rows = feature_matrix(stage, store, wstore, ip_list, ref, window_days)
    out = _out_file(out)
    ids = [format_ip(ip) for ip in ip_list]
    write_feature_csv(out, schema_for(stage), ids, rows, [lab[ip] for ip in ip_list] if lab is not None else None)
    opts = dict(stage=stage.value, cohort=cohort, window_days=window_days, reference=ref, strict=strict)
    write_manifest(Path(out).parent, "features", opts, [pdns, whois, suffixes, *src, *_config_inputs(ctx)], [out])
    click.echo(f"wrote {len(ids)} rows to {out}")


@main.command()
@click.option("--pdns", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--domain-whois", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--redirects", type=click.Path(exists=True, dir_okay=False))
@click.option("--manual", type=click.Path(exists=True, dir_okay=False), help="JSON lines with ip and label.")
@click.option("--ips", type=click.Path(exists=True, dir_okay=False), help="Hosting IPs to label [default: every IP with an apex].")
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), help="Label the hosting IPs of a synthetic truth file.")
@click.option("--cohort", default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@suffixes_option
@strict_option
@click.pass_context
@guarded
def label(ctx, pdns, domain_whois, redirects, manual, ips, truth, cohort, out, suffixes, strict):
    """Dedicated/shared labels from registrant and redirect evidence."""
    from .ingest import load_pdns
    from .labeler import label_corpus, load_domain_whois, load_manual, load_redirects, write_labels_csv

    sfx = _suffixes(suffixes)
    store = load_pdns(pdns, sfx, strict)
    if ips and truth:
        raise ConfigError("give at most one of --ips, --truth")
    if ips:
        ip_list = _read_ip_list(ips)
    elif truth:
        lab = _truth_labels(truth, Stage.HOSTING, cohort)
        ip_list = sorted((ip for ip, v in lab.items() if v == "hosting"), key=int)
    else:
        ip_list = [ip for ip in store.ips() if store.apexes(ip)]
    dw = load_domain_whois(domain_whois, sfx, strict)
    edges = load_redirects(redirects, sfx, strict) if redirects else []
    man = load_manual(manual, strict) if manual else None
    decisions, summary = label_corpus(store, ip_list, dw, edges, man)
    out = _out_file(out)
    write_labels_csv(out, decisions)
    out_dir = Path(out).parent
    summary_path = Path(str(out) + ".summary.json")
    _dump_json(summary_path, summary.to_dict())
    write_manifest(out_dir, "label", dict(cohort=cohort, strict=strict),
                   [pdns, domain_whois, redirects, manual, ips, truth, suffixes, *_config_inputs(ctx)], [out, summary_path])
    click.echo(json.dumps(summary.to_dict(), sort_keys=True))


def _forest_options(f):
    f = click.option("--trees", type=click.IntRange(1), default=100, show_default=True)(f)
    f = click.option("--mtry", type=click.IntRange(1), default=None, help="Features tried per split [default: floor(sqrt(d))].")(f)
    f = click.option("--max-depth", type=click.IntRange(1), default=None)(f)
    f = click.option("--min-leaf", type=click.IntRange(1), default=1, show_default=True)(f)
    return f


def _load_training(path, stage: Stage):
    from .featureset import read_feature_csv, schema_for

    data = read_feature_csv(path, schema_for(stage), stage)
    if data.stage is None:
        raise ConfigError(f"{path} has no label column")
    return data


@main.command()
@stage_option
@click.option("--features", "features_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@_forest_options
@seed_option
@jobs_option
@click.pass_context
@guarded
def train(ctx, stage, features_path, out, trees, mtry, max_depth, min_leaf, seed, jobs):
    """Train a random forest on a labeled feature CSV."""
    from .forest import ForestParams, model_digest, ranked_importances, save_model, train_forest

    stage = Stage(stage)
    data = _load_training(features_path, stage)
    params = ForestParams(n_trees=trees, mtry=mtry, max_depth=max_depth, min_leaf=min_leaf, seed=sub_seed(seed, "train"))
    model = train_forest(data, params, jobs=jobs)
    out = _out_file(out)
    save_model(model, out)
    report_path = Path(str(out) + ".report.json")
    _dump_json(report_path, {
        "stage": stage.value,
        "n_rows": len(data.labels),
        "class_counts": {lab: data.labels.count(lab) for lab in stage.labels},
        "oob_error": model.oob_error,
        "oob_coverage": model.oob_coverage,
        "importances": [[n, v] for n, v in ranked_importances(model)],
        "model_digest": model_digest(model),
    })
    opts = dict(stage=stage.value, trees=trees, mtry=mtry, max_depth=max_depth, min_leaf=min_leaf, seed=seed)
    write_manifest(Path(out).parent, "train", opts, [features_path, *_config_inputs(ctx)], [out, report_path])
    click.echo(f"trained {trees} trees on {len(data.labels)} rows; oob error {model.oob_error}")


@main.command(name="eval")
@stage_option
@click.option("--features", "features_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kfold", type=click.IntRange(2), default=5, show_default=True)
@click.option("--positive", default=None, help="Positive class [default: hosting / dedicated].")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_forest_options
@seed_option
@jobs_option
@click.pass_context
@guarded
def eval_cmd(ctx, stage, features_path, kfold, positive, out, trees, mtry, max_depth, min_leaf, seed, jobs):
    """Stratified k-fold evaluation: pooled report and ROC points."""
    import csv

    from .forest import ForestParams, kfold_eval

    stage = Stage(stage)
    data = _load_training(features_path, stage)
    s = sub_seed(seed, "eval")
    params = ForestParams(n_trees=trees, mtry=mtry, max_depth=max_depth, min_leaf=min_leaf, seed=s)
    res = kfold_eval(data, kfold, params, seed=s, positive=positive, jobs=jobs)
    out_dir = _out_dir(out)
    rep = res.pooled.to_dict()
    rep["stage"] = stage.value
    rep["kfold"] = kfold
    rep["folds"] = [f.to_dict() for f in res.folds]
    for f in rep["folds"]:
        f.pop("roc", None)
    rep.pop("roc", None)
    report_path = out_dir / "eval_report.json"
    roc_path = out_dir / "roc.csv"
    _dump_json(report_path, rep)
    with open(roc_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for p in res.pooled.roc:
            w.writerow([repr(p.fpr), repr(p.tpr), repr(p.threshold)])
    opts = dict(stage=stage.value, kfold=kfold, positive=positive, trees=trees, mtry=mtry, max_depth=max_depth, min_leaf=min_leaf, seed=seed)
    write_manifest(out_dir, "eval", opts, [features_path, *_config_inputs(ctx)], [report_path, roc_path])
    p = res.pooled
    click.echo(f"precision {p.precision} recall {p.recall} fpr {p.fpr} auc {p.auc}")


@main.command()
@click.option("--pdns", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--whois", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model1", required=True, type=click.Path(exists=True, dir_okay=False), help="Hosting model.")
@click.option("--model2", required=True, type=click.Path(exists=True, dir_okay=False), help="Dedicated model.")
@click.option("--ips", type=click.Path(exists=True, dir_okay=False), help="IPs to classify [default: every IP in the pdns file].")
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--threshold2", type=float, default=None, help="Stage-2 threshold [default: --threshold].")
@click.option("--window-days", type=click.IntRange(2), default=60, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Verdicts CSV.")
@suffixes_option
@reference_option
@strict_option
@click.pass_context
@guarded
def classify(ctx, pdns, whois, model1, model2, ips, threshold, threshold2, window_days, out, suffixes, reference, strict):
    """Two-stage classification with the confidence gate."""
    from .featureset import schema_for
    from .forest import load_model
    from .ingest import load_pdns, load_whois
    from .pipeline import classify_batch, write_verdicts_csv

    ref = parse_reference(reference)
    m1 = load_model(model1, schema_for(Stage.HOSTING))
    m2 = load_model(model2, schema_for(Stage.DEDICATED))
    store = load_pdns(pdns, _suffixes(suffixes), strict)
    wstore = load_whois(whois, strict)
    ip_list = _read_ip_list(ips) if ips else store.ips()
    verdicts, summary = classify_batch(store, wstore, m1, m2, ip_list, ref, threshold, threshold2, window_days)
    out = _out_file(out)
    write_verdicts_csv(out, verdicts)
    summary_path = Path(str(out) + ".summary.json")
    _dump_json(summary_path, summary.to_dict())
    opts = dict(threshold=threshold, threshold2=threshold2, window_days=window_days, reference=ref, strict=strict)
    write_manifest(Path(out).parent, "classify", opts,
                   [pdns, whois, model1, model2, ips, suffixes, *_config_inputs(ctx)], [out, summary_path])
    click.echo(json.dumps(summary.to_dict(), sort_keys=True))


@main.command()
@click.option("--pdns", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--asn", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--verdicts", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vt-feed", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--min-positives", type=click.IntRange(1), default=5, show_default=True)
@click.option("--k", type=click.IntRange(1), default=5, show_default=True, help="Ranking depth.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@suffixes_option
@strict_option
@click.pass_context
@guarded
def analyze(ctx, pdns, asn, verdicts, vt_feed, min_positives, k, out, suffixes, strict):
    """Malicious-domain report: splits, shared-IP distribution, provider rankings."""
    from .analysis import analyze as run_analysis
    from .analysis import filter_vt_feed, write_report
    from .ingest import load_asn, load_pdns
    from .pipeline import read_verdicts_csv

    sfx = _suffixes(suffixes)
    store = load_pdns(pdns, sfx, strict)
    db = load_asn(asn, strict)
    mal = filter_vt_feed(vt_feed, min_positives, sfx, strict)
    report = run_analysis(store, db, read_verdicts_csv(verdicts), mal, k)
    out_dir = _out_dir(out)
    paths = write_report(out_dir, report)
    write_manifest(out_dir, "analyze", dict(min_positives=min_positives, k=k, strict=strict),
                   [pdns, asn, verdicts, vt_feed, suffixes, *_config_inputs(ctx)], paths)
    s = report.splits.by_ip.to_dict()
    click.echo(f"{report.splits.n_ips} malicious-hosting IPs; hosting {s['pct_hosting']} shared {s['pct_shared']}")


if __name__ == "__main__":  # pragma: no cover
    main()
