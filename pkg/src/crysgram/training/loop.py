"""Pretraining and finetuning loops, evaluation, and run manifests."""

import dataclasses
import hashlib
import json
import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, ConfigError
from ..grammar import parse_formula
from ..nn.checkpoint import load_state, save_state
from ..nn.encoder import EncoderConfig, EncoderState, desk_config, paper_config
from ..objectives import (
    Batch,
    TargetScaler,
    combined_objective,
    encode_batch,
    finetune_head,
    lpp_head,
    lpp_objective,
    lpp_scaler,
    mlm_objective,
    regression_objective,
)
from ..tokens import (
    ElementEmbeddingTable,
    build_vocabulary,
    embed_formula,
    sequence_length,
    tokenize_crystal,
)
from ..datasets import dataset_checksum, split as split_records, SplitSpec
from .optimizer import AdamW
from .schedule import ScheduleSpec, lr_at

CONFIG_VERSION = 1
OBJECTIVES = ("mlm", "lpp", "mlm+lpp", "regression")


def derive_seed(*parts):
    """Stable 64-bit sub-seed from a tuple of integers/strings.

    Strings are mixed in via crc32, not hash(), so the derivation is
    identical across processes and platforms.
    """
    mixed = [zlib.crc32(p.encode("utf-8")) if isinstance(p, str) else int(p)
             for p in parts]
    return int(np.random.SeedSequence(mixed).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class TrainConfig:
    """Run configuration; every field mirrors a CLI flag."""

    objective: str = "regression"
    preset: str = "desk"
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    warmup_fraction: float = 0.05
    masking_ratio: float = 0.25
    lambda_mlm: float = 1.0
    seed: int = 0
    split: str = "ratio:0.7,0.15,0.15"
    early_stopping_patience: int = 0
    info_layout: tuple = ()
    dropout: float = None
    dtype: str = "float32"
    max_seq_len: int = 64

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.preset not in ("desk", "paper"):
            raise ConfigError("preset must be 'desk' or 'paper'")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch size >= 1")
        object.__setattr__(self, "info_layout", tuple(self.info_layout))

    def to_json(self):
        payload = dataclasses.asdict(self)
        payload["config_version"] = CONFIG_VERSION
        payload["info_layout"] = list(self.info_layout)
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        version = payload.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        payload["info_layout"] = tuple(payload.get("info_layout", ()))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        return cls(**payload)

    def encoder_config(self, vocab_size):
        overrides = {"dtype": self.dtype, "max_seq_len": self.max_seq_len}
        if self.dropout is not None:
            overrides.update(attention_dropout=self.dropout,
                             hidden_dropout=self.dropout,
                             head_dropout=self.dropout)
        maker = desk_config if self.preset == "desk" else paper_config
        return maker(vocab_size, **overrides)


@dataclass
class PreparedCorpus:
    """Records tokenized and formula-embedded once, reused every epoch."""

    ids: list
    sequences: list
    formula_matrices: np.ndarray
    lattice_targets: np.ndarray = None
    targets: np.ndarray = None

    def __len__(self):
        return len(self.sequences)

    def batch(self, indices):
        return Batch(
            sequences=[self.sequences[i] for i in indices],
            formula_matrices=self.formula_matrices[indices],
            lattice_targets=(None if self.lattice_targets is None
                             else self.lattice_targets[indices]),
            targets=None if self.targets is None else self.targets[indices],
            ids=[self.ids[i] for i in indices],
        )


def prepare_corpus(records, vocab, table):
    sequences, matrices, ids = [], [], []
    lattices, targets = [], []
    for record in records:
        comp = parse_formula(record.formula)
        sequences.append(tokenize_crystal(record.spacegroup, comp,
                                          record.informatics, vocab,
                                          provenance=record.id))
        matrices.append(embed_formula(comp, table))
        ids.append(record.id)
        lattices.append(None if record.lattice is None
                        else record.lattice.as_array())
        targets.append(record.target)
    lattice_arr = None
    if lattices and all(lat is not None for lat in lattices):
        lattice_arr = np.stack(lattices)
    target_arr = None
    if targets and all(t is not None for t in targets):
        target_arr = np.array(targets, dtype=np.float64)
    matrix_arr = np.stack(matrices) if matrices else np.zeros((0, 0, 0))
    return PreparedCorpus(ids=ids, sequences=sequences,
                          formula_matrices=matrix_arr,
                          lattice_targets=lattice_arr, targets=target_arr)


@dataclass
class RunManifest:
    """Append-only record of one run, written next to its artifacts."""

    config: dict
    seed: int
    dataset_checksum: str
    metrics: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def write_metrics(rows, path):
    """One delimiter-separated line per epoch."""
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float)
                              else str(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _epoch_batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _train_step(state, optimizer, objective_fn, lr):
    state.zero_grads()
    loss, stats = objective_fn()
    loss.backward()
    optimizer.step(lr)
    return float(loss.data), stats


@dataclass
class PretrainResult:
    state: EncoderState
    vocab: object
    scaler: TargetScaler
    metrics: list
    manifest: RunManifest
    checkpoint_path: str = None


def pretrain(records, config, vocab=None, table=None, out_dir=None,
             log=None):
    """Train under one of the pretraining objectives; returns PretrainResult.

    The vocabulary and the lattice-target scaler are fitted on the given
    corpus. Checkpoints, metrics, vocabulary, and the run manifest are
    written to ``out_dir`` when given.
    """
    if config.objective not in ("mlm", "lpp", "mlm+lpp"):
        raise ConfigError(f"pretrain cannot run objective {config.objective!r}")
    records = list(records)
    vocab = vocab or build_vocabulary(datasets=records,
                                      info_layout=config.info_layout)
    table = table or ElementEmbeddingTable.deterministic()
    corpus = prepare_corpus(records, vocab, table)
    if sequence_length(len(vocab.info_layout)) > config.max_seq_len:
        raise ConfigError("max_seq_len too small for the vocabulary layout")

    scaler = None
    if config.objective in ("lpp", "mlm+lpp"):
        if corpus.lattice_targets is None:
            raise ConfigError(
                f"objective {config.objective!r} needs lattice parameters "
                "on every record")
        scaler = lpp_scaler(corpus.lattice_targets)

    state = EncoderState(config.encoder_config(vocab.size), seed=config.seed)
    optimizer = AdamW(state, config.learning_rate, config.weight_decay)
    steps_per_epoch = max(1, math.ceil(len(corpus) / config.batch_size))
    total_steps = max(1, config.epochs * steps_per_epoch)
    schedule = ScheduleSpec(total_steps=total_steps,
                            base_rate=config.learning_rate,
                            warmup_fraction=config.warmup_fraction)

    start = time.perf_counter()
    metrics = []
    global_step = 0
    for epoch in range(config.epochs):
        rng_epoch = np.random.default_rng(
            np.random.PCG64(derive_seed(config.seed, "shuffle", epoch)))
        epoch_losses, epoch_stats = [], []
        for batch_idx, indices in enumerate(
                _epoch_batches(len(corpus), config.batch_size, rng_epoch)):
            batch = corpus.batch(indices)
            mask_seed = derive_seed(config.seed, "mask", global_step)
            drop_rng = np.random.default_rng(
                np.random.PCG64(derive_seed(config.seed, "drop", global_step)))
            lr = lr_at(global_step, schedule)

            if config.objective == "mlm":
                fn = lambda: mlm_objective(state, batch, config.masking_ratio,
                                           seed=mask_seed, rng=drop_rng)
            elif config.objective == "lpp":
                fn = lambda: lpp_objective(state, batch, scaler, rng=drop_rng)
            else:
                fn = lambda: combined_objective(
                    state, batch, scaler, ratio=config.masking_ratio,
                    lam=config.lambda_mlm, seed=mask_seed, rng=drop_rng)
            loss, stats = _train_step(state, optimizer, fn, lr)
            epoch_losses.append(loss)
            epoch_stats.append(stats)
            global_step += 1
        row = {"epoch": epoch, "loss": float(np.mean(epoch_losses))}
        for key in epoch_stats[0]:
            if key != "n_masked":
                row[key] = float(np.mean([s[key] for s in epoch_stats]))
        metrics.append(row)
        if log:
            log(f"epoch {epoch}: " + " ".join(
                f"{k}={v:.6g}" for k, v in row.items() if k != "epoch"))

    manifest = RunManifest(
        config=json.loads(config.to_json()),
        seed=config.seed,
        dataset_checksum=dataset_checksum(records),
        metrics=metrics,
        wall_clock_seconds=time.perf_counter() - start,
    )
    result = PretrainResult(state=state, vocab=vocab, scaler=scaler,
                            metrics=metrics, manifest=manifest)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        extra = {"objective": config.objective,
                 "info_layout": list(vocab.info_layout)}
        if scaler is not None:
            extra["lpp_scaler"] = scaler.to_dict()
        vocab.save(out / "vocab.txt")
        extra["vocab_sha256"] = hashlib.sha256(
            vocab.to_text().encode("utf-8")).hexdigest()
        save_state(state, out / "checkpoint.ckpt", global_step=global_step,
                   rng_seed=config.seed, extra=extra)
        result.checkpoint_path = str(out / "checkpoint.ckpt")
        manifest.checkpoints.append(result.checkpoint_path)
        write_metrics(metrics, out / "metrics.csv")
        manifest.save(out / "manifest.json")
    return result


def evaluate(state, corpus, scaler, batch_size=64):
    """Eval-mode MAE in natural units plus per-record predictions."""
    if len(corpus) == 0:
        raise ConfigError("cannot evaluate an empty split")
    if scaler is None:
        raise ConfigError("evaluation requires the fitted target scaler")
    predictions = []
    for start in range(0, len(corpus), batch_size):
        indices = np.arange(start, min(start + batch_size, len(corpus)))
        batch = corpus.batch(indices)
        _, cls, _ = encode_batch(state, batch.sequences,
                                 batch.formula_matrices, mode="eval")
        pred_std = finetune_head(cls, state, mode="eval").data.reshape(-1)
        pred_nat = scaler.inverse(pred_std.astype(np.float64))
        for j, record_id in enumerate(batch.ids):
            target = None if batch.targets is None else float(batch.targets[j])
            predictions.append((record_id, target, float(pred_nat[j])))
    targets = [t for _, t, _ in predictions if t is not None]
    mae = None
    if len(targets) == len(predictions) and targets:
        mae = float(np.mean([abs(t - p) for _, t, p in predictions]))
    return mae, predictions


def predict_lattice(state, corpus, scaler, batch_size=64):
    """Natural-unit (n, 6) lattice predictions for a prepared corpus."""
    rows = []
    for start in range(0, len(corpus), batch_size):
        indices = np.arange(start, min(start + batch_size, len(corpus)))
        batch = corpus.batch(indices)
        _, cls, _ = encode_batch(state, batch.sequences,
                                 batch.formula_matrices, mode="eval")
        pred_std = lpp_head(cls, state, mode="eval").data
        rows.append(scaler.inverse(pred_std.astype(np.float64)))
    return np.concatenate(rows, axis=0)


@dataclass
class FoldResult:
    fold: int
    test_mae: float
    predictions: list


@dataclass
class FinetuneResult:
    state: EncoderState
    vocab: object
    scaler: TargetScaler
    metrics: list
    manifest: RunManifest
    test_mae: float = None
    predictions: list = field(default_factory=list)
    fold_results: list = field(default_factory=list)

    @property
    def fold_maes(self):
        return [fr.test_mae for fr in self.fold_results]

    @property
    def fold_summary(self):
        maes = self.fold_maes
        if not maes:
            return None
        return float(np.mean(maes)), float(np.std(maes))


def _train_regression(train_corpus, val_corpus, config, init_state, scaler,
                      log=None):
    """Inner finetuning loop; returns (state, per-epoch metric rows)."""
    state = init_state.clone()
    optimizer = AdamW(state, config.learning_rate, config.weight_decay)
    steps_per_epoch = max(1, math.ceil(len(train_corpus) / config.batch_size))
    total_steps = max(1, config.epochs * steps_per_epoch)
    schedule = ScheduleSpec(total_steps=total_steps,
                            base_rate=config.learning_rate,
                            warmup_fraction=config.warmup_fraction)
    metrics = []
    best = (None, math.inf, -1)  # (state, val mae, epoch)
    global_step = 0
    for epoch in range(config.epochs):
        rng_epoch = np.random.default_rng(
            np.random.PCG64(derive_seed(config.seed, "ft-shuffle", epoch)))
        losses = []
        for indices in _epoch_batches(len(train_corpus), config.batch_size,
                                      rng_epoch):
            batch = train_corpus.batch(indices)
            drop_rng = np.random.default_rng(np.random.PCG64(
                derive_seed(config.seed, "ft-drop", global_step)))
            fn = lambda: regression_objective(state, batch, scaler,
                                              rng=drop_rng)
            loss, _ = _train_step(state, optimizer, fn,
                                  lr_at(global_step, schedule))
            losses.append(loss)
            global_step += 1
        row = {"epoch": epoch, "loss": float(np.mean(losses))}
        if val_corpus is not None and len(val_corpus):
            val_mae, _ = evaluate(state, val_corpus, scaler)
            row["val_mae"] = val_mae
            if val_mae < best[1]:
                best = (state.clone(), val_mae, epoch)
            elif (config.early_stopping_patience
                  and epoch - best[2] >= config.early_stopping_patience):
                metrics.append(row)
                if log:
                    log(f"early stop at epoch {epoch} (best {best[1]:.6g})")
                return best[0], metrics
        metrics.append(row)
        if log:
            log(f"epoch {epoch}: " + " ".join(
                f"{k}={v:.6g}" for k, v in row.items() if k != "epoch"))
    if config.early_stopping_patience and best[0] is not None:
        return best[0], metrics
    return state, metrics


def finetune(records, config, init_state=None, vocab=None, table=None,
             out_dir=None, log=None):
    """Property-regression finetuning under the configured split protocol.

    ``init_state`` carries pretrained weights; None trains from scratch.
    k-fold splits return per-fold MAEs plus mean and standard deviation.
    """
    if config.objective != "regression":
        raise ConfigError("finetune runs the 'regression' objective")
    records = list(records)
    if any(r.target is None for r in records):
        raise ConfigError("finetuning requires a target on every record")
    vocab = vocab or build_vocabulary(datasets=records,
                                      info_layout=config.info_layout)
    table = table or ElementEmbeddingTable.deterministic()
    spec = SplitSpec.parse(config.split, seed=config.seed)

    encoder_cfg = config.encoder_config(vocab.size)
    if init_state is None:
        init_state = EncoderState(encoder_cfg, seed=config.seed)
    elif init_state.config.vocab_size != vocab.size:
        raise ConfigError(
            f"checkpoint vocab size {init_state.config.vocab_size} != "
            f"vocabulary size {vocab.size}")

    start = time.perf_counter()
    result = FinetuneResult(state=None, vocab=vocab, scaler=None,
                            metrics=[], manifest=None)

    if spec.kind == "kfold":
        parts = split_records(records, spec)
        for fold_idx, (train_recs, test_recs) in enumerate(parts.folds):
            scaler = TargetScaler.fit([r.target for r in train_recs])
            train_corpus = prepare_corpus(train_recs, vocab, table)
            test_corpus = prepare_corpus(test_recs, vocab, table)
            state, metrics = _train_regression(
                train_corpus, None, config, init_state, scaler, log=log)
            mae, predictions = evaluate(state, test_corpus, scaler)
            result.fold_results.append(FoldResult(fold_idx, mae, predictions))
            result.metrics.append({"fold": fold_idx, "test_mae": mae})
            if log:
                log(f"fold {fold_idx}: test MAE {mae:.6g}")
        result.state = init_state
        result.test_mae = result.fold_summary[0]
    else:
        parts = split_records(records, spec)
        train_recs, val_recs, test_recs = parts.train, parts.val, parts.test
        scaler = TargetScaler.fit([r.target for r in train_recs])
        result.scaler = scaler
        train_corpus = prepare_corpus(train_recs, vocab, table)
        val_corpus = prepare_corpus(val_recs, vocab, table) if val_recs else None
        test_corpus = prepare_corpus(test_recs, vocab, table)
        state, metrics = _train_regression(train_corpus, val_corpus, config,
                                           init_state, scaler, log=log)
        result.state = state
        result.metrics = metrics
        result.test_mae, result.predictions = evaluate(state, test_corpus,
                                                       scaler)

    manifest = RunManifest(
        config=json.loads(config.to_json()),
        seed=config.seed,
        dataset_checksum=dataset_checksum(records),
        metrics=result.metrics,
        wall_clock_seconds=time.perf_counter() - start,
    )
    result.manifest = manifest

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        extra = {"objective": "regression",
                 "info_layout": list(vocab.info_layout),
                 "vocab_sha256": hashlib.sha256(
                     vocab.to_text().encode("utf-8")).hexdigest()}
        if result.scaler is not None:
            extra["target_scaler"] = result.scaler.to_dict()
        vocab.save(out / "vocab.txt")
        if result.state is not None:
            save_state(result.state, out / "checkpoint.ckpt",
                       rng_seed=config.seed, extra=extra)
            result.manifest.checkpoints.append(str(out / "checkpoint.ckpt"))
        write_metrics(
            [m for m in result.metrics], out / "metrics.csv")
        if result.predictions:
            write_predictions(result.predictions, out / "predictions.csv")
        manifest.save(out / "manifest.json")
    return result


def write_predictions(predictions, path):
    lines = ["id,target,prediction"]
    for record_id, target, pred in predictions:
        target_text = "" if target is None else repr(float(target))
        lines.append(f"{record_id},{target_text},{repr(float(pred))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pretrained(path, vocab=None):
    """Load a checkpoint; verifies vocabulary compatibility when given."""
    state, header = load_state(path)
    extra = header.get("extra", {})
    if vocab is not None:
        if state.config.vocab_size != vocab.size:
            raise CheckpointError(
                f"checkpoint expects vocabulary of {state.config.vocab_size} "
                f"tokens, got {vocab.size}")
        stored = extra.get("vocab_sha256")
        if stored:
            actual = hashlib.sha256(vocab.to_text().encode("utf-8")).hexdigest()
            if stored != actual:
                raise CheckpointError(
                    "checkpoint was trained with a different vocabulary "
                    f"(sha {stored[:12]}... != {actual[:12]}...)")
    return state, header
