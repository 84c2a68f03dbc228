"""Acceptance suite: one test per shipped guarantee, one printed verdict each.

The eight checks cover metric-oracle agreement, gradient correctness,
training-phase parameter ownership and critic cadence, mixture sampling
statistics, small-corpus memorization, multimodal sampling at toy scale,
pipeline and schedule fidelity, and end-to-end determinism.
"""
import json
import math
import sys
import time

import numpy as np
import torch

from latdial import cli
from latdial.config import TrainConfig
from latdial.corpus import (
    EOS_ID,
    _parse_delimiter_line,
    batch_exchanges,
    build_vocabulary,
    collate_exchanges,
    make_exchanges,
)
from latdial.metrics import (
    MetricsReport,
    bow_similarity,
    distinct,
    smoothed_sentence_bleu,
    strip_special,
)
from latdial.model import DialogModel
from latdial.trainer import Trainer, ae_learning_rate

from bleu_reference import reference_sentence_bleu
from checks import (
    CHI2_99,
    gumbel_argmax_chi_square,
    gumbel_entropy_at,
    moment_gap_in_se,
    penalty_gradnorm_errors,
    reparam_gradient_errors,
    single_component_mixture_pair,
)
import conftest
from conftest import (
    build_small_setup,
    classify_template,
    overfit_corpus_lines,
    template_corpus_lines,
    write_lines,
)
from oracles import (
    bleu_case_pairs,
    bow_cases,
    distinct_cases,
    oracle_bow,
    oracle_distinct,
)


def announce(line):
    sys.stdout.write(line + "\n")
    # capture swallows the direct write; the conftest summary hook replays
    # every recorded line after the test session ends
    conftest.ACCEPTANCE_LINES.append(line)


def verdict(number, label, ok, detail):
    announce(f"[acceptance] {number} {label}: {'PASS' if ok else 'FAIL'}  ({detail})")
    assert ok, f"acceptance check {number} ({label}) failed: {detail}"


# --------------------------------------------------------------- criterion 1
def test_criterion_1_metric_oracle_equivalence():
    t0 = time.time()
    bleu_err = max(
        abs(smoothed_sentence_bleu(hyp, ref) - reference_sentence_bleu(hyp, ref))
        for hyp, ref in bleu_case_pairs(200)
    )
    distinct_exact = sum(
        distinct(case) == oracle_distinct(case) for case in distinct_cases(50)
    )
    bow_err = 0.0
    for hyp, ref, table in bow_cases(50):
        ours = bow_similarity(hyp, ref, np.asarray(table, dtype=np.float64))
        want = oracle_bow(hyp, ref, table)
        bow_err = max(bow_err, max(abs(a - b) for a, b in zip(ours, want)))
    ok = bleu_err < 1e-9 and distinct_exact == 50 and bow_err < 1e-9
    verdict(
        1,
        "metric oracle equivalence",
        ok,
        f"bleu max|diff| {bleu_err:.1e}, distinct exact {distinct_exact}/50, "
        f"bow max|diff| {bow_err:.1e}, {time.time() - t0:.1f}s",
    )


# --------------------------------------------------------------- criterion 2
def test_criterion_2_gradient_checks():
    t0 = time.time()
    reparam_err = reparam_gradient_errors(n_instances=20)
    critic_input_err = penalty_gradnorm_errors(n_instances=20)
    ok = reparam_err < 1e-4 and critic_input_err < 1e-4
    verdict(
        2,
        "finite-difference gradient checks",
        ok,
        f"reparameterized-noise rel err {reparam_err:.1e}, "
        f"penalty-norm input rel err {critic_input_err:.1e}, {time.time() - t0:.1f}s",
    )


# --------------------------------------------------------------- criterion 3
def _component_changes(model, action):
    before = {n: p.detach().clone() for n, p in model.named_parameters()}
    action()
    return {
        name.split(".", 1)[0]
        for name, param in model.named_parameters()
        if not torch.equal(param.detach(), before[name])
    }


def test_criterion_3_phase_ownership_and_cadence(tmp_path):
    t0 = time.time()
    model, _, _, batch, cfg = build_small_setup(seed=3)
    trainer = Trainer(model, cfg, str(tmp_path / "own"))
    moved = {
        "generator": _component_changes(model, lambda: trainer.gan_generator_step(batch)),
        "critic": _component_changes(model, lambda: trainer.gan_critic_step(batch)),
        "ae": _component_changes(model, lambda: trainer.ae_step(batch)),
    }
    expected = {
        "generator": {"recognition", "prior", "posterior_generator", "prior_generator"},
        "critic": {"critic"},
        "ae": {"embedding", "utterance_encoder", "context_encoder",
               "recognition", "posterior_generator", "decoder"},
    }
    ownership_ok = moved == expected

    model2, _, exchanges2, _, cfg2 = build_small_setup(seed=4, batch_size=2)
    trainer2 = Trainer(model2, cfg2, str(tmp_path / "cadence"))
    order = []
    for tag, attr in (("g", "gan_generator_step"),
                      ("c", "gan_critic_step"),
                      ("a", "ae_step")):
        original = getattr(trainer2, attr)

        def wrapped(batch, _original=original, _tag=tag):
            order.append(_tag)
            return _original(batch)

        setattr(trainer2, attr, wrapped)
    trainer2.train_epoch(1, exchanges2)
    n_batches = math.ceil(len(exchanges2) / cfg2.batch_size)
    cadence_ok = (
        "".join(order) == ("g" + "c" * cfg2.n_critic + "a") * n_batches
        and trainer2.critic_steps == cfg2.n_critic * trainer2.generator_steps
    )
    ok = ownership_ok and cadence_ok
    verdict(
        3,
        "phase parameter ownership and critic cadence",
        ok,
        f"ownership {'exact' if ownership_ok else moved}, "
        f"{cfg2.n_critic} critic steps per generator step over {n_batches} batches "
        f"{'held' if cadence_ok else ''.join(order)}, {time.time() - t0:.1f}s",
    )


# --------------------------------------------------------------- criterion 4
def test_criterion_4_mixture_sampling_statistics():
    t0 = time.time()
    logits = torch.tensor([0.7, -0.4, 1.2])
    stat, dof = gumbel_argmax_chi_square(logits, tau=0.1, n_draws=10_000)
    chi_ok = stat < CHI2_99[dof]

    gauss, mix = single_component_mixture_pair()
    mean_gap, var_gap = moment_gap_in_se(gauss, mix)
    moments_ok = mean_gap < 3.0 and var_gap < 3.0

    entropies = [gumbel_entropy_at(tau, logits) for tau in (0.5, 0.1, 0.02)]
    entropy_ok = entropies[0] > entropies[1] > entropies[2]
    ok = chi_ok and moments_ok and entropy_ok
    verdict(
        4,
        "mixture sampling statistics",
        ok,
        f"chi2 {stat:.2f} < {CHI2_99[dof]} (dof {dof}), "
        f"single-component moment gaps {mean_gap:.2f}/{var_gap:.2f} se, "
        f"weight entropy {entropies[0]:.3f} > {entropies[1]:.3f} > {entropies[2]:.3f}, "
        f"{time.time() - t0:.1f}s",
    )


# --------------------------------------------------------------- criterion 5
def test_criterion_5_small_corpus_memorization(tmp_path):
    t0 = time.time()
    dialogues = [_parse_delimiter_line(line) for line in overfit_corpus_lines(20)]
    vocab = build_vocabulary(dialogues, 200)
    exchanges = make_exchanges(dialogues, vocab, 10, 40)
    cfg = TrainConfig(embed_dim=32, utt_hidden=24, ctx_hidden=20, dec_hidden=48,
                      latent_dim=16, noise_dim=16, prior_hidden=16, gen_hidden=16,
                      critic_hidden=32, vocab_limit=200, batch_size=20, seed=1)
    # pretrained-scale word vectors; the default tiny-uniform table leaves the
    # encoders too quiet to move this fast
    matrix = np.random.default_rng(0).normal(
        0.0, 1.0, (len(vocab), cfg.embed_dim)
    ).astype(np.float32)
    model = DialogModel(len(vocab), cfg, embedding_matrix=matrix)
    trainer = Trainer(model, cfg, str(tmp_path))
    batch = collate_exchanges(exchanges)

    initial = trainer.validation_loss(exchanges)
    for _ in range(500):
        trainer.ae_step(batch)
    final = trainer.validation_loss(exchanges)
    ratio = final / initial

    decoded = model.reconstruct(batch)
    exact = sum(
        out == strip_special(ex.response.tokens, EOS_ID)
        for out, ex in zip(decoded, exchanges)
    )
    ok = ratio < 0.10 and exact >= 18
    verdict(
        5,
        "small-corpus memorization",
        ok,
        f"loss {initial:.2f} -> {final:.4f} (ratio {ratio:.4f}, need < 0.10), "
        f"exact reconstructions {exact}/20 (need >= 18), {time.time() - t0:.0f}s",
    )


# --------------------------------------------------------------- criterion 6
def _template_setup():
    train_lines, test_lines = template_corpus_lines(10, 1)
    train_d = [_parse_delimiter_line(line) for line in train_lines]
    test_d = [_parse_delimiter_line(line) for line in test_lines]
    vocab = build_vocabulary(train_d, 100)
    train_ex = make_exchanges(train_d, vocab, 10, 40)
    test_ex = make_exchanges(test_d, vocab, 10, 40)
    return vocab, train_ex, collate_exchanges(test_ex)


def _train_template_model(out_dir, vocab, train_ex, point_mass_throughout):
    """Two-phase schedule: a deterministic-latent warm-up lets the
    reconstruction signal reach the recognition stack, then sampling noise is
    switched back on (unless the model is the point-mass ablation) and the
    full alternating adversarial/autoencoding loop takes over."""
    cfg = TrainConfig(vocab_limit=100, batch_size=90, max_epochs=1,
                      patience=100000, val_max_contexts=4, lr_decay_every=100000,
                      feed_latent_per_step=True, seed=1,
                      prior="mixture", mixture_k=3, n_samples=10,
                      point_mass_latent=True,
                      gan_lr_generator=2e-3, gan_lr_critic=4e-4)
    matrix = np.random.default_rng(0).normal(
        0.0, 1.0, (len(vocab), cfg.embed_dim)
    ).astype(np.float32)
    model = DialogModel(len(vocab), cfg, embedding_matrix=matrix)
    trainer = Trainer(model, cfg, str(out_dir))
    step, sweep = 0, 0
    while step < 7000:
        sweep += 1
        for batch in batch_exchanges(train_ex, cfg.batch_size, shuffle_seed=sweep):
            trainer.ae_step(batch)
            step += 1
    if not point_mass_throughout:
        cfg.point_mass_latent = False
    for epoch in range(1, 101):
        trainer._set_ae_lr(epoch)
        trainer.train_epoch(epoch, train_ex)
    return model


def _mean_inter_d1(model, test_batch):
    samples, _ = model.sample_responses(
        test_batch, 10, torch.Generator().manual_seed(99)
    )
    rows = [[strip_special(s, EOS_ID) for s in row] for row in samples]
    return sum(distinct(row)[2] for row in rows) / len(rows)


def test_criterion_6_multimodal_sampling(tmp_path):
    t0 = time.time()
    vocab, train_ex, test_batch = _template_setup()
    mixture = _train_template_model(
        tmp_path / "mixture", vocab, train_ex, point_mass_throughout=False
    )
    ablation = _train_template_model(
        tmp_path / "ablation", vocab, train_ex, point_mass_throughout=True
    )
    d1_mixture = _mean_inter_d1(mixture, test_batch)
    d1_ablation = _mean_inter_d1(ablation, test_batch)
    ratio = d1_mixture / max(d1_ablation, 1e-9)

    spread = 0
    for row in mixture.component_decodes(test_batch):
        kinds = {classify_template(strip_special(d, EOS_ID), vocab) for d in row}
        kinds.discard(None)
        spread += len(kinds) >= 2
    minutes = (time.time() - t0) / 60
    ok = ratio >= 1.5 and spread >= 6 and minutes <= 30.0
    verdict(
        6,
        "multimodal sampling at toy scale",
        ok,
        f"inter-d1 {d1_mixture:.3f} vs point-mass {d1_ablation:.3f} "
        f"(ratio {ratio:.2f}, need >= 1.5), "
        f"contexts with >= 2 component templates {spread}/10 (need >= 6), "
        f"{minutes:.1f} min (budget 30)",
    )


# --------------------------------------------------------------- criterion 7
def _write_run_config(tmp_path, file_name, out_name, **train_overrides):
    data = tmp_path / "corpus"
    data.mkdir(exist_ok=True)
    train_lines, test_lines = template_corpus_lines(4, 1)
    write_lines(data / "train.txt", train_lines)
    write_lines(data / "valid.txt", test_lines)
    write_lines(data / "test.txt", test_lines)
    payload = {
        "train_path": str(data / "train.txt"),
        "valid_path": str(data / "valid.txt"),
        "test_path": str(data / "test.txt"),
        "output_dir": str(tmp_path / out_name),
        "embed_dim": 16, "utt_hidden": 12, "ctx_hidden": 10, "dec_hidden": 14,
        "latent_dim": 8, "noise_dim": 8, "prior_hidden": 9, "gen_hidden": 9,
        "critic_hidden": 11, "vocab_limit": 100, "batch_size": 8,
        "max_epochs": 1, "patience": 5, "n_samples": 3, "val_max_contexts": 2,
        "seed": 5,
    }
    payload.update(train_overrides)
    path = tmp_path / file_name
    path.write_text(json.dumps(payload, indent=2))
    return path


def test_criterion_7_pipeline_and_schedule(tmp_path):
    t0 = time.time()
    cfg_path = _write_run_config(tmp_path, "sweep.json", "sweep-run")
    prepared = cli.main(["prepare", "--config", str(cfg_path)])
    swept = cli.main(["sweep-k", "--config", str(cfg_path), "--k", "1,3,5"])
    complete = 0
    for k in (1, 3, 5):
        report_path = tmp_path / "sweep-run" / "sweep-k" / f"k-{k}" / "report.json"
        if not report_path.exists():
            continue
        payload = json.loads(report_path.read_text())
        if set(payload) == set(MetricsReport.FIELDS) and all(
            math.isfinite(float(v)) for v in payload.values()
        ):
            complete += 1

    lr10 = ae_learning_rate(TrainConfig(), 10)
    lr20 = ae_learning_rate(TrainConfig(), 20)
    schedule_ok = lr10 == 0.6 and lr20 == 0.36
    ok = prepared == 0 and swept == 0 and complete == 3 and schedule_ok
    verdict(
        7,
        "sweep pipeline and schedule fidelity",
        ok,
        f"complete reports {complete}/3 (exit codes {prepared},{swept}), "
        f"decayed lr at epochs 10/20 = {lr10!r}/{lr20!r} "
        f"(exact match {schedule_ok}), {time.time() - t0:.0f}s",
    )


# --------------------------------------------------------------- criterion 8
def test_criterion_8_end_to_end_determinism(tmp_path):
    t0 = time.time()
    reports = []
    codes = []
    for run in ("one", "two"):
        cfg_path = _write_run_config(
            tmp_path, f"det-{run}.json", f"det-{run}", max_epochs=2
        )
        codes.append(cli.main(["prepare", "--config", str(cfg_path)]))
        codes.append(cli.main(["train", "--config", str(cfg_path)]))
        codes.append(cli.main(["evaluate", "--config", str(cfg_path)]))
        report = tmp_path / f"det-{run}" / "eval" / "report.json"
        reports.append(report.read_bytes() if report.exists() else run.encode())
    identical = reports[0] == reports[1]
    ok = identical and all(code == 0 for code in codes)
    verdict(
        8,
        "end-to-end determinism",
        ok,
        f"two prepare/train/evaluate runs, report bytes "
        f"{'identical' if identical else 'DIFFER'} ({len(reports[0])} bytes), "
        f"exit codes {codes}, {time.time() - t0:.0f}s",
    )
