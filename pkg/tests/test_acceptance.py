"""Acceptance suite: one criterion per test, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
print. Every tolerance is pinned in the assertions below; the expected
values come from independent oracles (direct arithmetic, brute-force
boolean evaluation, central finite differences) or from the committed
golden pipeline outputs.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from factlogic.backends import QUESTION_GENERATION_PROMPT, MockBackend, question_hash
from factlogic.intervention import generate_candidates, token_cosine_similarity
from factlogic.model import (
    _layer_pass,
    forward_batch,
    init_model,
    loss_and_gradients,
    load_model,
    predict_indices,
    save_model,
    set_gate,
)
from factlogic.rules import PruneConfig, extract_rules, intervene_weight, prune
from factlogic.training import TrainConfig, train
from factlogic.truth import truth_from_logits, truth_from_samples

from _synth import (
    GROUP_SIZES,
    LABELS,
    PREDICATE_IDS,
    all_sign_patterns,
    atoms_from_predicates,
    flip_fraction,
    majority_vote_predicates,
    planted_redundant,
    planted_two_term,
    redundant_dataset,
    two_term_dataset,
)

REPO = Path(__file__).resolve().parents[1]
GOLDEN = REPO / "tests" / "golden"
DATA = REPO / "tests" / "data"


def report(number, description, check):
    started = time.perf_counter()
    try:
        check()
    except Exception:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    print(f"[PASS] criterion {number}: {description} ({time.perf_counter() - started:.1f}s)")


# --- criterion 1: truth valuation ---------------------------------------------

def test_criterion_1_truth_valuation():
    def check():
        started = time.perf_counter()
        rng = np.random.default_rng(1)

        # tagged examples, 1e-12
        assert abs(truth_from_logits(2.5, 2.5) - 0.0) < 1e-12
        assert abs(truth_from_logits(math.log(3.0), 0.0) - 0.5) < 1e-12
        assert abs(truth_from_logits(1000.0, 0.0) - 1.0) < 1e-12
        assert abs(truth_from_samples(7, 3) - 0.4) < 1e-12
        assert truth_from_samples(0, 0) == 0.0
        assert truth_from_samples(5, 5) == 0.0

        # 10,000 random score pairs up to +-1e4: range, antisymmetry,
        # overflow safety, monotonicity
        scores = rng.uniform(-1e4, 1e4, size=(10_000, 2))
        for v_yes, v_no in scores:
            value = truth_from_logits(v_yes, v_no)
            assert math.isfinite(value) and -1.0 <= value <= 1.0
            assert abs(value + truth_from_logits(v_no, v_yes)) < 1e-12
        for _ in range(10_000):
            v_no = rng.uniform(-50, 50)
            low = rng.uniform(-30, 30)
            high = low + rng.uniform(1e-6, 10.0)
            a, b = truth_from_logits(low, v_no), truth_from_logits(high, v_no)
            assert b >= a
            if abs(low - v_no) < 20 and abs(high - v_no) < 20:
                assert b > a

        # count-based: symmetry/range over random counts
        counts = rng.integers(0, 1000, size=(10_000, 2))
        for m_yes, m_no in counts:
            value = truth_from_samples(int(m_yes), int(m_no))
            assert -1.0 <= value <= 1.0
            assert abs(value + truth_from_samples(int(m_no), int(m_yes))) < 1e-12

        assert time.perf_counter() - started < 5.0

    report(1, "truth valuation properties and tagged examples", check)


# --- criterion 2: gradient correctness ----------------------------------------

def test_criterion_2_gradient_correctness():
    def check():
        started = time.perf_counter()
        rng = np.random.default_rng(2)
        step = 1e-5
        # the exclusion zone must dominate the finite-difference step, or the
        # perturbed evaluations can cross the |.|/max kinks being excluded
        kink_margin = 1e-3

        def smooth(model, X):
            from factlogic.model import group_index

            conj_terms = X[:, None, :] * model.conj_weights[:, group_index(model.group_sizes)][None, :, :]
            conj, _, _ = forward_batch(model, X)
            disj_terms = conj[:, None, :] * model.disj_weights[None, :, :]
            for terms in (conj_terms, disj_terms):
                magnitudes = np.abs(terms)
                if magnitudes.min() < kink_margin:
                    return False
                top_two = np.sort(magnitudes, axis=-1)[..., -2:]
                if np.any(top_two[..., 1] - top_two[..., 0] < kink_margin):
                    return False
            return True

        def batch_loss(model, X, y):
            _, _, z = forward_batch(model, X)
            return float(-np.mean(np.log(z[np.arange(len(y)), y])))

        checked = 0
        worst = 0.0
        while checked < 100:
            model = init_model(LABELS, PREDICATE_IDS, GROUP_SIZES, conjunctions=4,
                               seed=int(rng.integers(0, 2**31)))
            model.conj_weights = rng.uniform(-1.2, 1.2, size=model.conj_weights.shape)
            model.disj_weights = rng.uniform(-1.2, 1.2, size=model.disj_weights.shape)
            set_gate(model, float(rng.uniform(0, 1)))
            X = rng.uniform(-1, 1, size=(1, sum(GROUP_SIZES)))
            y = rng.integers(0, 2, size=1)
            if not smooth(model, X):
                continue
            _, analytic_conj, analytic_disj = loss_and_gradients(model, X, y)
            for weights, analytic in (
                (model.conj_weights, analytic_conj),
                (model.disj_weights, analytic_disj),
            ):
                for idx in np.ndindex(weights.shape):
                    keep = weights[idx]
                    weights[idx] = keep + step
                    upper = batch_loss(model, X, y)
                    weights[idx] = keep - step
                    lower = batch_loss(model, X, y)
                    weights[idx] = keep
                    numeric = (upper - lower) / (2 * step)
                    # the scale floor keeps the metric meaningful where the
                    # true gradient vanishes (saturated tanh): below it the
                    # central difference is pure roundoff, so agreement is
                    # asserted absolutely at 1e-8
                    scale = max(abs(numeric), abs(analytic[idx]), 1e-4)
                    worst = max(worst, abs(numeric - analytic[idx]) / scale)
            checked += 1
        assert worst < 1e-4, f"worst relative error {worst}"
        assert time.perf_counter() - started < 30.0

    report(2, "analytic gradients match central finite differences", check)


# --- criterion 3: symbolic fidelity -------------------------------------------

def test_criterion_3_symbolic_fidelity():
    def check():
        started = time.perf_counter()
        for n in range(1, 11):
            inputs = np.array(
                [[1.0 if (k >> b) & 1 else -1.0 for b in range(n)] for k in range(2**n)],
                dtype=np.float32,
            )  # (B, n); float32 keeps the sweep in budget, signs stay exact
            total_patterns = 3**n
            chunk = 4096
            for chunk_start in range(0, total_patterns, chunk):
                indices = np.arange(chunk_start, min(chunk_start + chunk, total_patterns))
                digits = (indices[:, None] // 3 ** np.arange(n)[None, :]) % 3
                weights = (digits - 1).astype(np.float32)  # (K, n) in {-1, 0, 1}
                conj_out, _ = _layer_pass(weights, inputs, +1.0, "max", 1e-4)
                disj_out, _ = _layer_pass(weights, inputs, -1.0, "max", 1e-4)

                # independent boolean oracle: count satisfied and falsified
                # literals per (assignment, pattern) in integer arithmetic
                terms = inputs.astype(np.int8)[:, None, :] * (digits - 1).astype(np.int8)[None, :, :]
                active = (digits != 1).astype(bool)[None, :, :]
                true_literals = ((terms > 0) & active).sum(axis=2, dtype=np.int16)
                false_literals = ((terms < 0) & active).sum(axis=2, dtype=np.int16)
                arity = active.sum(axis=2, dtype=np.int16)
                conj_expected = np.where(
                    arity == 0, 0, np.where(false_literals == 0, 1, -1)
                )
                disj_expected = np.where(
                    arity == 0, 0, np.where(true_literals > 0, 1, -1)
                )
                np.testing.assert_array_equal(np.sign(conj_out), conj_expected)
                np.testing.assert_array_equal(np.sign(disj_out), disj_expected)
        assert time.perf_counter() - started < 60.0

    report(3, "sign of gated layers matches boolean evaluation exhaustively", check)


# --- criterion 4: planted-rule recovery ----------------------------------------

@pytest.fixture(scope="module")
def planted_run():
    rng = np.random.default_rng(7)
    X_train, y_train = two_term_dataset(2000, rng)
    X_val, y_val = two_term_dataset(300, rng)
    X_test, y_test = two_term_dataset(500, rng)
    config = TrainConfig(
        learning_rate=1e-3, epochs=30, batch_size=64, conjunctions=10,
        weight_decay=1e-4, anneal_epochs=15, seed=0,
    )
    model, training_report = train(
        X_train, y_train, X_val, y_val, LABELS, PREDICATE_IDS, GROUP_SIZES, config
    )
    return model, X_val, y_val, X_test, y_test, training_report


def test_criterion_4_planted_rule_recovery(planted_run):
    def check():
        started = time.perf_counter()
        model, X_val, y_val, X_test, y_test, _ = planted_run
        accuracy = float(np.mean(predict_indices(model, X_test) == y_test))
        assert accuracy >= 0.99, f"test accuracy {accuracy}"

        pruned, ruleset, _ = prune(model, X_val, y_val, PruneConfig(epsilon=0.005, weight_threshold=1e-4))
        assert not ruleset.is_empty()
        # exhaustive equivalence: the pruned rule evaluator agrees with the
        # planted rule on every one of the 2^8 sign assignments
        patterns = all_sign_patterns()
        X_all = np.array([atoms_from_predicates(p) for p in patterns])
        y_all = np.array([1 if planted_two_term(p) else 0 for p in patterns])
        np.testing.assert_array_equal(predict_indices(pruned, X_all), y_all)
        assert time.perf_counter() - started < 300.0

    report(4, "planted two-term rule recovered at >= 0.99 test accuracy", check)


# --- criterion 5: noise tolerance ----------------------------------------------

def test_criterion_5_noise_tolerance():
    def check():
        started = time.perf_counter()
        rng = np.random.default_rng(11)
        X_train, y_train = redundant_dataset(2000, rng)
        X_val, y_val = redundant_dataset(300, rng)
        X_test, y_test = redundant_dataset(500, rng)
        model, _ = train(
            X_train, y_train, X_val, y_val, LABELS, PREDICATE_IDS, GROUP_SIZES,
            TrainConfig(conjunctions=10, weight_decay=1e-4, seed=0),
        )
        clean = float(np.mean(predict_indices(model, X_test) == y_test))
        X_noisy = flip_fraction(X_test, 0.10, np.random.default_rng(99))
        noisy = float(np.mean(predict_indices(model, X_noisy) == y_test))
        drop = clean - noisy
        assert drop < 0.15, f"accuracy dropped {drop:.3f}"

        # brute-force noisy oracle: majority-vote predicates, planted rule
        oracle = np.array(
            [1 if planted_redundant(majority_vote_predicates(row)) else 0 for row in X_noisy]
        )
        oracle_drop = clean - float(np.mean(oracle == y_test))
        assert oracle_drop < 0.15
        # the learned aggregation should not trail the hard-voting oracle badly
        assert drop <= oracle_drop + 0.05
        assert time.perf_counter() - started < 120.0

    report(5, "10% atom flips degrade accuracy by < 15 points", check)


# --- criterion 6: pruning contract ----------------------------------------------

def test_criterion_6_pruning_contract(planted_run):
    def check():
        model, X_val, y_val, _, _, _ = planted_run
        before = float(np.mean(predict_indices(model, X_val) == y_val))
        pruned, ruleset, steps = prune(model, X_val, y_val, PruneConfig(epsilon=0.005))
        after = float(np.mean(predict_indices(pruned, X_val) == y_val))
        assert after >= before - steps * 0.005

        repruned, ruleset_again, steps_again = prune(pruned, X_val, y_val, PruneConfig(epsilon=0.005))
        assert steps_again == 0
        assert ruleset_again == ruleset
        np.testing.assert_array_equal(repruned.conj_weights, pruned.conj_weights)
        np.testing.assert_array_equal(repruned.disj_weights, pruned.disj_weights)

    report(6, "pruning terminates, holds the accuracy budget, and is idempotent", check)


# --- criterion 7: intervention contract ------------------------------------------

def test_criterion_7_intervention_contract(planted_run, tmp_path):
    def check():
        model = planted_run[0].copy()
        ruleset = extract_rules(model, 1e-4)
        # pick a live literal to remove
        conj_index, literals = next(
            (c, ls) for c, ls in sorted(ruleset.conjunctions.items()) if len(ls) >= 2
        )
        target = literals[0]
        predicate_position = model.predicate_ids.index(target.ref)

        old = intervene_weight(model, "conj", conj_index, predicate_position, 0.0)
        after = extract_rules(model, 1e-4)
        assert after.conjunctions.get(conj_index, []) == literals[1:]
        unchanged = {c: ls for c, ls in ruleset.conjunctions.items() if c != conj_index}
        assert {c: ls for c, ls in after.conjunctions.items() if c != conj_index} == unchanged
        assert after.label_clauses == ruleset.label_clauses

        # bit-exact round trip through set/restore and through the file format
        intervene_weight(model, "conj", conj_index, predicate_position, old)
        original, restored = tmp_path / "a.json", tmp_path / "b.json"
        save_model(planted_run[0], original)
        save_model(model, restored)
        assert original.read_bytes() == restored.read_bytes()
        assert extract_rules(model, 1e-4) == ruleset

        reloaded = load_model(original)
        roundtrip = tmp_path / "c.json"
        save_model(reloaded, roundtrip)
        assert roundtrip.read_bytes() == original.read_bytes()

    report(7, "single-weight edits change exactly one literal and round-trip", check)


# --- criterion 8: pipeline determinism -------------------------------------------

def test_criterion_8_pipeline_determinism(tmp_path):
    def check():
        started = time.perf_counter()

        def run_pipeline(base):
            def cli(*args):
                result = subprocess.run(
                    [sys.executable, "-m", "factlogic.cli", *map(str, args)],
                    capture_output=True, text=True, cwd=REPO,
                )
                assert result.returncode == 0, result.stderr
                return result.stdout

            outputs = {}
            outputs["atoms_stdout.txt"] = cli(
                "atoms", "--dataset", DATA / "pipeline_news.jsonl",
                "--backend", "mock", "--fixture", DATA / "pipeline_fixture.jsonl",
                "--cache", base / "cache.jsonl", "--seed", 7, "--out", base / "atoms",
            )
            outputs["train_stdout.txt"] = cli(
                "train", "--vectors", base / "atoms", "--seed", 7, "--out", base / "train",
            )
            outputs["eval_stdout.txt"] = cli(
                "eval", "--vectors", base / "atoms",
                "--checkpoint", base / "train" / "checkpoint.json", "--split", "test",
            )
            outputs["rules_stdout.txt"] = cli(
                "rules", "--checkpoint", base / "train" / "checkpoint.json",
                "--out", base / "rules" / "rules.txt",
            )
            return outputs

        artifact_names = (
            "atoms/vectors_train.jsonl",
            "atoms/vectors_validation.jsonl",
            "atoms/vectors_test.jsonl",
            "atoms/atoms_meta.json",
            "cache.jsonl",
            "train/checkpoint.json",
            "train/train_report.json",
            "rules/rules.txt",
        )
        for run_number in (1, 2):
            base = tmp_path / f"run{run_number}"
            stdout_map = run_pipeline(base)
            for name in artifact_names:
                produced = (base / name).read_bytes()
                golden = (GOLDEN / name).read_bytes()
                assert produced == golden, f"run {run_number}: {name} differs from golden"
            for name, text in stdout_map.items():
                assert text == (GOLDEN / name).read_text(encoding="utf-8"), (
                    f"run {run_number}: {name} differs from golden"
                )
        assert time.perf_counter() - started < 300.0

    report(8, "CLI pipeline reproduces committed goldens byte-for-byte, twice", check)


# --- criterion 9: template generation loop ---------------------------------------

def test_criterion_9_generation_loop(tmp_path):
    def check():
        started = time.perf_counter()
        existing = ["is the statement true", "is the message true"]
        reply = (
            "<s>is the statement true</s>"
            "<s>does the report cite sources</s>"
            "<s>any photos or videos attached</s>"
        )
        fixture = tmp_path / "fixture.jsonl"
        fixture.write_text(
            json.dumps(
                {
                    "question_hash": question_hash(QUESTION_GENERATION_PROMPT),
                    "answer": {"text": reply},
                }
            )
            + "\n",
            encoding="utf-8",
        )
        backend = MockBackend(fixture)

        # hand-computed similarity table (token-count cosine):
        #   candidate                      vs "is the statement true"  vs "is the message true"
        #   is the statement true          1.0                         3/4
        #   does the report cite sources   1/(2*sqrt(5))               1/(2*sqrt(5))
        #   any photos or videos attached  0                           0
        report_sim = 1 / (2 * math.sqrt(5))
        assert token_cosine_similarity("is the statement true", existing[1]) == pytest.approx(0.75)
        assert token_cosine_similarity("does the report cite sources", existing[0]) == pytest.approx(report_sim)
        assert token_cosine_similarity("any photos or videos attached", existing[0]) == 0.0

        candidates = generate_candidates(backend, existing, iterations=2)
        # iteration 1 adds the mean-0.0 candidate; iteration 2 re-scores
        # against the grown set and adds the report question at mean
        # (report_sim + report_sim + 0)/3
        assert [c.text for c in candidates] == [
            "any photos or videos attached",
            "does the report cite sources",
        ]
        assert [c.iteration for c in candidates] == [1, 2]
        assert candidates[0].mean_similarity == pytest.approx(0.0, abs=1e-12)
        assert candidates[1].mean_similarity == pytest.approx(2 * report_sim / 3, abs=1e-12)
        # returned set is exactly running \ existing, all pending review
        assert all(c.status == "pending" for c in candidates)
        assert {c.text for c in candidates} & set(existing) == set()
        assert time.perf_counter() - started < 5.0

    report(9, "generation loop adds one lowest-similarity candidate per iteration", check)
