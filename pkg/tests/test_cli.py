"""Exercises every subcommand through main(): files, exit codes, determinism."""

import pytest

from headingrank.cli import main
from headingrank.corpus import derive_qrels, load_corpus, write_corpus
from headingrank.envgen import read_candidates
from headingrank.evaluation import read_run

from conftest import corpus_from_pages, page, section

TOPICS = ("history", "climate", "economy", "wildlife", "culture", "geology")


def make_corpus_file(tmp_path, n_pages=6, name="corpus.jsonl"):
    pages = []
    for pi in range(n_pages):
        secs = []
        for si in range(2):
            topic = TOPICS[(pi + si) % len(TOPICS)]
            paras = [
                (f"p{pi}s{si}n{ni}",
                 f"{topic} survey {('alpha', 'beta')[ni]} zone {pi}")
                for ni in range(2)
            ]
            secs.append(section(topic.title(), paras))
        pages.append(page(f"pg{pi}", f"Region {pi}", secs))
    corpus = corpus_from_pages(pages)
    path = tmp_path / name
    write_corpus(corpus, str(path))
    return path


@pytest.fixture
def corpus_path(tmp_path):
    return make_corpus_file(tmp_path)


def run_cli(*argv):
    return main([str(a) for a in argv])


# --- argparse surface ---------------------------------------------------

def test_no_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli()
    assert exc.value.code == 2


def test_unknown_flag_is_a_usage_error(corpus_path, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli("index", "--corpus", corpus_path, "--out",
                tmp_path / "ix.json", "--frobnicate")
    assert exc.value.code == 2


# --- index ----------------------------------------------------------------

def test_index_builds_and_rebuilds_identically(corpus_path, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli("index", "--corpus", corpus_path, "--out", a) == 0
    assert "indexed 24 paragraphs" in capsys.readouterr().out
    assert run_cli("index", "--corpus", corpus_path, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_index_missing_corpus_exits_2(tmp_path, capsys):
    code = run_cli("index", "--corpus", tmp_path / "absent.jsonl",
                   "--out", tmp_path / "ix.json")
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_index_malformed_corpus_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"pageId": "x"}\n', encoding="utf-8")
    assert run_cli("index", "--corpus", bad, "--out", tmp_path / "ix.json") == 2


# --- env -------------------------------------------------------------------

def test_env_train_writes_candidates_and_qrels(corpus_path, tmp_path, capsys):
    cand = tmp_path / "train.tsv"
    qrels = tmp_path / "qrels.txt"
    code = run_cli("env", "--corpus", corpus_path, "--mode", "train",
                   "--out", cand, "--qrels-out", qrels)
    assert code == 0
    assert "wrote train environment" in capsys.readouterr().out
    sets = read_candidates(str(cand))
    positives = derive_qrels(load_corpus(str(corpus_path))).positives
    for qid, cs in sets.items():
        assert set(positives[qid]) <= set(cs.paragraph_ids)
        assert set(cs.provenance.values()) <= {"true-section", "same-article",
                                               "other-article"}
    assert qrels.exists()


def test_env_test_doubles_article_size(corpus_path, tmp_path):
    cand = tmp_path / "test.tsv"
    assert run_cli("env", "--corpus", corpus_path, "--mode", "test",
                   "--out", cand, "--seed", "7") == 0
    sets = read_candidates(str(cand))
    assert len(sets) == 12  # two headings per page
    for cs in sets.values():
        assert len(cs.paragraph_ids) == 8  # 4 on-page + 4 foreign


def test_env_is_seed_sensitive(corpus_path, tmp_path):
    a, b, c = (tmp_path / n for n in ("a.tsv", "b.tsv", "c.tsv"))
    run_cli("env", "--corpus", corpus_path, "--mode", "test", "--out", a,
            "--seed", "1")
    run_cli("env", "--corpus", corpus_path, "--mode", "test", "--out", b,
            "--seed", "1")
    run_cli("env", "--corpus", corpus_path, "--mode", "test", "--out", c,
            "--seed", "2")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


# --- run ----------------------------------------------------------------------

def test_run_full_collection(corpus_path, tmp_path, capsys):
    out = tmp_path / "run.txt"
    assert run_cli("run", "--corpus", corpus_path, "--out", out) == 0
    assert "wrote run 'bm25+none'" in capsys.readouterr().out
    run = read_run(str(out))
    assert run.name == "bm25+none"
    assert run.rankings


def test_run_same_config_twice_is_byte_identical(corpus_path, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    args = ("run", "--corpus", corpus_path, "--method", "tfidf-cs",
            "--expansion", "rm1", "--seed", "3")
    assert run_cli(*args, "--out", a) == 0
    assert run_cli(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_restricted_to_candidates(corpus_path, tmp_path):
    cand = tmp_path / "cand.tsv"
    run_cli("env", "--corpus", corpus_path, "--mode", "test", "--out", cand)
    out = tmp_path / "run.txt"
    assert run_cli("run", "--corpus", corpus_path, "--candidates", cand,
                   "--out", out) == 0
    sets = read_candidates(str(cand))
    run = read_run(str(out))
    for qid, ranking in run.rankings.items():
        assert set(ranking.paragraph_ids()) == set(sets[qid].paragraph_ids)


def test_run_rejects_candidates_outside_corpus(corpus_path, tmp_path, capsys):
    cand = tmp_path / "cand.tsv"
    cand.write_text("pg0/History\tghost\tretrieved\n", encoding="utf-8")
    assert run_cli("run", "--corpus", corpus_path, "--candidates", cand,
                   "--out", tmp_path / "r.txt") == 2
    assert "not in the index" in capsys.readouterr().err


def test_run_rejects_foreign_candidate_query(corpus_path, tmp_path, capsys):
    cand = tmp_path / "cand.tsv"
    cand.write_text("who/Knows\tp0s0n0\tretrieved\n", encoding="utf-8")
    assert run_cli("run", "--corpus", corpus_path, "--candidates", cand,
                   "--out", tmp_path / "r.txt") == 2
    assert "does not belong" in capsys.readouterr().err


def test_run_invalid_combination_exits_2(corpus_path, tmp_path, capsys):
    code = run_cli("run", "--corpus", corpus_path, "--method", "bm25",
                   "--expansion", "rocchio", "--out", tmp_path / "r.txt")
    assert code == 2
    assert "cannot be applied" in capsys.readouterr().err


def test_run_dense_method_needs_embeddings_flag(corpus_path, tmp_path, capsys):
    code = run_cli("run", "--corpus", corpus_path, "--method", "glove-cs",
                   "--out", tmp_path / "r.txt")
    assert code == 2
    assert "--embeddings" in capsys.readouterr().err


def test_run_with_rocchio_over_saved_index(corpus_path, tmp_path):
    ix = tmp_path / "ix.json"
    run_cli("index", "--corpus", corpus_path, "--out", ix)
    out = tmp_path / "run.txt"
    assert run_cli("run", "--corpus", corpus_path, "--index", ix,
                   "--method", "tfidf-cs", "--expansion", "rocchio",
                   "--ltr-folds", "2", "--out", out) == 0
    assert read_run(str(out)).rankings


# --- eval / compare --------------------------------------------------------

@pytest.fixture
def run_and_qrels(corpus_path, tmp_path):
    run = tmp_path / "run.txt"
    qrels = tmp_path / "qrels.txt"
    run_cli("run", "--corpus", corpus_path, "--out", run)
    run_cli("env", "--corpus", corpus_path, "--mode", "test",
            "--out", tmp_path / "ignored.tsv", "--qrels-out", qrels)
    return run, qrels


def test_eval_prints_and_writes_metrics(run_and_qrels, tmp_path, capsys):
    run, qrels = run_and_qrels
    out = tmp_path / "metrics.txt"
    assert run_cli("eval", "--run", run, "--qrels", qrels, "--out", out,
                   "--per-query") == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("MAP\t")
    assert "query\tpg0/Climate\t" in stdout
    assert out.read_text(encoding="utf-8") == stdout


def test_eval_malformed_run_exits_2(run_and_qrels, tmp_path, capsys):
    _, qrels = run_and_qrels
    bad = tmp_path / "bad-run.txt"
    bad.write_text("just one field\n", encoding="utf-8")
    assert run_cli("eval", "--run", bad, "--qrels", qrels) == 2


def test_compare_reports_significance_fields(corpus_path, run_and_qrels,
                                             tmp_path, capsys):
    run_a, qrels = run_and_qrels
    run_b = tmp_path / "run-b.txt"
    run_cli("run", "--corpus", corpus_path, "--method", "tfidf-cs",
            "--out", run_b)
    capsys.readouterr()  # drop the run command's own status line
    out = tmp_path / "cmp.txt"
    assert run_cli("compare", "--run-a", run_a, "--run-b", run_b,
                   "--qrels", qrels, "--out", out) == 0
    text = capsys.readouterr().out
    for key in ("map-a\t", "map-b\t", "mean-diff\t", "t-statistic\t",
                "p-value\t", "a-significantly-worse\t"):
        assert key in text
    assert out.read_text(encoding="utf-8") == text


def test_compare_run_against_itself_is_never_significant(run_and_qrels, capsys):
    run, qrels = run_and_qrels
    assert run_cli("compare", "--run-a", run, "--run-b", run,
                   "--qrels", qrels) == 0
    text = capsys.readouterr().out
    assert "p-value\t1\n" in text
    assert "a-significantly-worse\tno" in text
    assert "a-significantly-better\tno" in text


# --- pipeline -----------------------------------------------------------------

PIPELINE_ARGS = ("--ltr-folds", "3", "--restarts", "2", "--iterations", "8",
                 "--candidate-k", "20")


def test_pipeline_produces_all_artifacts(corpus_path, tmp_path, capsys):
    out_dir = tmp_path / "exp"
    assert run_cli("pipeline", "--corpus", corpus_path, "--out-dir", out_dir,
                   *PIPELINE_ARGS) == 0
    for name in ("qrels.txt", "candidates.tsv", "run-bm25.txt",
                 "run-tfidf-cs.txt", "metrics-bm25.txt",
                 "metrics-tfidf-cs.txt", "run-fused.txt",
                 "metrics-fused.txt", "folds.txt", "significance.txt",
                 "model-fold0.txt"):
        assert (out_dir / name).exists(), name
    stdout = capsys.readouterr().out
    assert "fused\tMAP" in stdout
    folds = (out_dir / "folds.txt").read_text(encoding="utf-8").splitlines()
    assert folds[0] == "fold\ttrain-queries\ttest-queries\ttrain-map\tweights"
    assert len(folds) == 4
    sig = (out_dir / "significance.txt").read_text(encoding="utf-8")
    assert sig.splitlines()[0].startswith("baseline\t")
    assert len(sig.splitlines()) == 3  # header + the two scorers


def test_pipeline_fused_run_covers_every_query(corpus_path, tmp_path):
    out_dir = tmp_path / "exp"
    run_cli("pipeline", "--corpus", corpus_path, "--out-dir", out_dir,
            *PIPELINE_ARGS)
    fused = read_run(str(out_dir / "run-fused.txt"))
    corpus = load_corpus(str(corpus_path))
    assert len(fused.rankings) == 12
    assert set(fused.rankings) == set(derive_qrels(corpus).positives)


def test_pipeline_same_seed_is_byte_identical(corpus_path, tmp_path):
    dirs = (tmp_path / "one", tmp_path / "two")
    for d in dirs:
        assert run_cli("pipeline", "--corpus", corpus_path, "--out-dir", d,
                       "--seed", "11", *PIPELINE_ARGS) == 0
    for name in ("run-fused.txt", "metrics-fused.txt", "folds.txt",
                 "significance.txt", "candidates.tsv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_pipeline_ablation_writes_extra_run(corpus_path, tmp_path, capsys):
    out_dir = tmp_path / "exp"
    assert run_cli("pipeline", "--corpus", corpus_path, "--out-dir", out_dir,
                   "--without", "bm25", *PIPELINE_ARGS) == 0
    assert (out_dir / "run-fused-wo-bm25.txt").exists()
    assert (out_dir / "metrics-fused-wo-bm25.txt").exists()
    assert "fused-wo-bm25\tMAP" in capsys.readouterr().out


def test_pipeline_unknown_ablation_target_exits_2(corpus_path, tmp_path, capsys):
    assert run_cli("pipeline", "--corpus", corpus_path,
                   "--out-dir", tmp_path / "exp", "--without", "ghost",
                   *PIPELINE_ARGS) == 2
    assert "--without" in capsys.readouterr().err


def test_pipeline_external_feature_joins_fusion(corpus_path, tmp_path):
    ext = tmp_path / "external.txt"
    run_cli("run", "--corpus", corpus_path, "--method", "tfidf-cs",
            "--expansion", "rm1", "--run-name", "prior-scores", "--out", ext)
    out_dir = tmp_path / "exp"
    assert run_cli("pipeline", "--corpus", corpus_path, "--out-dir", out_dir,
                   "--external-scores", ext, *PIPELINE_ARGS) == 0
    folds = (out_dir / "folds.txt").read_text(encoding="utf-8").splitlines()
    # three features now: bm25, tfidf-cs, prior-scores
    assert all(len(line.split("\t")[4].split()) == 3 for line in folds[1:])


def test_pipeline_external_name_collision_exits_2(corpus_path, tmp_path, capsys):
    ext = tmp_path / "external.txt"
    run_cli("run", "--corpus", corpus_path, "--run-name", "bm25", "--out", ext)
    assert run_cli("pipeline", "--corpus", corpus_path,
                   "--out-dir", tmp_path / "exp", "--external-scores", ext,
                   *PIPELINE_ARGS) == 2
    assert "collides" in capsys.readouterr().err


def test_pipeline_duplicate_scorer_exits_2(corpus_path, tmp_path, capsys):
    assert run_cli("pipeline", "--corpus", corpus_path,
                   "--out-dir", tmp_path / "exp",
                   "--scorers", "bm25,bm25", *PIPELINE_ARGS) == 2
    assert "duplicate scorer" in capsys.readouterr().err
