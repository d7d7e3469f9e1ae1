use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relscore::ingest::{parse_kb, Vocabulary};
use relscore::kg_model::{init_embeddings, TrainConfig};
use relscore_cli::checkpoint::Checkpoint;
use tempfile::TempDir;

fn relscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = relscore(args);
    assert!(
        out.status.success(),
        "relscore {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a failing command and returns its single stderr line.
fn fails(args: &[&str]) -> String {
    let out = relscore(args);
    assert!(
        !out.status.success(),
        "relscore {args:?} unexpectedly succeeded"
    );
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 1, "expected one diagnostic line, got {err:?}");
    assert!(lines[0].starts_with("error: "));
    lines[0].to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const KB: &str =
    "alice\tchemist\nalice\tpoet\nbob\tpoet\ncarol\tchemist\ncarol\tpainter\ncarol\tpoet\n";

fn small_train(dir: &Path, extra: &[&str]) -> PathBuf {
    let kb = write(dir, "profession.kb", KB);
    let model = dir.join("model.bin");
    let mut args = vec![
        "train",
        "--kb",
        s(&kb),
        "--out",
        s(&model),
        "--dim",
        "4",
        "--rel-dim",
        "3",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    model
}

#[test]
fn train_is_deterministic_and_zero_epochs_is_init() {
    let dir = TempDir::new().unwrap();
    let model = small_train(dir.path(), &["--epochs", "20", "--seed", "42"]);
    let first = fs::read(&model).unwrap();
    small_train(dir.path(), &["--epochs", "20", "--seed", "42"]);
    assert_eq!(fs::read(&model).unwrap(), first);

    small_train(dir.path(), &["--epochs", "0", "--seed", "9"]);
    let loaded = Checkpoint::load(&model).unwrap();
    let mut vocab = Vocabulary::new();
    parse_kb(KB.as_bytes(), "profession", &mut vocab).unwrap();
    let cfg = TrainConfig {
        entity_dim: 4,
        relation_dim: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let init = Checkpoint::new(vocab.clone(), init_embeddings(&vocab, &cfg).unwrap()).unwrap();
    let expected = dir.path().join("init.bin");
    init.save(&expected).unwrap();
    assert_eq!(fs::read(&model).unwrap(), fs::read(&expected).unwrap());
    assert_eq!(loaded.vocab, vocab);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let model = small_train(dir.path(), &["--epochs", "5"]);
    let again = dir.path().join("again.bin");
    Checkpoint::load(&model).unwrap().save(&again).unwrap();
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn margin_grid_writes_one_checkpoint_per_margin() {
    let dir = TempDir::new().unwrap();
    small_train(dir.path(), &["--epochs", "2", "--margin-grid"]);
    for m in ["0.2", "0.5", "1", "2"] {
        assert!(
            dir.path().join(format!("model.margin-{m}.bin")).exists(),
            "margin {m}"
        );
    }
}

#[test]
fn explicit_relation_and_extra_triples() {
    let dir = TempDir::new().unwrap();
    let kb = write(dir.path(), "jobs.tsv", KB);
    let extra = write(
        dir.path(),
        "extra.tsv",
        "alice\tlives_in\tparis\nbob\tlives_in\tparis\n",
    );
    let model = dir.path().join("m.bin");
    let spec = format!("profession={}", s(&kb));
    ok(&[
        "train",
        "--kb",
        &spec,
        "--extra",
        s(&extra),
        "--out",
        s(&model),
        "--epochs",
        "3",
        "--dim",
        "4",
    ]);
    let c = Checkpoint::load(&model).unwrap();
    assert_eq!(
        c.vocab.relations(),
        &["profession".to_owned(), "lives_in".to_owned()]
    );
    assert!(c.vocab.entity_id("paris").is_some());
}

#[test]
fn config_supplies_training_options() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "profession.kb", KB);
    let conf = write(
        dir.path(),
        "run.conf",
        "kb.profession = profession.kb\ndim = 3\nrel_dim = 2\nepochs = 1\n",
    );
    let model = dir.path().join("m.bin");
    ok(&[
        "train",
        "--config",
        s(&conf),
        "--out",
        s(&model),
        "--rel-dim",
        "5",
    ]);
    let c = Checkpoint::load(&model).unwrap();
    assert_eq!((c.store.entity_dim(), c.store.relation_dim()), (3, 5));
}

#[test]
fn missing_kb_is_named() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.kb");
    let err = fails(&[
        "train",
        "--kb",
        s(&missing),
        "--out",
        s(&dir.path().join("m.bin")),
    ]);
    assert!(err.contains("nope.kb"), "{err}");
}

#[test]
fn rank_rows_follow_kb() {
    let dir = TempDir::new().unwrap();
    let model = small_train(dir.path(), &["--epochs", "5"]);
    let kb = dir.path().join("profession.kb");
    let ranks = dir.path().join("ranks.tsv");
    ok(&[
        "rank",
        "--model",
        s(&model),
        "--kb",
        s(&kb),
        "--out",
        s(&ranks),
    ]);
    let text = fs::read_to_string(&ranks).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), KB.lines().count());
    for (row, kb_line) in rows.iter().zip(KB.lines()) {
        let (h, t) = kb_line.split_once('\t').unwrap();
        assert_eq!((row[0], row[1], row[2]), (h, "profession", t));
    }
    let bob: Vec<_> = rows.iter().filter(|r| r[0] == "bob").collect();
    assert_eq!(bob.len(), 1);
    assert_eq!(bob[0][3], "1");
    let mut carol: Vec<&str> = rows
        .iter()
        .filter(|r| r[0] == "carol")
        .map(|r| r[3])
        .collect();
    carol.sort();
    assert_eq!(carol, vec!["1", "2", "3"]);

    let again = dir.path().join("again.tsv");
    ok(&[
        "rank",
        "--model",
        s(&model),
        "--kb",
        s(&kb),
        "--out",
        s(&again),
    ]);
    assert_eq!(fs::read(&again).unwrap(), fs::read(&ranks).unwrap());
}

#[test]
fn rank_rejects_unknown_names() {
    let dir = TempDir::new().unwrap();
    let model = small_train(dir.path(), &["--epochs", "1"]);
    let kb = write(dir.path(), "profession2.kb", "alice\tsculptor\n");
    let spec = format!("profession={}", s(&kb));
    let err = fails(&[
        "rank",
        "--model",
        s(&model),
        "--kb",
        &spec,
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert!(err.contains("sculptor"), "{err}");
    let spec = format!("nationality={}", s(&kb));
    let err = fails(&[
        "rank",
        "--model",
        s(&model),
        "--kb",
        &spec,
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert!(err.contains("nationality"), "{err}");
}

const RANKS: &str =
    "e\tprofession\tp1\t1\ne\tprofession\tp2\t2\ne\tprofession\tp3\t3\nf\tprofession\tp2\t1\n";

#[test]
fn adjust_profession_hand_case() {
    let dir = TempDir::new().unwrap();
    let ranks = write(dir.path(), "r.tsv", RANKS);
    // cos = 1 - 2 SD: p2 sits at SD 0.1 from p1, p3 at SD 0.9
    let vectors = write(
        dir.path(),
        "v.txt",
        "3 2\np1 1 0\np2 0.8 0.6\np3 -0.8 0.6\n",
    );
    let out = dir.path().join("adj.tsv");
    ok(&[
        "adjust",
        "--ranks",
        s(&ranks),
        "--vectors",
        s(&vectors),
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let got: Vec<&str> = text
        .lines()
        .map(|l| l.rsplit('\t').next().unwrap())
        .collect();
    assert_eq!(got, vec!["1", "1", "4", "1"]);
}

#[test]
fn adjust_with_empty_inputs_is_identity() {
    let dir = TempDir::new().unwrap();
    let ranks = write(dir.path(), "r.tsv", RANKS);
    let empty = write(dir.path(), "empty", "");
    let out = dir.path().join("adj.tsv");
    ok(&[
        "adjust",
        "--ranks",
        s(&ranks),
        "--vectors",
        s(&empty),
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), RANKS);

    let nat = write(
        dir.path(),
        "n.tsv",
        &RANKS.replace("profession", "nationality"),
    );
    let demonyms = write(dir.path(), "d.tsv", "p1\tpish\n");
    ok(&[
        "adjust",
        "--ranks",
        s(&nat),
        "--sentences",
        s(&empty),
        "--demonyms",
        s(&demonyms),
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&nat).unwrap());
}

#[test]
fn adjust_nationality_counts() {
    let dir = TempDir::new().unwrap();
    let nat = write(
        dir.path(),
        "n.tsv",
        "e\tnationality\tFrance\t1\ne\tnationality\tNew Zealand\t2\n",
    );
    let demonyms = write(dir.path(), "d.tsv", "New Zealand\tKiwi\nFrance\tFrench\n");
    let sentences = write(
        dir.path(),
        "s.tsv",
        "e\tA Kiwi singer.\ne\tThe kiwi tour went well.\ne\tShe sang with a French band in New_Zealand.\n",
    );
    let out = dir.path().join("adj.tsv");
    ok(&[
        "adjust",
        "--ranks",
        s(&nat),
        "--sentences",
        s(&sentences),
        "--demonyms",
        s(&demonyms),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "e\tnationality\tFrance\t2\ne\tnationality\tNew Zealand\t1\n"
    );
    ok(&[
        "adjust",
        "--ranks",
        s(&nat),
        "--sentences",
        s(&sentences),
        "--demonyms",
        s(&demonyms),
        "--min-count",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&nat).unwrap());
}

#[test]
fn adjust_rejects_wrong_inputs() {
    let dir = TempDir::new().unwrap();
    let ranks = write(dir.path(), "r.tsv", RANKS);
    let empty = write(dir.path(), "empty", "");
    let out = dir.path().join("adj.tsv");
    let err = fails(&["adjust", "--ranks", s(&ranks), "--out", s(&out)]);
    assert!(err.contains("vectors"), "{err}");
    let err = fails(&[
        "adjust",
        "--ranks",
        s(&ranks),
        "--vectors",
        s(&empty),
        "--sentences",
        s(&empty),
        "--out",
        s(&out),
    ]);
    assert!(err.contains("nationality"), "{err}");
    let err = fails(&[
        "adjust",
        "--ranks",
        s(&ranks),
        "--relation",
        "nationality",
        "--sentences",
        s(&empty),
        "--out",
        s(&out),
    ]);
    assert!(err.contains("demonyms"), "{err}");
}

#[test]
fn score_maps_ranks() {
    let dir = TempDir::new().unwrap();
    let ranks = write(
        dir.path(),
        "r.tsv",
        "e\tprofession\ta\t1\ne\tprofession\tb\t2\ne\tprofession\tc\t3\ne\tprofession\td\t3\n",
    );
    let out = dir.path().join("s.tsv");
    ok(&["score", "--ranks", s(&ranks), "--out", s(&out)]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "e\ta\t5\ne\tb\t3\ne\tc\t2\ne\td\t2\n"
    );
    ok(&[
        "score",
        "--ranks",
        s(&ranks),
        "--score-map",
        "1:7,2:0",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "e\ta\t7\ne\tb\t0\ne\tc\t0\ne\td\t0\n"
    );

    let empty = write(dir.path(), "empty", "");
    ok(&["score", "--ranks", s(&empty), "--out", s(&out)]);
    assert!(fs::read(&out).unwrap().is_empty());

    let bad = write(
        dir.path(),
        "bad.tsv",
        "e\tprofession\ta\t1\ne\tprofession\tb\tsecond\n",
    );
    let err = fails(&["score", "--ranks", s(&bad), "--out", s(&out)]);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn evaluate_reports() {
    let dir = TempDir::new().unwrap();
    let truth = write(
        dir.path(),
        "profession.train",
        "e\ta\t7\ne\tb\t0\ne\tc\t2\n",
    );
    let pred = write(dir.path(), "pred.tsv", "e\ta\t5\ne\tb\t3\ne\tc\t2\n");
    let report = ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth)]);
    assert!(report.contains("asd=1.666667\n"), "{report}");
    assert!(report.contains("accuracy=0.666667\n"), "{report}");
    assert!(report.contains("n_triples=3\n"));

    let same = ok(&["evaluate", "--pred", s(&truth), "--truth", s(&truth)]);
    assert!(same.contains("accuracy=1.000000"));
    assert!(same.contains("asd=0.000000"));

    let partial = write(dir.path(), "partial.tsv", "e\ta\t5\n");
    let err = fails(&["evaluate", "--pred", s(&partial), "--truth", s(&truth)]);
    assert!(err.contains("(e, profession, b)"), "{err}");
}

#[test]
fn pipeline_names_failing_stage() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "profession.kb", KB);
    let conf = write(
        dir.path(),
        "run.conf",
        "kb.profession = profession.kb\nout_dir = out\nepochs = 2\ndim = 4\n",
    );
    let err = fails(&["pipeline", "--config", s(&conf)]);
    assert!(err.contains("stage adjust (profession)"), "{err}");
    assert!(err.contains("vectors"), "{err}");
    assert!(dir.path().join("out/profession.ranks.tsv").exists());

    let conf = write(
        dir.path(),
        "bad.conf",
        "kb.profession = missing.kb\nout_dir = out\n",
    );
    let err = fails(&["pipeline", "--config", s(&conf)]);
    assert!(
        err.contains("stage train") && err.contains("missing.kb"),
        "{err}"
    );
}

#[test]
fn synth_pipeline_emits_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let fx = dir.path().join("fx");
    let conf = ok(&[
        "synth",
        "--out",
        s(&fx),
        "--entities",
        "20",
        "--tails",
        "5",
        "--clusters",
        "2",
        "--epochs",
        "3",
    ]);
    let conf = PathBuf::from(conf.trim());
    let out = ok(&["pipeline", "--config", s(&conf)]);
    for rel in ["profession", "nationality"] {
        for suffix in ["ranks.tsv", "adjusted.tsv", "scores.tsv", "report.txt"] {
            assert!(
                fx.join(format!("out/{rel}.{suffix}")).exists(),
                "{rel}.{suffix}"
            );
        }
        assert!(out.contains(&format!("[{rel}]")));
    }
    assert!(fx.join("out/model.bin").exists());
}
