use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use dsm_core::model::load_model;
use dsm_core::pitch::estimate_pitch;
use dsm_core::signal::SpeechSignal;
use dsm_core::wav::{read_wav, write_wav};
use dsm_testkit::{corpus, Speaker};

fn dsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsm")).args(args).output().expect("spawn dsm")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(o: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&o.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_owned))
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{text}"))
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: PathBuf,
    model: PathBuf,
}

fn write_corpus(dir: &Path, count: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, u) in corpus(Speaker::male(), count, 2.0, seed).into_iter().enumerate() {
        let sig = SpeechSignal::new(u.samples, u.sample_rate).unwrap();
        write_wav(&sig, dir.join(format!("utt{i:02}.wav"))).unwrap();
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = root.join("corpus");
        write_corpus(&corpus, 6, 11);
        let model = root.join("model.dsm");
        let o = dsm(&["train", s(&corpus), s(&model), "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        Fixture {
            _dir: dir,
            root,
            corpus,
            model,
        }
    })
}

#[test]
fn train_report_and_model() {
    let f = fixture();
    let model = load_model(&f.model).unwrap();
    assert!(model.basis.component_count() >= 1);
    let o = dsm(&["train", s(&f.corpus), s(&f.root.join("again.dsm"))]);
    assert!(o.status.success());
    for key in ["frames", "rejected_frames", "dispersion", "k_at_coverage", "stopband_attenuation_db", "band_gain_ratio", "corpus_minutes"] {
        report(&o, key);
    }
    assert!(report(&o, "k_at_coverage").parse::<usize>().unwrap() >= 1);
    let share: f64 = report(&o, "first_eigenvector_share").parse().unwrap();
    assert!(share > 0.0 && share <= 1.0);
    assert_eq!(
        std::fs::read(&f.model).unwrap(),
        std::fs::read(f.root.join("again.dsm")).unwrap(),
        "training must be deterministic"
    );
}

#[test]
fn noise_corpus_has_no_voiced_frames() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("noise");
    std::fs::create_dir_all(&c).unwrap();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..32000).map(|_| rng.random_range(-0.3..0.3)).collect();
    write_wav(&SpeechSignal::new(x, 16000).unwrap(), c.join("n.wav")).unwrap();
    let o = dsm(&["train", s(&c), s(&dir.path().join("m.dsm"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no voiced frames"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn empty_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = dsm(&["train", s(dir.path()), s(&dir.path().join("m.dsm"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty corpus"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(dsm(&["train"]).status.code(), Some(1));
    assert_eq!(dsm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dsm(&["export", "m", "eigenvector:0", "o"]).status.code(), Some(1));
    assert_eq!(dsm(&["--help"]).status.code(), Some(0));
}

fn constant_params(seconds: f64, f0: f64) -> String {
    let mut text = String::from("#DSMPARAMS k=0 order=24 alpha=0.42 gamma=0 seed=3\n");
    let frames = (seconds / 0.005) as usize;
    for i in 0..frames {
        text.push_str(&format!("{} 1 {f0}", i as f64 * 0.005));
        text.push_str(" -2");
        for _ in 0..24 {
            text.push_str(" 0");
        }
        text.push('\n');
    }
    text
}

#[test]
fn vocode_constant_pitch() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.txt");
    std::fs::write(&params, constant_params(1.0, 200.0)).unwrap();
    let out = dir.path().join("o.wav");
    let o = dsm(&["vocode", s(&f.model), s(&params), s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sig = read_wav(&out).unwrap();
    assert_eq!(sig.len(), 16000);
    let track = estimate_pitch(&sig, 60.0, 400.0).unwrap();
    let mut f0: Vec<f64> = track.frames().iter().filter(|p| p.voiced).map(|p| p.f0).collect();
    assert!(f0.len() > 50);
    f0.sort_by(f64::total_cmp);
    let med = f0[f0.len() / 2];
    assert!((med / 200.0 - 1.0).abs() <= 0.02, "{med}");

    let again = dir.path().join("o2.wav");
    assert!(dsm(&["vocode", s(&f.model), s(&params), s(&again)]).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn vocode_empty_and_malformed() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.txt");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("e.wav");
    let o = dsm(&["vocode", s(&f.model), s(&empty), s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_wav(&out).unwrap().len(), 0);

    let bad = dir.path().join("b.txt");
    let mut text = constant_params(0.02, 200.0);
    text.push_str("0.5 1 200 oops\n");
    std::fs::write(&bad, text).unwrap();
    let o = dsm(&["vocode", s(&f.model), s(&bad), s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6"), "{err}");
}

#[test]
fn copysynth_report() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.wav");
    let params = dir.path().join("c.txt");
    let input = f.corpus.join("utt00.wav");
    let o = dsm(&["copysynth", s(&f.model), s(&input), s(&out), "--k", "5", "--seed", "9", "--params-out", s(&params)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_wav(&out).unwrap().len(), read_wav(&input).unwrap().len());
    let dev: f64 = report(&o, "f0_deviation_median").parse().unwrap();
    assert!(dev < 0.05, "{dev}");
    report(&o, "mel_distortion_db_median").parse::<f64>().unwrap();
    assert_eq!(report(&o, "energy_holes"), "0");

    let v = dir.path().join("v.wav");
    assert!(dsm(&["vocode", s(&f.model), s(&params), s(&v)]).status.success());
    let (a, b) = (read_wav(&out).unwrap(), read_wav(&v).unwrap());
    assert_eq!(a.samples(), &b.samples()[..a.len()]);
}

#[test]
fn copysynth_silence() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("z.wav");
    write_wav(&SpeechSignal::zeros(8000, 16000), &input).unwrap();
    let out = dir.path().join("zo.wav");
    let o = dsm(&["copysynth", s(&f.model), s(&input), s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let y = read_wav(&out).unwrap();
    let peak = y.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak < 1e-3, "{peak}");
}

#[test]
fn exports() {
    let f = fixture();
    let model = load_model(&f.model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rows = |what: &str| {
        let out = dir.path().join("x.csv");
        let o = dsm(&["export", s(&f.model), what, s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let d = rows("dispersion");
    assert_eq!(d.lines().count() - 1, model.basis.component_count());
    assert!(d.starts_with("component,"));
    let e = rows("eigenvector:1");
    assert_eq!(e.lines().count() - 1, model.normalization.normalized_length);
    let ar = rows("ar-response");
    let freqs: Vec<f64> = ar.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(freqs[0], 0.0);
    assert_eq!(*freqs.last().unwrap(), 8000.0);
    assert!(freqs.windows(2).all(|w| w[1] - w[0] <= 10.0 + 1e-9));
    let wav = format!("decomposition:{}", s(&f.corpus.join("utt01.wav")));
    let dec = rows(&wav);
    assert!(dec.starts_with("freq_hz,deterministic_db,stochastic_db,total_db"));
    assert!(dec.lines().count() > 100);

    let o = dsm(&["export", s(&f.model), "eigenvector:999", s(&dir.path().join("y.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}
