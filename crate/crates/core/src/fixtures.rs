//! Deterministic synthetic reference data: three repository-like snapshots
//! and a data-source directory for work-unit backlogs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed;

pub const SNAPSHOT_NAMES: [&str; 3] = ["httpkit", "checkrunner", "microweb"];

const SOURCE_DIRS: [&str; 3] = ["core", "util", "adapters"];
const SOURCE_FILES_PER_DIR: usize = 60;
const TEST_FILES: usize = 150;
const DOC_FILES: usize = 80;
const WORDS_PER_FILE: usize = 40;

const BASE_WORDS: &[&str] = &[
    "session", "adapter", "cookie", "header", "request", "response", "stream", "buffer",
    "socket", "proxy", "redirect", "timeout", "retry", "backoff", "encoding", "decoder",
    "payload", "schema", "router", "handler", "middleware", "template", "render", "context",
    "fixture", "plugin", "marker", "collector", "report", "assertion", "capture", "monkeypatch",
    "tmpdir", "config", "option", "parser", "token", "lexer", "grammar", "cache", "entry",
    "registry", "loader", "module", "package", "import", "resolver", "manifest", "version",
    "release", "changelog", "license", "author", "signal", "event", "listener", "queue",
    "worker", "thread", "lock", "mutex", "channel", "future", "promise", "callback", "hook",
    "blueprint", "endpoint", "query", "params", "form", "upload", "download", "chunk",
    "certificate", "verify", "hostname", "pool", "connection", "transport", "protocol",
    "status", "error", "warning", "exception", "traceback", "logger", "formatter", "filter",
    "record", "metric", "counter", "gauge", "histogram", "sample", "window", "cursor", "page",
    "index", "offset", "limit", "batch", "commit", "rollback", "migration", "model", "field",
    "column", "table", "record_set", "serializer", "validator", "constraint", "default",
    "fallback", "mirror", "archive", "bundle", "wheel", "sdist", "builder", "artifact",
    "snapshot", "digest", "checksum", "signature", "keyring", "secret", "credential", "auth",
    "login", "logout", "profile", "account", "tenant", "quota", "billing", "invoice",
];

const MAKES: [&str; 12] = [
    "amc", "buick", "chevrolet", "datsun", "dodge", "fiat", "ford", "honda", "mazda", "peugeot",
    "toyota", "volkswagen",
];
const MODELS: [&str; 10] = [
    "rebel", "skylark", "impala", "coupe", "dart", "sedan", "torino", "civic", "glc", "wagon",
];

/// Paths written by [`write_fixtures`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureLayout {
    pub snapshots: Vec<PathBuf>,
    pub sources: PathBuf,
}

fn vocabulary(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words: Vec<String> = BASE_WORDS.iter().map(|w| w.to_string()).collect();
    let mut compounds = Vec::new();
    for (i, a) in BASE_WORDS.iter().enumerate() {
        for b in BASE_WORDS.iter().skip(i + 1).step_by(37) {
            compounds.push(format!("{a}_{b}"));
        }
    }
    compounds.shuffle(rng);
    words.extend(compounds.into_iter().take(260));
    words.shuffle(rng);
    words
}

/// Zipf(1) sampler over a ranked vocabulary.
struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = (1..=n)
            .map(|r| {
                acc += 1.0 / r as f64;
                acc
            })
            .collect();
        Zipf { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c < x)
    }
}

struct Writer<'a> {
    vocab: &'a [String],
    zipf: Zipf,
    rng: ChaCha8Rng,
}

impl Writer<'_> {
    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| self.vocab[self.zipf.sample(&mut self.rng)].clone())
            .collect()
    }

    fn sentence(&mut self, n: usize) -> String {
        let mut s = self.words(n).join(" ");
        if let Some(first) = s.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        s.push('.');
        s
    }

    fn camel(word: &str) -> String {
        word.split('_')
            .map(|p| {
                let mut c = p.chars();
                c.next()
                    .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
                    .unwrap_or_default()
            })
            .collect()
    }

    fn source(&mut self, pkg: &str) -> String {
        let w = self.words(WORDS_PER_FILE);
        let mut out = format!("\"\"\"{}\"\"\"\n\n", self.sentence(8));
        out.push_str(&format!("import {}\nfrom {pkg}.{} import {}\n\n\n", w[0], w[1], Self::camel(&w[2])));
        out.push_str(&format!("class {}:\n    \"\"\"{}\"\"\"\n\n", Self::camel(&w[3]), w[4..12].join(" ")));
        for chunk in w[12..].chunks(7) {
            if chunk.len() < 3 {
                break;
            }
            out.push_str(&format!(
                "    def {}_{}(self, {}):\n        # {}\n        return self.{}({})\n\n",
                chunk[0],
                chunk[1],
                chunk[2],
                chunk[3..].join(" "),
                chunk[0],
                chunk[2]
            ));
        }
        out
    }

    fn test(&mut self, pkg: &str) -> String {
        let w = self.words(WORDS_PER_FILE);
        let mut out = format!("import pytest\n\nfrom {pkg} import {}\n\n\n", w[0]);
        for chunk in w[1..].chunks(6) {
            if chunk.len() < 3 {
                break;
            }
            out.push_str(&format!(
                "def test_{}_{}():\n    \"\"\"{}\"\"\"\n    assert {}.{}() is not None\n\n\n",
                chunk[0],
                chunk[1],
                chunk[2..].join(" "),
                w[0],
                chunk[2]
            ));
        }
        out
    }

    fn doc(&mut self, title: &str) -> String {
        let mut out = format!("{title}\n{}\n\n", "=".repeat(title.len()));
        for _ in 0..4 {
            out.push_str(&self.sentence(10));
            out.push('\n');
        }
        out
    }
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn write_snapshot(root: &Path, name: &str, seed: u64) -> Result<()> {
    let mut rng = seed::rng(&[seed, seed::str_key(name)]);
    let vocab = vocabulary(&mut rng);
    let mut w = Writer {
        zipf: Zipf::new(vocab.len()),
        vocab: &vocab,
        rng,
    };
    for dir in SOURCE_DIRS {
        for i in 0..SOURCE_FILES_PER_DIR {
            let text = w.source(name);
            write(&root.join(format!("src/{name}/{dir}/mod_{i:03}.py")), &text)?;
        }
    }
    for i in 0..TEST_FILES {
        let text = w.test(name);
        write(&root.join(format!("tests/test_{i:03}.py")), &text)?;
    }
    for i in 0..DOC_FILES {
        let ext = if i % 2 == 0 { "rst" } else { "md" };
        let title = Writer::camel(&w.words(1)[0]);
        let text = w.doc(&title);
        write(&root.join(format!("docs/page_{i:03}.{ext}")), &text)?;
    }
    let cfg = [
        ("setup.cfg", format!("[metadata]\nname = {name}\nversion = 2.{}.0\n", seed % 7)),
        ("tox.ini", "[tox]\nenvlist = py310,py311\n".to_owned()),
        ("pyproject.toml", format!("[project]\nname = \"{name}\"\n")),
        (".github/workflows/ci.yml", "on: [push]\njobs:\n  test:\n    runs-on: ubuntu-latest\n".to_owned()),
        ("README.md", w.doc(name)),
    ];
    for (rel, text) in cfg {
        write(&root.join(rel), &text)?;
    }
    Ok(())
}

fn write_sources(dir: &Path, seed: u64, snapshots: &[PathBuf]) -> Result<()> {
    let mut rng = seed::rng(&[seed, seed::str_key("sources")]);

    let mut cars = csv::Writer::from_writer(Vec::new());
    cars.write_record([
        "Name",
        "Miles_per_Gallon",
        "Cylinders",
        "Displacement",
        "Horsepower",
        "Weight_in_lbs",
        "Acceleration",
        "Year",
        "Origin",
    ])?;
    for make in MAKES {
        for model in MODELS {
            let cyl = [4, 6, 8][rng.gen_range(0..3)];
            let origin = ["USA", "Europe", "Japan"][rng.gen_range(0..3)];
            cars.write_record([
                format!("{make} {model}"),
                rng.gen_range(10..40).to_string(),
                cyl.to_string(),
                (cyl * rng.gen_range(20..50)).to_string(),
                rng.gen_range(60..220).to_string(),
                rng.gen_range(1800..5000).to_string(),
                format!("{:.1}", rng.gen_range(80..250) as f64 / 10.0),
                rng.gen_range(1970..1983).to_string(),
                origin.to_owned(),
            ])?;
        }
    }
    let cars = String::from_utf8(cars.into_inner().map_err(|e| Error::Config(e.to_string()))?)
        .expect("utf-8");
    write(&dir.join("cars.csv"), &cars)?;

    let mut airlines = csv::Writer::from_writer(Vec::new());
    airlines.write_record([
        "airline",
        "avail_seat_km_per_week",
        "incidents_85_99",
        "fatal_accidents_85_99",
        "fatalities_85_99",
        "incidents_00_14",
        "fatal_accidents_00_14",
        "fatalities_00_14",
    ])?;
    let prefixes = ["Aero", "Air", "Sky", "Jet", "Trans", "Pacific", "Nordic"];
    let suffixes = ["lines", "ways", "express", "connect", "air", "link", "wings", "jet"];
    for p in prefixes {
        for s in suffixes {
            airlines.write_record([
                format!("{p} {s}"),
                rng.gen_range(100_000_000u64..7_000_000_000).to_string(),
                rng.gen_range(0..20).to_string(),
                rng.gen_range(0..4).to_string(),
                rng.gen_range(0..500).to_string(),
                rng.gen_range(0..10).to_string(),
                rng.gen_range(0..3).to_string(),
                rng.gen_range(0..300).to_string(),
            ])?;
        }
    }
    let airlines =
        String::from_utf8(airlines.into_inner().map_err(|e| Error::Config(e.to_string()))?)
            .expect("utf-8");
    write(&dir.join("airline_safety.csv"), &airlines)?;

    let licenses = ["Apache-2.0", "MIT", "BSD-3-Clause"];
    for (i, name) in SNAPSHOT_NAMES.iter().enumerate() {
        let meta = format!(
            "name: {name}\nversion: {}.{}.{}\nlicense: {}\nhomepage: https://example.org/{name}\npython_requires: >=3.{}\nmaintainer: {name}-maintainers\ndefault_branch: main\ntest_runner: pytest\n",
            i + 1,
            rng.gen_range(0..30),
            rng.gen_range(0..10),
            licenses[i % licenses.len()],
            8 + i
        );
        write(&dir.join(format!("{name}.meta")), &meta)?;
    }

    for (snap, name) in snapshots.iter().zip(SNAPSHOT_NAMES) {
        for rel in ["README.md", "setup.cfg", "tox.ini", "docs/page_000.rst", "docs/page_001.md"] {
            let text = fs::read_to_string(snap.join(rel)).map_err(|e| Error::io(snap.join(rel), e))?;
            let flat = rel.replace('/', "_");
            write(&dir.join("artifacts").join(name).join(flat), &text)?;
        }
    }
    Ok(())
}

/// Writes `snapshots/<name>/` trees and a `sources/` directory under `out`.
/// Output is a pure function of `seed`.
pub fn write_fixtures(out: &Path, seed: u64) -> Result<FixtureLayout> {
    let mut snapshots = Vec::new();
    for name in SNAPSHOT_NAMES {
        let root = out.join("snapshots").join(name);
        if root.exists() {
            return Err(Error::Config(format!("{} already exists", root.display())));
        }
        write_snapshot(&root, name, seed)?;
        snapshots.push(root);
    }
    let sources = out.join("sources");
    write_sources(&sources, seed, &snapshots)?;
    Ok(FixtureLayout { snapshots, sources })
}
