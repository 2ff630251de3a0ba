//! Dataset directories written by `ingest` and `synth`.
//!
//! * `users.tsv`, `items.tsv`: one raw id per line, in index order
//! * `train.tsv`: `user  item  interval`
//! * `validation.tsv`, `test.tsv`: `user  item  interval  cold` (cold is 0 or 1)
//! * `manifest.txt`: `key = value` summary (counts, grid, seed)

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tensorrec_core::data::{Dataset, Holdout, Split, TimeGrid, Triple, Vocab};

use crate::config::KeyValues;
use crate::error::{create, open, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    pub split: Split,
    pub manifest: KeyValues,
}

impl DataDir {
    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid {
            origin: self.manifest.require("origin")?,
            interval_seconds: self.manifest.require("interval_seconds")?,
            num_intervals: self.split.train.num_intervals(),
        })
    }
}

/// Counts and grid parameters for a split, plus caller-supplied entries.
pub fn manifest(split: &Split, grid: &TimeGrid, extra: &KeyValues) -> KeyValues {
    let train = &split.train;
    let cold = |h: &[Holdout]| h.iter().filter(|x| x.cold).count();
    let mut kv = KeyValues::new();
    kv.set("users", train.num_users());
    kv.set("items", train.num_items());
    kv.set("intervals", train.num_intervals());
    kv.set("positives", train.len() + split.validation.len() + split.test.len());
    kv.set("train", train.len());
    kv.set("validation", split.validation.len());
    kv.set("test", split.test.len());
    kv.set("cold_validation", cold(&split.validation));
    kv.set("cold_test", cold(&split.test));
    kv.set("origin", grid.origin);
    kv.set("interval_seconds", grid.interval_seconds);
    kv.set("seed", split.seed);
    kv.merge(extra);
    kv
}

fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: std::fmt::Display,
{
    let mut w = BufWriter::new(create(path)?);
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_data_dir(dir: &Path, split: &Split, manifest: &KeyValues) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let train = &split.train;
    let (users, items) = (train.users(), train.items());
    let raw = |t: &Triple| {
        format!(
            "{}\t{}\t{}",
            users.raw(t.user).unwrap_or_default(),
            items.raw(t.item).unwrap_or_default(),
            t.interval
        )
    };
    write_lines(&dir.join("users.tsv"), users.ids())?;
    write_lines(&dir.join("items.tsv"), items.ids())?;
    write_lines(&dir.join("train.tsv"), train.positives().iter().map(raw))?;
    for (name, holdout) in [("validation.tsv", &split.validation), ("test.tsv", &split.test)] {
        write_lines(
            &dir.join(name),
            holdout.iter().map(|h| format!("{}\t{}", raw(&h.triple), u8::from(h.cold))),
        )?;
    }
    let mut w = create(&dir.join(MANIFEST_FILE))?;
    w.write_all(manifest.to_string().as_bytes())?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(open(path)?);
    Ok(reader.lines().collect::<std::io::Result<_>>()?)
}

fn malformed(path: &Path, line: usize) -> Error {
    Error::Config(format!("{}: line {line}: malformed record", path.display()))
}

fn read_triples(
    path: &Path,
    users: &Vocab,
    items: &Vocab,
    intervals: usize,
    with_cold: bool,
) -> Result<Vec<Holdout>> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let width = if with_cold { 4 } else { 3 };
        if f.len() != width {
            return Err(malformed(path, i + 1));
        }
        let user = users.get(f[0]).ok_or_else(|| Error::UnknownUser(f[0].to_owned()))?;
        let item = items
            .get(f[1])
            .ok_or_else(|| Error::Config(format!("{}: unknown item `{}`", path.display(), f[1])))?;
        let interval: usize = f[2].parse().map_err(|_| malformed(path, i + 1))?;
        if interval >= intervals {
            return Err(Error::UnknownInterval { interval, intervals });
        }
        let cold = match (with_cold, f.get(3)) {
            (true, Some(&"1")) => true,
            (true, Some(&"0")) | (false, None) => false,
            _ => return Err(malformed(path, i + 1)),
        };
        out.push(Holdout {
            triple: Triple::new(user, item, interval),
            cold,
        });
    }
    Ok(out)
}

pub fn read_data_dir(dir: &Path) -> Result<DataDir> {
    let path = |name: &str| -> PathBuf { dir.join(name) };
    let manifest = KeyValues::parse(&std::fs::read_to_string(path(MANIFEST_FILE)).map_err(|source| {
        Error::File {
            path: path(MANIFEST_FILE),
            source,
        }
    })?)?;
    let intervals: usize = manifest.require("intervals")?;
    let users = Arc::new(Vocab::from_ids(read_lines(&path("users.tsv"))?)?);
    let items = Arc::new(Vocab::from_ids(read_lines(&path("items.tsv"))?)?);
    let train = read_triples(&path("train.tsv"), &users, &items, intervals, false)?;
    let validation = read_triples(&path("validation.tsv"), &users, &items, intervals, true)?;
    let test = read_triples(&path("test.tsv"), &users, &items, intervals, true)?;
    let train = Dataset::from_triples(users, items, intervals, train.into_iter().map(|h| h.triple))?;
    Ok(DataDir {
        split: Split {
            train,
            validation,
            test,
            seed: manifest.require("seed")?,
        },
        manifest,
    })
}
