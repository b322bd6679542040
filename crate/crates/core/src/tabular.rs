//! Mixed-type tabular data: schema, dataset, standardization and CSV I/O.
//!
//! Continuous cells are stored as `f64`. Discrete cells store the index of
//! their category in the column vocabulary (also as `f64`), so every row is a
//! plain `&[f64]` regardless of column kinds.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Reserved CSV header names for the optional label columns.
pub const CLEAN_LABEL_COLUMN: &str = "clean_label";
pub const NOISY_LABEL_COLUMN: &str = "noisy_label";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// An empty vocabulary means "infer from the data" when loading a CSV.
    Discrete {
        #[serde(default)]
        vocabulary: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn discrete<S: Into<String>>(name: impl Into<String>, vocabulary: Vec<S>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Discrete {
                vocabulary: vocabulary.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ColumnKind::Discrete { .. })
    }

    pub fn vocabulary(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Discrete { vocabulary } => Some(vocabulary),
            ColumnKind::Continuous => None,
        }
    }
}

/// Ordered column list with the continuous/discrete index partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Column>", into = "Vec<Column>")]
pub struct FeatureSchema {
    columns: Vec<Column>,
    continuous: Vec<usize>,
    discrete: Vec<usize>,
}

impl TryFrom<Vec<Column>> for FeatureSchema {
    type Error = Error;

    fn try_from(columns: Vec<Column>) -> Result<Self> {
        FeatureSchema::new(columns)
    }
}

impl From<FeatureSchema> for Vec<Column> {
    fn from(schema: FeatureSchema) -> Self {
        schema.columns
    }
}

impl FeatureSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::SchemaMismatch("schema has no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column name `{}`",
                    c.name
                )));
            }
            if c.name == CLEAN_LABEL_COLUMN || c.name == NOISY_LABEL_COLUMN {
                return Err(Error::SchemaMismatch(format!(
                    "`{}` is reserved for labels",
                    c.name
                )));
            }
            if let ColumnKind::Discrete { vocabulary } = &c.kind {
                let distinct: HashSet<_> = vocabulary.iter().collect();
                if distinct.len() != vocabulary.len() {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` has a repeated vocabulary entry",
                        c.name
                    )));
                }
            }
        }
        let (discrete, continuous): (Vec<usize>, Vec<usize>) =
            (0..columns.len()).partition(|&j| columns[j].is_discrete());
        Ok(FeatureSchema {
            columns,
            continuous,
            discrete,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Indices of continuous columns (F_c).
    pub fn continuous(&self) -> &[usize] {
        &self.continuous
    }

    /// Indices of discrete columns (F_d).
    pub fn discrete(&self) -> &[usize] {
        &self.discrete
    }

    fn has_unresolved_vocabulary(&self) -> bool {
        self.columns
            .iter()
            .any(|c| matches!(&c.kind, ColumnKind::Discrete { vocabulary } if vocabulary.is_empty()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    features: Vec<f64>,
    n_rows: usize,
    pub clean_labels: Option<Vec<usize>>,
    pub noisy_labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl Dataset {
    /// `features` is row-major with `schema.len()` cells per row.
    pub fn new(
        schema: FeatureSchema,
        features: Vec<f64>,
        clean_labels: Option<Vec<usize>>,
        noisy_labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let m = schema.len();
        if features.len() % m != 0 {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: features.len() % m,
            });
        }
        let n_rows = features.len() / m;
        if n_rows == 0 {
            return Err(Error::NoSamples);
        }
        if num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        for (j, col) in schema.columns.iter().enumerate() {
            match &col.kind {
                ColumnKind::Discrete { vocabulary } => {
                    for i in 0..n_rows {
                        let v = features[i * m + j];
                        if v < 0.0 || v.fract() != 0.0 || v as usize >= vocabulary.len() {
                            return Err(Error::UnknownCategory {
                                column: col.name.clone(),
                                value: v.to_string(),
                            });
                        }
                    }
                }
                ColumnKind::Continuous => {
                    if let Some(i) = (0..n_rows).find(|&i| !features[i * m + j].is_finite()) {
                        return Err(Error::NonFinite(format!(
                            "row {i}, column `{}`",
                            col.name
                        )));
                    }
                }
            }
        }
        for labels in [&clean_labels, &noisy_labels].into_iter().flatten() {
            if labels.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    actual: labels.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::config(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        Ok(Dataset {
            schema,
            features,
            n_rows,
            clean_labels,
            noisy_labels,
            num_classes,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_cols();
        &self.features[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Same schema and labels, new feature values.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        Dataset::new(
            self.schema.clone(),
            features,
            self.clean_labels.clone(),
            self.noisy_labels.clone(),
            self.num_classes,
        )
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let pick = |labels: &Option<Vec<usize>>| {
            labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect::<Vec<_>>())
        };
        Dataset::new(
            self.schema.clone(),
            features,
            pick(&self.clean_labels),
            pick(&self.noisy_labels),
            self.num_classes,
        )
    }

    pub fn check_same_schema(&self, other: &FeatureSchema) -> Result<()> {
        if &self.schema != other {
            return Err(Error::SchemaMismatch(
                "datasets do not share a schema".into(),
            ));
        }
        Ok(())
    }
}

/// Per-continuous-column affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    schema: FeatureSchema,
    means: Vec<f64>,
    /// Population standard deviations with zero clamped to 1.
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.n_rows() as f64;
        let mut means = Vec::with_capacity(train.schema().continuous().len());
        let mut scales = Vec::with_capacity(means.capacity());
        for &j in train.schema().continuous() {
            let mean = train.column(j).sum::<f64>() / n;
            let var = train.column(j).map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Standardizer {
            schema: train.schema().clone(),
            means,
            scales,
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        self.map(d, |x, mean, scale| (x - mean) / scale)
    }

    pub fn invert(&self, d: &Dataset) -> Result<Dataset> {
        self.map(d, |x, mean, scale| x * scale + mean)
    }

    fn map(&self, d: &Dataset, f: impl Fn(f64, f64, f64) -> f64) -> Result<Dataset> {
        d.check_same_schema(&self.schema)?;
        let m = d.n_cols();
        let mut features = d.features().to_vec();
        for row in features.chunks_exact_mut(m) {
            for (k, &j) in self.schema.continuous().iter().enumerate() {
                row[j] = f(row[j], self.means[k], self.scales[k]);
            }
        }
        d.with_features(features)
    }
}

pub fn standardize_fit_transform(train: &Dataset) -> Result<(Standardizer, Dataset)> {
    let s = Standardizer::fit(train);
    let out = s.apply(train)?;
    Ok((s, out))
}

pub fn standardize_apply(s: &Standardizer, d: &Dataset) -> Result<Dataset> {
    s.apply(d)
}

/// Shuffled (train, test) row indices; each list is sorted ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::config(format!(
            "test_fraction {test_fraction} leaves an empty split for {n} rows"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d.n_rows(), test_fraction, seed)?;
    Ok((d.subset(&train)?, d.subset(&test)?))
}

fn infer_vocabulary(values: &BTreeSet<String>) -> Vec<String> {
    let mut vocab: Vec<String> = values.iter().cloned().collect();
    let numeric: Option<Vec<f64>> = vocab.iter().map(|v| v.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(vocab).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        vocab = paired.into_iter().map(|(_, s)| s).collect();
    }
    vocab
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses the CSV layout written by [`write_csv`]: one column per schema entry,
/// in order, optionally followed by `clean_label` and/or `noisy_label`.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let m = schema.len();
    if header.len() < m
        || header[..m]
            .iter()
            .zip(schema.columns())
            .any(|(h, c)| h != &c.name)
    {
        return Err(Error::SchemaMismatch(format!(
            "header {:?} does not start with schema columns {:?}",
            header,
            schema.columns().iter().map(|c| &c.name).collect::<Vec<_>>()
        )));
    }
    let mut clean_pos = None;
    let mut noisy_pos = None;
    for (p, h) in header.iter().enumerate().skip(m) {
        match h.as_str() {
            CLEAN_LABEL_COLUMN if clean_pos.is_none() => clean_pos = Some(p),
            NOISY_LABEL_COLUMN if noisy_pos.is_none() => noisy_pos = Some(p),
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "unexpected column `{other}`"
                )))
            }
        }
    }

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::NoSamples);
    }

    // Resolve vocabularies first so inferred ones see every value.
    let mut columns = schema.columns().to_vec();
    if schema.has_unresolved_vocabulary() {
        for (j, col) in columns.iter_mut().enumerate() {
            if let ColumnKind::Discrete { vocabulary } = &mut col.kind {
                if vocabulary.is_empty() {
                    let seen: BTreeSet<String> =
                        records.iter().map(|r| r[j].trim().to_string()).collect();
                    *vocabulary = infer_vocabulary(&seen);
                }
            }
        }
    }
    let schema = FeatureSchema::new(columns)?;
    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .columns()
        .iter()
        .map(|c| {
            c.vocabulary()
                .map(|v| v.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect())
        })
        .collect();

    let mut features = Vec::with_capacity(records.len() * m);
    let mut clean = clean_pos.map(|_| Vec::with_capacity(records.len()));
    let mut noisy = noisy_pos.map(|_| Vec::with_capacity(records.len()));
    for (r, record) in records.iter().enumerate() {
        let line = r + 2;
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                column: "*".into(),
                value: format!("{} fields", record.len()),
                reason: format!("expected {} fields", header.len()),
            });
        }
        for (j, col) in schema.columns().iter().enumerate() {
            let raw = record[j].trim();
            let v = match &lookups[j] {
                Some(lookup) => match lookup.get(raw) {
                    Some(&k) => k as f64,
                    None => {
                        return Err(Error::UnknownCategory {
                            column: col.name.clone(),
                            value: raw.to_string(),
                        })
                    }
                },
                None => match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() => x,
                    Ok(_) => {
                        return Err(Error::Parse {
                            line,
                            column: col.name.clone(),
                            value: raw.into(),
                            reason: "non-finite".into(),
                        })
                    }
                    Err(e) => {
                        return Err(Error::Parse {
                            line,
                            column: col.name.clone(),
                            value: raw.into(),
                            reason: e.to_string(),
                        })
                    }
                },
            };
            features.push(v);
        }
        for (pos, out, name) in [
            (clean_pos, &mut clean, CLEAN_LABEL_COLUMN),
            (noisy_pos, &mut noisy, NOISY_LABEL_COLUMN),
        ] {
            if let (Some(p), Some(out)) = (pos, out.as_mut()) {
                let raw = record[p].trim();
                let l = raw.parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    column: name.into(),
                    value: raw.into(),
                    reason: e.to_string(),
                })?;
                out.push(l);
            }
        }
    }
    let num_classes = clean
        .iter()
        .chain(noisy.iter())
        .flat_map(|l| l.iter().copied())
        .max()
        .map_or(2, |mx| (mx + 1).max(2));
    Dataset::new(schema, features, clean, noisy, num_classes)
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(d, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Continuous values use the shortest representation that round-trips exactly.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.schema().columns().iter().map(|c| c.name.as_str()).collect();
    if d.clean_labels.is_some() {
        header.push(CLEAN_LABEL_COLUMN);
    }
    if d.noisy_labels.is_some() {
        header.push(NOISY_LABEL_COLUMN);
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, row) in d.rows().enumerate() {
        record.clear();
        for (col, &v) in d.schema().columns().iter().zip(row) {
            record.push(match col.vocabulary() {
                Some(vocab) => vocab[v as usize].clone(),
                None => v.to_string(),
            });
        }
        if let Some(l) = &d.clean_labels {
            record.push(l[i].to_string());
        }
        if let Some(l) = &d.noisy_labels {
            record.push(l[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn to_csv_string(d: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(d, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Column::continuous("x"),
            Column::continuous("y"),
            Column::discrete("c", vec!["a", "b"]),
        ])
        .unwrap()
    }

    #[test]
    fn loads_small_file() {
        let text = "x,y,c\n1.5,2,a\n-3,0.25,b\n4,5,a\n";
        let d = read_csv(text.as_bytes(), &small_schema()).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_cols(), 3);
        assert_eq!(d.schema().discrete().len(), 1);
        assert_eq!(d.row(1), &[-3.0, 0.25, 1.0]);
        assert_eq!(to_csv_string(&d).unwrap(), text);
    }

    #[test]
    fn empty_data_section_is_an_error() {
        let err = read_csv("x,y,c\n".as_bytes(), &small_schema()).unwrap_err();
        assert!(matches!(err, Error::NoSamples));
        assert_eq!(err.to_string(), "no samples");
    }

    #[test]
    fn value_outside_fixed_vocabulary_is_named() {
        let schema = FeatureSchema::new(vec![Column::discrete("c", vec!["a"])]).unwrap();
        let err = read_csv("c\na\nb\n".as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
    }

    #[test]
    fn unparseable_cell_reports_position() {
        let err = read_csv("x,y,c\n1,2,a\n1,oops,b\n".as_bytes(), &small_schema()).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_mismatch() {
        let err = read_csv("x,z,c\n1,2,a\n".as_bytes(), &small_schema()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }

    #[test]
    fn vocabulary_inferred_numerically() {
        let schema = FeatureSchema::new(vec![Column::discrete("k", Vec::<String>::new())]).unwrap();
        let d = read_csv("k,clean_label\n10,1\n2,0\n10,0\n".as_bytes(), &schema).unwrap();
        assert_eq!(d.schema().columns()[0].vocabulary().unwrap(), ["2", "10"]);
        assert_eq!(d.features(), &[1.0, 0.0, 1.0]);
        assert_eq!(d.clean_labels.as_deref(), Some(&[1, 0, 0][..]));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &small_schema()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(FeatureSchema::new(vec![Column::continuous("a"), Column::continuous("a")]).is_err());
    }

    #[test]
    fn schema_json_round_trip() {
        let s = small_schema();
        let json = serde_json::to_string(&s).unwrap();
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    fn column_dataset(values: &[f64]) -> Dataset {
        let schema = FeatureSchema::new(vec![Column::continuous("v")]).unwrap();
        Dataset::new(schema, values.to_vec(), None, None, 2).unwrap()
    }

    #[test]
    fn standardize_hand_values() {
        let (_, z) = standardize_fit_transform(&column_dataset(&[1.0, 2.0, 3.0])).unwrap();
        // mean 2, population std sqrt(2/3)
        let e = (1.5f64).sqrt();
        for (got, want) in z.features().iter().zip([-e, 0.0, e]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((e - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let (s, z) = standardize_fit_transform(&column_dataset(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(z.features(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.invert(&z).unwrap().features(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn standardizer_rejects_other_schema() {
        let s = Standardizer::fit(&column_dataset(&[1.0, 2.0]));
        let other = Dataset::new(
            FeatureSchema::new(vec![Column::continuous("w")]).unwrap(),
            vec![1.0],
            None,
            None,
            2,
        )
        .unwrap();
        assert!(matches!(s.apply(&other), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split_indices(10, 0.2, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(split_indices(10, 0.2, 7).unwrap(), (tr.clone(), te.clone()));
        let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split_indices(10, 0.0, 1).is_err());
        assert!(split_indices(10, 1.0, 1).is_err());
        assert!(split_indices(10, 0.01, 1).is_err());
    }

    #[test]
    fn split_is_uniform() {
        // Each index should land in the test split Binomial(1000, 0.2) times.
        let n = 100;
        let seeds = 1000;
        let mut hits = vec![0usize; n];
        for seed in 0..seeds {
            for i in split_indices(n, 0.2, seed).unwrap().1 {
                hits[i] += 1;
            }
        }
        let mean = seeds as f64 * 0.2;
        let sd = (seeds as f64 * 0.2 * 0.8).sqrt();
        // ~0.27 expected 3-sigma exceedances over 100 indices.
        let misses = hits.iter().filter(|&&h| (h as f64 - mean).abs() > 3.0 * sd).count();
        assert!(misses <= 2, "misses {misses}: {hits:?}");
        assert!(hits.iter().all(|&h| (h as f64 - mean).abs() < 4.5 * sd));
    }
}
