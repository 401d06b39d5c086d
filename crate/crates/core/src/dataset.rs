//! Labeled applicant data with feature-group provenance.
//!
//! Data moves through two stages. [`RawDataset`] is what comes out of CSV
//! ingestion or the synthetic generator: numeric columns as reals and
//! categorical columns as their raw category strings. [`RawDataset::encode`]
//! one-hot encodes categoricals against the schema-declared category lists and
//! yields a [`LabeledDataset`], the purely numeric matrix consumed by the
//! trainer, the explainer and the experiment runner.
//!
//! Missing cells are represented by `f64::NAN` in encoded data and are never
//! imputed; the trainer learns a default direction for them.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Provenance of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    SuperApp,
    Mobile,
    Bureau,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [FeatureGroup::SuperApp, FeatureGroup::Mobile, FeatureGroup::Bureau];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::SuperApp => "super_app",
            FeatureGroup::Mobile => "mobile",
            FeatureGroup::Bureau => "bureau",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "super_app" => Ok(FeatureGroup::SuperApp),
            "mobile" => Ok(FeatureGroup::Mobile),
            "bureau" => Ok(FeatureGroup::Bureau),
            other => Err(Error::Config(format!("unknown feature group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub group: FeatureGroup,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>, group: FeatureGroup) -> Self {
        ColumnSpec {
            name: name.into(),
            group,
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        group: FeatureGroup,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            group,
            kind: ColumnKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    /// Number of encoded columns this raw column expands to.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical { categories } => categories.len(),
        }
    }
}

/// Ordered raw feature columns. Column order defines encoded column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = FeatureSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        let mut seen = HashSet::new();
        for col in &self.columns {
            if col.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", col.name)));
            }
            if let ColumnKind::Categorical { categories } = &col.kind {
                if categories.is_empty() {
                    return Err(Error::Schema(format!("categorical column {:?} declares no categories", col.name)));
                }
                let mut cats = HashSet::new();
                for c in categories {
                    if c.is_empty() || !cats.insert(c.as_str()) {
                        return Err(Error::Schema(format!(
                            "categorical column {:?} has an empty or duplicate category {c:?}",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn raw_count(&self, group: FeatureGroup) -> usize {
        self.columns.iter().filter(|c| c.group == group).count()
    }

    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(ColumnSpec::encoded_width).sum()
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Sidecar schema file: feature columns plus the label and ordering columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label_column: String,
    pub order_column: String,
    pub columns: Vec<ColumnSpec>,
}

impl DatasetSchema {
    pub fn features(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(self.columns.clone())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: DatasetSchema = toml::from_str(&text)?;
        schema.features()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One of the six input-data combinations compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scenario {
    C,
    S,
    M,
    SM,
    SC,
    SMC,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [Scenario::C, Scenario::S, Scenario::M, Scenario::SM, Scenario::SC, Scenario::SMC];

    pub fn acronym(self) -> &'static str {
        match self {
            Scenario::C => "C",
            Scenario::S => "S",
            Scenario::M => "M",
            Scenario::SM => "S+M",
            Scenario::SC => "S+C",
            Scenario::SMC => "S+M+C",
        }
    }

    /// Human-readable name of the data sources.
    pub fn label(self) -> &'static str {
        match self {
            Scenario::C => "Credit Bureau",
            Scenario::S => "Super-App",
            Scenario::M => "Mobile Phone",
            Scenario::SM => "Super-App + Mobile Phone",
            Scenario::SC => "Super-App + Credit Bureau",
            Scenario::SMC => "Super-App + Mobile Phone + Credit Bureau",
        }
    }

    pub fn groups(self) -> &'static [FeatureGroup] {
        use FeatureGroup::*;
        match self {
            Scenario::C => &[Bureau],
            Scenario::S => &[SuperApp],
            Scenario::M => &[Mobile],
            Scenario::SM => &[SuperApp, Mobile],
            Scenario::SC => &[SuperApp, Bureau],
            Scenario::SMC => &[SuperApp, Mobile, Bureau],
        }
    }

    pub fn contains(self, group: FeatureGroup) -> bool {
        self.groups().contains(&group)
    }

    /// Filesystem-safe identifier, e.g. `S_M_C`.
    pub fn slug(self) -> String {
        self.acronym().replace('+', "_")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.acronym())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase().replace('_', "+");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.acronym() == wanted)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?} (expected one of C, S, M, S+M, S+C, S+M+C)")))
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> String {
        s.acronym().to_string()
    }
}

#[derive(Debug, Clone)]
pub enum RawColumn {
    /// `NaN` marks a missing cell.
    Numeric(Vec<f64>),
    Categorical(Vec<Option<String>>),
}

impl PartialEq for RawColumn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (RawColumn::Numeric(a), RawColumn::Numeric(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (RawColumn::Categorical(a), RawColumn::Categorical(b)) => a == b,
            _ => false,
        }
    }
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    fn gather(&self, idx: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(idx.iter().map(|&i| v[i]).collect()),
            RawColumn::Categorical(v) => RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Un-encoded data: one column per schema entry, categoricals kept as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: FeatureSchema,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
    pub order_index: Vec<i64>,
}

impl RawDataset {
    /// Builds a dataset, checking shapes and sorting rows by `order_index`.
    pub fn new(schema: FeatureSchema, columns: Vec<RawColumn>, labels: Vec<u8>, order_index: Vec<i64>) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.columns.len() {
            return Err(Error::Data(format!(
                "{} columns supplied for a schema of {}",
                columns.len(),
                schema.columns.len()
            )));
        }
        let n = labels.len();
        if order_index.len() != n {
            return Err(Error::Data(format!("{} labels but {} order values", n, order_index.len())));
        }
        for (spec, col) in schema.columns.iter().zip(&columns) {
            let kind_ok = matches!(
                (&spec.kind, col),
                (ColumnKind::Numeric, RawColumn::Numeric(_)) | (ColumnKind::Categorical { .. }, RawColumn::Categorical(_))
            );
            if !kind_ok {
                return Err(Error::Data(format!("column {:?} does not match its declared kind", spec.name)));
            }
            if col.len() != n {
                return Err(Error::Data(format!("column {:?} has {} rows, expected {n}", spec.name, col.len())));
            }
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("row {pos}: label {} is not 0 or 1", labels[pos])));
        }
        let mut ds = RawDataset {
            schema,
            columns,
            labels,
            order_index,
        };
        ds.sort_by_order();
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn fraud_rate(&self) -> f64 {
        fraud_rate(&self.labels)
    }

    /// Stable sort by order value. Tied order values are resolved in file
    /// order and the order index is renumbered to row positions so it stays
    /// strictly increasing.
    fn sort_by_order(&mut self) {
        let n = self.n_rows();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| self.order_index[i]);
        if perm.iter().enumerate().any(|(k, &i)| k != i) {
            self.columns = self.columns.iter().map(|c| c.gather(&perm)).collect();
            self.labels = perm.iter().map(|&i| self.labels[i]).collect();
            self.order_index = perm.iter().map(|&i| self.order_index[i]).collect();
        }
        let ties = self.order_index.windows(2).filter(|w| w[0] == w[1]).count();
        if ties > 0 {
            log::warn!("{ties} tied order values; ties broken by file order and order index renumbered");
            self.order_index = (0..n as i64).collect();
        }
    }

    /// One-hot encodes categorical columns against the declared categories.
    /// Numeric columns pass through unchanged. A missing categorical cell
    /// becomes missing in every indicator column.
    pub fn encode(&self) -> Result<LabeledDataset> {
        let n = self.n_rows();
        let mut columns = Vec::with_capacity(self.schema.encoded_width());
        for spec in &self.schema.columns {
            match &spec.kind {
                ColumnKind::Numeric => columns.push(EncodedColumn {
                    name: spec.name.clone(),
                    group: spec.group,
                    source: spec.name.clone(),
                }),
                ColumnKind::Categorical { categories } => {
                    columns.extend(categories.iter().map(|cat| EncodedColumn {
                        name: format!("{}={}", spec.name, cat),
                        group: spec.group,
                        source: spec.name.clone(),
                    }))
                }
            }
        }
        let width = columns.len();
        let mut values = vec![0.0; n * width];
        let mut offset = 0;
        for (spec, col) in self.schema.columns.iter().zip(&self.columns) {
            match (&spec.kind, col) {
                (ColumnKind::Numeric, RawColumn::Numeric(v)) => {
                    for (r, &x) in v.iter().enumerate() {
                        values[r * width + offset] = x;
                    }
                    offset += 1;
                }
                (ColumnKind::Categorical { categories }, RawColumn::Categorical(v)) => {
                    let k = categories.len();
                    for (r, cell) in v.iter().enumerate() {
                        let row = &mut values[r * width + offset..r * width + offset + k];
                        match cell {
                            None => row.fill(f64::NAN),
                            Some(value) => {
                                let hit = categories.iter().position(|c| c == value).ok_or_else(|| {
                                    Error::Data(format!("unseen category {value:?} in column {:?} (row {r})", spec.name))
                                })?;
                                row[hit] = 1.0;
                            }
                        }
                    }
                    offset += k;
                }
                _ => return Err(Error::Data(format!("column {:?} does not match its declared kind", spec.name))),
            }
        }
        LabeledDataset::new(columns, values, self.labels.clone(), self.order_index.clone())
    }

    /// Writes the dataset in the CSV layout accepted by [`ingest_csv`]:
    /// order column first, features in schema order, label last.
    pub fn write_csv<W: Write>(&self, writer: W, label_column: &str, order_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![order_column.to_string()];
        header.extend(self.schema.columns.iter().map(|c| c.name.clone()));
        header.push(label_column.to_string());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            record.clear();
            record.push(self.order_index[r].to_string());
            for col in &self.columns {
                record.push(match col {
                    RawColumn::Numeric(v) if v[r].is_nan() => String::new(),
                    RawColumn::Numeric(v) => v[r].to_string(),
                    RawColumn::Categorical(v) => v[r].clone().unwrap_or_default(),
                });
            }
            record.push(self.labels[r].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, label_column: &str, order_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), label_column, order_column)
    }
}

/// Reads a headered, comma-separated UTF-8 file. Empty cells become missing.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &FeatureSchema, label_column: &str, order_column: &str) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema, label_column, order_column)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, label_column: &str, order_column: &str) -> Result<RawDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    };
    let feature_pos: Vec<usize> = schema.columns.iter().map(|c| find(&c.name)).collect::<Result<_>>()?;
    let label_pos = find(label_column)?;
    let order_pos = find(order_column)?;

    let mut columns: Vec<RawColumn> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => RawColumn::Numeric(Vec::new()),
            ColumnKind::Categorical { .. } => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();
    let mut order_index = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // Data rows are numbered from 1, matching a spreadsheet view minus the header.
        let row = i + 1;
        let cell = |pos: usize| record.get(pos).unwrap_or("").trim();

        labels.push(match cell(label_pos) {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Data(format!("row {row}: label {other:?} is not 0 or 1"))),
        });
        let order = cell(order_pos);
        order_index.push(
            order
                .parse::<i64>()
                .map_err(|_| Error::Data(format!("row {row}, column {order_column:?}: {order:?} is not an integer")))?,
        );
        for ((spec, &pos), col) in schema.columns.iter().zip(&feature_pos).zip(&mut columns) {
            let text = cell(pos);
            match col {
                RawColumn::Numeric(v) => v.push(if text.is_empty() {
                    f64::NAN
                } else {
                    text.parse::<f64>()
                        .ok()
                        .filter(|x| !x.is_nan())
                        .ok_or_else(|| Error::Data(format!("row {row}, column {:?}: {text:?} is not numeric", spec.name)))?
                }),
                RawColumn::Categorical(v) => v.push((!text.is_empty()).then(|| text.to_string())),
            }
        }
    }
    RawDataset::new(schema.clone(), columns, labels, order_index)
}

/// An encoded matrix column and the raw column it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub group: FeatureGroup,
    pub source: String,
}

/// Encoded, purely numeric dataset. Immutable once built.
///
/// Equality is bitwise on the values, so two datasets with missing cells in
/// the same places compare equal.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    columns: Vec<EncodedColumn>,
    /// Row-major `n_rows * n_features`.
    values: Vec<f64>,
    labels: Vec<u8>,
    order_index: Vec<i64>,
}

impl LabeledDataset {
    pub fn new(columns: Vec<EncodedColumn>, values: Vec<f64>, labels: Vec<u8>, order_index: Vec<i64>) -> Result<Self> {
        let n = labels.len();
        if order_index.len() != n || values.len() != n * columns.len() {
            return Err(Error::Data(format!(
                "shape mismatch: {} labels, {} order values, {} cells for {} columns",
                n,
                order_index.len(),
                values.len(),
                columns.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if order_index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("order index must be strictly increasing".into()));
        }
        let mut names = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !names.insert(c.name.as_str())) {
            return Err(Error::Schema(format!("duplicate encoded column {:?}", dup.name)));
        }
        Ok(LabeledDataset {
            columns,
            values,
            labels,
            order_index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn order_index(&self) -> &[i64] {
        &self.order_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn fraud_rate(&self) -> f64 {
        fraud_rate(&self.labels)
    }

    pub fn n_fraud(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Stable identifier of the encoded column layout (names and groups).
    pub fn fingerprint(&self) -> String {
        schema_fingerprint(&self.columns)
    }

    /// Contiguous block of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> LabeledDataset {
        let w = self.n_features();
        LabeledDataset {
            columns: self.columns.clone(),
            values: self.values[start * w..end * w].to_vec(),
            labels: self.labels[start..end].to_vec(),
            order_index: self.order_index[start..end].to_vec(),
        }
    }

    /// Chronological split: train gets the first `floor(train_fraction * N)` rows.
    pub fn time_split(&self, train_fraction: f64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Argument(format!("train fraction {train_fraction} outside (0, 1)")));
        }
        let train_size = (train_fraction * self.n_rows() as f64).floor() as usize;
        self.split_at(train_size)
    }

    /// Chronological split with an explicit train size.
    pub fn split_at(&self, train_size: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        let n = self.n_rows();
        if train_size == 0 || train_size >= n {
            return Err(Error::Argument(format!(
                "split of {n} rows at {train_size} leaves an empty train or test side"
            )));
        }
        Ok((self.slice_rows(0, train_size), self.slice_rows(train_size, n)))
    }

    /// Keeps the columns whose group belongs to the scenario, in schema order.
    pub fn select_scenario(&self, scenario: Scenario) -> Result<LabeledDataset> {
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| scenario.contains(self.columns[j].group))
            .collect();
        if keep.is_empty() {
            return Err(Error::Config(format!("scenario {scenario} selects no columns")));
        }
        Ok(self.select_columns(&keep))
    }

    pub fn select_columns(&self, keep: &[usize]) -> LabeledDataset {
        let n = self.n_rows();
        let mut values = Vec::with_capacity(n * keep.len());
        for r in 0..n {
            let row = self.row(r);
            values.extend(keep.iter().map(|&j| row[j]));
        }
        LabeledDataset {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            values,
            labels: self.labels.clone(),
            order_index: self.order_index.clone(),
        }
    }
}

impl PartialEq for LabeledDataset {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.labels == other.labels
            && self.order_index == other.order_index
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn schema_fingerprint(columns: &[EncodedColumn]) -> String {
    let mut hasher = Sha256::new();
    for c in columns {
        hasher.update(c.name.as_bytes());
        hasher.update([0x1f]);
        hasher.update(c.group.as_str().as_bytes());
        hasher.update([0x1e]);
    }
    hasher.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

fn fraud_rate(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().map(|&l| l as f64).sum::<f64>() / labels.len() as f64
}
