use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use super::dataset::RawDataset;
use super::{parse_json_strict, DataError, Dataset, DatasetMeta};
use crate::systems::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Json,
    /// Trajectory CSV plus a `<file>.meta.json` sidecar.
    Csv,
}

impl DatasetFormat {
    /// `.csv` files are CSV, everything else is a JSON bundle.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Json,
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write(path: &Path, contents: &str) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `data` to `path` in the format implied by its extension.
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<(), DataError> {
    if let Some(i) = data.trajectories().iter().position(|t| !t.is_finite()) {
        return Err(DataError::Validation(format!("traj_id {i} contains non-finite values")));
    }
    match DatasetFormat::from_path(path) {
        DatasetFormat::Json => {
            let text = serde_json::to_string_pretty(data).expect("dataset serializes");
            write(path, &(text + "\n"))
        }
        DatasetFormat::Csv => {
            let meta = serde_json::to_string_pretty(data.meta()).expect("meta serializes");
            write(&sidecar(path), &(meta + "\n"))?;
            write(path, &to_csv(data))
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let context = path.display().to_string();
    match DatasetFormat::from_path(path) {
        DatasetFormat::Json => {
            let raw: RawDataset = parse_json_strict(&read(path)?, &context)?;
            Dataset::new(raw.meta, raw.trajectories)
        }
        DatasetFormat::Csv => {
            let meta_path = sidecar(path);
            let meta: DatasetMeta = parse_json_strict(&read(&meta_path)?, &meta_path.display().to_string())?;
            let trajectories = from_csv(&read(path)?, &meta, &context)?;
            Dataset::new(meta, trajectories)
        }
    }
}

fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["traj_id".to_string(), "k".to_string()];
    h.extend((0..n).map(|i| format!("x{i}")));
    h.extend((0..m).map(|i| format!("u{i}")));
    h
}

fn to_csv(data: &Dataset) -> String {
    let (n, m) = (data.meta().state_dim, data.meta().input_dim);
    let mut out = header(n, m).join(",");
    out.push('\n');
    for (id, t) in data.trajectories().iter().enumerate() {
        for (k, x) in t.states().iter().enumerate() {
            out.push_str(&format!("{id},{k}"));
            for v in x.iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            match t.inputs().get(k) {
                Some(u) => u.iter().for_each(|v| out.push_str(&format!(",{v:.16e}"))),
                None => (0..m).for_each(|_| out.push(',')),
            }
            out.push('\n');
        }
    }
    out
}

struct Row {
    id: usize,
    k: usize,
    x: DVector<f64>,
    u: Option<DVector<f64>>,
}

fn from_csv(text: &str, meta: &DatasetMeta, context: &str) -> Result<Vec<Trajectory>, DataError> {
    let (n, m) = (meta.state_dim, meta.input_dim);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_error = |line: u64, column: usize, message: String| DataError::Parse {
        context: context.to_string(),
        line: line as usize,
        column,
        message,
    };

    let found = reader
        .headers()
        .map_err(|e| parse_error(1, 0, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if found != header(n, m) {
        return Err(DataError::Validation(format!(
            "CSV header {:?} does not match meta ({n} states, {m} inputs)",
            found.join(",")
        )));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize, name: &str| {
            field(i)
                .parse::<usize>()
                .map_err(|e| parse_error(line, i + 1, format!("{name} {:?}: {e}", field(i))))
        };
        let id = int(0, "traj_id")?;
        let k = int(1, "k")?;
        if record.len() != 2 + n + m {
            return Err(DataError::Validation(format!(
                "traj_id {id}, k {k}: expected {} value columns ({n} states, {m} inputs), found {}",
                n + m,
                record.len().saturating_sub(2)
            )));
        }
        let float = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_error(line, i + 1, format!("{} {:?}: {e}", found[i], field(i))))
        };
        let x = (2..2 + n).map(float).collect::<Result<Vec<_>, _>>()?;
        let empty = (2 + n..2 + n + m).filter(|&i| field(i).is_empty()).count();
        let u = if empty == m {
            None
        } else if empty == 0 {
            Some(DVector::from_vec(
                (2 + n..2 + n + m).map(float).collect::<Result<Vec<_>, _>>()?,
            ))
        } else {
            return Err(DataError::Validation(format!(
                "traj_id {id}, k {k}: {} of {m} input values present",
                m - empty
            )));
        };
        rows.push(Row {
            id,
            k,
            x: DVector::from_vec(x),
            u,
        });
    }

    let mut trajectories = Vec::new();
    let mut rest = rows.as_slice();
    while let Some(first) = rest.first() {
        let id = first.id;
        if id != trajectories.len() {
            return Err(DataError::Validation(format!(
                "traj_id {id} out of order, expected {}",
                trajectories.len()
            )));
        }
        let len = rest.iter().take_while(|r| r.id == id).count();
        let (group, tail) = rest.split_at(len);
        rest = tail;
        let mut states = Vec::with_capacity(len);
        let mut inputs = Vec::with_capacity(len);
        for (expected_k, row) in group.iter().enumerate() {
            if row.k != expected_k {
                return Err(DataError::Validation(format!(
                    "traj_id {id}: sample index {} where {expected_k} was expected",
                    row.k
                )));
            }
            let last = expected_k + 1 == len;
            match (&row.u, last) {
                (Some(u), false) => inputs.push(u.clone()),
                (None, true) => {}
                (Some(_), true) => {
                    return Err(DataError::Validation(format!(
                        "traj_id {id}: final sample k {} must have empty input columns",
                        row.k
                    )))
                }
                (None, false) => {
                    return Err(DataError::Validation(format!(
                        "traj_id {id}: sample k {} is missing its inputs",
                        row.k
                    )))
                }
            }
            states.push(row.x.clone());
        }
        let t = Trajectory::new(states, inputs).map_err(|e| DataError::Validation(format!("traj_id {id}: {e}")))?;
        trajectories.push(t);
    }
    Ok(trajectories)
}
