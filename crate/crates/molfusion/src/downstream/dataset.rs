use std::path::Path;

use super::DownstreamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskType {
    Classification,
    Regression,
}

impl TaskType {
    pub fn name(&self) -> &'static str {
        match self {
            TaskType::Classification => "classification",
            TaskType::Regression => "regression",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskType> {
        match name {
            "classification" => Some(TaskType::Classification),
            "regression" => Some(TaskType::Regression),
            _ => None,
        }
    }
}

/// A property-prediction dataset: one row per molecule, one column per
/// task, empty cells for missing labels.
#[derive(Debug, Clone)]
pub struct TaskDataset {
    pub name: String,
    pub smiles: Vec<String>,
    /// N x K, row-per-molecule; None marks a missing label.
    pub labels: Vec<Vec<Option<f64>>>,
    pub task_names: Vec<String>,
    pub task_type: TaskType,
}

impl TaskDataset {
    pub fn n_molecules(&self) -> usize {
        self.smiles.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    /// Reads a CSV with a header row containing a `smiles` column; every
    /// other column is a task.
    pub fn from_csv(
        path: &Path,
        name: &str,
        task_type: TaskType,
    ) -> Result<TaskDataset, DownstreamError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(|e| DownstreamError::Dataset(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| DownstreamError::Dataset(e.to_string()))?
            .clone();
        let smiles_col = headers
            .iter()
            .position(|h| h == "smiles")
            .ok_or_else(|| DownstreamError::Dataset("missing `smiles` column".into()))?;
        let task_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != smiles_col)
            .map(|(_, h)| h.to_string())
            .collect();
        if task_names.is_empty() {
            return Err(DownstreamError::Dataset("no task columns".into()));
        }

        let mut smiles = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DownstreamError::Dataset(e.to_string()))?;
            let mut row = Vec::with_capacity(task_names.len());
            for (i, cell) in record.iter().enumerate() {
                if i == smiles_col {
                    continue;
                }
                let cell = cell.trim();
                if cell.is_empty() {
                    row.push(None);
                    continue;
                }
                let value: f64 = cell.parse().map_err(|_| {
                    DownstreamError::Dataset(format!(
                        "row {}: unparseable label {cell:?}",
                        line + 2
                    ))
                })?;
                if task_type == TaskType::Classification && value != 0.0 && value != 1.0 {
                    return Err(DownstreamError::Dataset(format!(
                        "row {}: classification label {value} not in {{0,1}}",
                        line + 2
                    )));
                }
                if !value.is_finite() {
                    return Err(DownstreamError::Dataset(format!(
                        "row {}: non-finite label",
                        line + 2
                    )));
                }
                row.push(Some(value));
            }
            smiles.push(record[smiles_col].trim().to_string());
            labels.push(row);
        }
        if smiles.is_empty() {
            return Err(DownstreamError::Dataset("dataset has no rows".into()));
        }
        Ok(TaskDataset {
            name: name.to_string(),
            smiles,
            labels,
            task_names,
            task_type,
        })
    }

    /// Labels of one task column, aligned with `smiles`.
    pub fn task_column(&self, task: usize) -> Vec<Option<f64>> {
        self.labels.iter().map(|row| row[task]).collect()
    }
}
