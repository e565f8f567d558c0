use std::path::Path;

use crate::agent::{Mode, ReflectorKind};
use crate::constitution::Category;
use crate::metrics::RunMetrics;

use super::report::{render_csv, render_markdown, ReportRow};
use super::{run_once, HarnessConfig, HarnessError};

/// Cells of an ablation sweep. Every cell runs on the same task list and
/// backend; only the named setting changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationSpec {
    /// (r_freq, s_freq) pairs.
    pub cells: Vec<(u32, u32)>,
    /// Category sets removed end to end, one cell each.
    pub knockouts: Vec<Vec<Category>>,
    /// Adds a ReAct row to the knockout table for reference.
    pub react_reference: bool,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            cells: vec![(5, 5), (5, 10), (5, 20), (10, 5), (10, 10), (10, 20)],
            knockouts: vec![
                vec![Category::Abstract],
                vec![Category::Error],
                vec![Category::Progress],
                Category::ALL.to_vec(),
            ],
            react_reference: true,
        }
    }
}

/// `"5:5,10:20"`.
pub fn parse_cells(text: &str) -> Result<Vec<(u32, u32)>, HarnessError> {
    let bad = |item: &str| HarnessError::Usage(format!("bad ablation cell `{item}` (expected r_freq:s_freq)"));
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (r, s) = item.split_once(':').ok_or_else(|| bad(item))?;
            Ok((
                r.trim().parse().map_err(|_| bad(item))?,
                s.trim().parse().map_err(|_| bad(item))?,
            ))
        })
        .collect()
}

/// `"abstract,error+progress"`: cells separated by commas, categories
/// within a cell by `+`.
pub fn parse_knockouts(text: &str) -> Result<Vec<Vec<Category>>, HarnessError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|cell| {
            let mut set: Vec<Category> = cell
                .split('+')
                .map(|c| c.parse::<Category>().map_err(HarnessError::Usage))
                .collect::<Result<_, _>>()?;
            set.sort();
            set.dedup();
            Ok(set)
        })
        .collect()
}

fn title(c: Category) -> &'static str {
    match c {
        Category::Abstract => "Abstract",
        Category::Error => "Error",
        Category::Progress => "Progress",
    }
}

pub fn knockout_label(set: &[Category]) -> String {
    format!("(-) {}", set.iter().map(|c| title(*c)).collect::<Vec<_>>().join(", "))
}

fn slug(set: &[Category]) -> String {
    set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("-")
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub grid: Vec<(String, RunMetrics)>,
    pub knockouts: Vec<(String, RunMetrics)>,
}

impl AblationReport {
    pub fn grid_rows(&self) -> Vec<ReportRow> {
        self.grid
            .iter()
            .map(|(l, m)| ReportRow::from_metrics(l.clone(), m))
            .collect()
    }

    pub fn knockout_rows(&self) -> Vec<ReportRow> {
        self.knockouts
            .iter()
            .map(|(l, m)| ReportRow::from_metrics(l.clone(), m))
            .collect()
    }

    pub fn markdown(&self) -> String {
        let mut out = String::new();
        if !self.grid.is_empty() {
            out.push_str("## Reflection and summarization frequency\n\n");
            out.push_str(&render_markdown("(r_freq, s_freq)", &self.grid_rows()));
        }
        if !self.knockouts.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("## Reflection categories\n\n");
            out.push_str(&render_markdown("Configuration", &self.knockout_rows()));
        }
        out
    }
}

/// Runs every cell of `spec` under the base self-sustaining configuration
/// and writes `ablation.md` plus one CSV per table to the output directory.
pub fn execute_ablate(cfg: &HarnessConfig, spec: &AblationSpec) -> Result<AblationReport, HarnessError> {
    cfg.validate()?;
    if cfg.run.mode != Mode::SelfSustaining {
        return Err(HarnessError::Config {
            field: "run.mode".into(),
            reason: "ablations vary a self_sustaining run".into(),
        });
    }
    if spec.cells.is_empty() && spec.knockouts.is_empty() {
        return Err(HarnessError::Usage("ablation spec has no cells".into()));
    }
    let root = &cfg.output.out_dir;
    let seed = cfg.run.seed;
    let run_cell = |cell: HarnessConfig, name: &str| -> Result<RunMetrics, HarnessError> {
        let dir = root.join("cells").join(name);
        let art = run_once(&cell, seed, &dir)?;
        log::info!("{name}: {}", art.summary());
        Ok(art.metrics)
    };

    let mut report = AblationReport {
        grid: Vec::new(),
        knockouts: Vec::new(),
    };
    for &(r, s) in &spec.cells {
        let mut cell = cfg.clone();
        cell.run.r_freq = r;
        cell.run.s_freq = s;
        cell.validate()?;
        let label = format!("({r}, {s})");
        let metrics = run_cell(cell, &format!("r{r}-s{s}"))?;
        report.grid.push((label, metrics));
    }
    for set in &spec.knockouts {
        let mut cell = cfg.clone();
        cell.run.categories = Category::ALL.into_iter().filter(|c| !set.contains(c)).collect();
        let metrics = run_cell(cell, &format!("minus-{}", slug(set)))?;
        report.knockouts.push((knockout_label(set), metrics));
    }
    if spec.react_reference && !spec.knockouts.is_empty() {
        let mut cell = cfg.clone();
        cell.run.mode = Mode::React;
        cell.run.reflector = ReflectorKind::None;
        let metrics = run_cell(cell, "react")?;
        report.knockouts.push(("ReAct".into(), metrics));
    }
    write(root, "ablation.md", &report.markdown())?;
    if !report.grid.is_empty() {
        write(root, "ablation-grid.csv", &render_csv(&report.grid_rows())?)?;
    }
    if !report.knockouts.is_empty() {
        write(root, "ablation-knockout.csv", &render_csv(&report.knockout_rows())?)?;
    }
    Ok(report)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_six_cells() {
        let spec = AblationSpec::default();
        assert_eq!(spec.cells, parse_cells("5:5,5:10,5:20,10:5,10:10,10:20").unwrap());
    }

    #[test]
    fn knockout_parsing_and_labels() {
        let sets = parse_knockouts("abstract, progress+error+abstract").unwrap();
        assert_eq!(sets[0], [Category::Abstract]);
        assert_eq!(knockout_label(&sets[1]), "(-) Abstract, Error, Progress");
        assert!(parse_knockouts("memory").is_err());
        assert!(parse_cells("5-5").is_err());
    }
}
