use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ntnsim_core::dimensioning::InterfaceClass;
use ntnsim_core::dynamics::events::EventKind;
use ntnsim_core::dynamics::run;
use ntnsim_core::placement::{option_profile, RicExtension, SplitOption};
use ntnsim_core::scenario::{load_scenario, Scenario};

use crate::{Format, EXIT_OK};

pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_JSON: &str = "compare.json";

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Two or more scenarios that differ only in split option and extension.
    pub scenarios: Vec<PathBuf>,
    /// Base scenario whose split option and extension are replaced per column.
    #[arg(long, conflicts_with = "scenarios", requires = "options")]
    pub scenario: Option<PathBuf>,
    /// Comma separated columns such as `1a,2a,2a/ext2`.
    #[arg(long, value_delimiter = ',')]
    pub options: Vec<String>,
    /// Writes compare.csv or compare.json here in addition to the text table.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// `split[/extension]`; `:` and `+` are accepted as separators too.
pub fn parse_option(s: &str) -> anyhow::Result<(SplitOption, RicExtension)> {
    let mut parts = s.trim().splitn(2, ['/', ':', '+']);
    let split: SplitOption = parts.next().unwrap_or_default().parse().map_err(|e: String| anyhow!(e))?;
    let ext = match parts.next() {
        Some(e) => e.parse().map_err(|e: String| anyhow!(e))?,
        None => RicExtension::None,
    };
    Ok((split, ext))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub label: String,
    pub split: SplitOption,
    pub extension: RicExtension,
    pub feasible: bool,
    pub availability: f64,
    pub violation_classes: BTreeSet<String>,
    pub feeder_handovers: u64,
    pub dual_feeder_events: u64,
    pub group_ue_handovers: u64,
    pub e2_reassignments: u64,
    pub leader_changes: u64,
    pub peak_feeder_gbps: f64,
    pub max_sat_power_w: f64,
    pub max_sat_compute: f64,
    pub requires_dual_feeder: bool,
    pub feeder_carries: BTreeSet<InterfaceClass>,
    pub link_classes: BTreeSet<InterfaceClass>,
    pub space_link_classes: BTreeSet<InterfaceClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub columns: Vec<Column>,
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}

impl Comparison {
    /// Row label followed by one cell per column.
    pub fn rows(&self) -> Vec<(&'static str, Vec<String>)> {
        let c = &self.columns;
        let row = |name, f: &dyn Fn(&Column) -> String| (name, c.iter().map(f).collect());
        vec![
            row("option", &|x| x.label.clone()),
            row("feasible", &|x| x.feasible.to_string()),
            row("availability", &|x| format!("{:.4}", x.availability)),
            row("violation_classes", &|x| join(&x.violation_classes)),
            row("feeder_handovers", &|x| x.feeder_handovers.to_string()),
            row("dual_feeder_events", &|x| x.dual_feeder_events.to_string()),
            row("group_ue_handovers", &|x| x.group_ue_handovers.to_string()),
            row("e2_reassignments", &|x| x.e2_reassignments.to_string()),
            row("leader_changes", &|x| x.leader_changes.to_string()),
            row("peak_feeder_gbps", &|x| format!("{:.3}", x.peak_feeder_gbps)),
            row("max_sat_power_w", &|x| format!("{:.1}", x.max_sat_power_w)),
            row("max_sat_compute", &|x| format!("{:.1}", x.max_sat_compute)),
            row("requires_dual_feeder", &|x| x.requires_dual_feeder.to_string()),
            row("feeder_carries", &|x| join(&x.feeder_carries)),
            row("link_classes", &|x| join(&x.link_classes)),
            row("space_link_classes", &|x| join(&x.space_link_classes)),
        ]
    }

    pub fn write_text(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let rows = self.rows();
        let label_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| rows.iter().map(|(_, cells)| cells[i].len()).max().unwrap_or(0))
            .collect();
        for (name, cells) in rows {
            write!(out, "{name:<label_w$}")?;
            for (cell, w) in cells.iter().zip(&widths) {
                write!(out, "  {cell:<w$}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut out = out;
        for (name, cells) in self.rows() {
            let quoted: Vec<String> = std::iter::once(name.to_string())
                .chain(cells)
                .map(|c| if c.contains([',', '"']) { format!("\"{}\"", c.replace('"', "\"\"")) } else { c })
                .collect();
            writeln!(out, "{}", quoted.join(","))?;
        }
        out.flush()
    }
}

/// Everything except name, split option and extension must match.
fn check_same_base(a: &Scenario, b: &Scenario, b_path: &str) -> anyhow::Result<()> {
    let mut b = b.clone();
    b.name = a.name.clone();
    b.placement.split = a.placement.split;
    b.placement.extension = a.placement.extension;
    if &b != a {
        bail!("{b_path} differs from the first scenario in more than split option and extension");
    }
    Ok(())
}

pub fn members(a: &CompareArgs) -> anyhow::Result<Vec<(String, Scenario)>> {
    if let Some(base) = &a.scenario {
        let sc = load_scenario(base)?;
        return a
            .options
            .iter()
            .map(|o| {
                let (split, ext) = parse_option(o)?;
                let mut s = sc.clone();
                s.placement.split = split;
                s.placement.extension = ext;
                s.validate().with_context(|| format!("option {o}"))?;
                Ok((o.trim().to_string(), s))
            })
            .collect();
    }
    if a.scenarios.len() < 2 {
        bail!("compare needs at least two scenario files or --scenario with --options");
    }
    let loaded = a
        .scenarios
        .iter()
        .map(|p| load_scenario(p).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    for (p, s) in a.scenarios.iter().zip(&loaded).skip(1) {
        check_same_base(&loaded[0], s, &p.display().to_string())?;
    }
    Ok(loaded
        .into_iter()
        .map(|s| {
            let label = if s.placement.extension == RicExtension::None {
                s.placement.split.to_string()
            } else {
                format!("{}/{}", s.placement.split, s.placement.extension)
            };
            (label, s)
        })
        .collect())
}

pub fn compare(members: &[(String, Scenario)]) -> anyhow::Result<Comparison> {
    let columns = members
        .par_iter()
        .map(|(label, sc)| {
            let out = run(sc).with_context(|| format!("running {label}"))?;
            let profile = option_profile(sc.placement.split, sc.placement.extension)?;
            let s = &out.summary;
            let switches = out
                .events
                .of_kind(EventKind::FeederHandoverStart)
                .filter(|e| e.payload.get("from").is_some_and(|v| !v.is_null()));
            Ok(Column {
                label: label.clone(),
                split: s.split,
                extension: s.extension,
                feasible: s.feasible,
                availability: s.availability,
                violation_classes: s.violation_time_fraction.keys().cloned().collect(),
                feeder_handovers: s.feeder_handovers,
                dual_feeder_events: switches.filter(|e| e.payload.get("dual") == Some(&true.into())).count() as u64,
                group_ue_handovers: s.event_counts[&EventKind::GroupUeHandover],
                e2_reassignments: s.e2_reassignments,
                leader_changes: s.event_counts[&EventKind::LeaderChanged],
                peak_feeder_gbps: s.peak_feeder_bps / 1e9,
                max_sat_power_w: s.max_sat_power_w,
                max_sat_compute: s.max_sat_compute,
                requires_dual_feeder: profile.requires_dual_feeder,
                feeder_carries: profile.feeder_carries,
                link_classes: s.link_classes.clone(),
                space_link_classes: s.space_link_classes.clone(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Comparison { columns })
}

pub fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    let cmp = compare(&members(a)?)?;
    cmp.write_text(stdout)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        match a.format {
            Format::Csv => cmp.write_csv(fs::File::create(dir.join(COMPARE_CSV))?)?,
            Format::Json => fs::write(dir.join(COMPARE_JSON), serde_json::to_string_pretty(&cmp)? + "\n")?,
        }
    }
    Ok(EXIT_OK)
}
