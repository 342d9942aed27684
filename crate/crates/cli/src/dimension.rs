use std::io::Write;

use anyhow::{anyhow, bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use ntnsim_core::dimensioning::{
    default_scs_for, fronthaul_bit_rate, fronthaul_control_rate, fronthaul_data_rate, latency_budget, midhaul_bit_rate,
    midhaul_control_rate, midhaul_peak_rate, standard_prb_count, AirInterfaceConfig, Direction, InterfaceClass,
};

use crate::Format;

#[derive(Debug, Args)]
pub struct DimensionArgs {
    #[arg(long)]
    pub bandwidth_mhz: f64,
    /// Defaults to the smallest spacing that defines the bandwidth.
    #[arg(long)]
    pub scs_khz: Option<u32>,
    /// Defaults to the standard maximum PRB count for the bandwidth and spacing.
    #[arg(long)]
    pub prb: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub layers: u32,
    /// qpsk, 16qam, 64qam, 256qam, or bits per symbol.
    #[arg(long, default_value = "64qam")]
    pub modulation: String,
    /// dl or ul.
    #[arg(long, default_value = "dl")]
    pub direction: String,
    /// Bits per I or Q sample.
    #[arg(long, default_value_t = 14)]
    pub bitwidth: u32,
    /// Print the table as text (default) or JSON.
    #[arg(long)]
    pub format: Option<Format>,
}

pub fn parse_modulation(s: &str) -> anyhow::Result<u32> {
    let bits = match s.to_ascii_lowercase().as_str() {
        "qpsk" => 2,
        "16qam" => 4,
        "64qam" => 6,
        "256qam" => 8,
        other => other.parse().map_err(|_| anyhow!("unknown modulation {other:?}"))?,
    };
    Ok(bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub quantity: String,
    pub bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub class: InterfaceClass,
    pub max_one_way_s: Option<f64>,
    pub window_s: Option<(f64, f64)>,
    pub loop_window_s: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTable {
    pub air: AirInterfaceConfig,
    pub rates: Vec<RateRow>,
    pub budgets: Vec<BudgetRow>,
}

impl DimensionTable {
    pub fn rate(&self, quantity: &str) -> Option<f64> {
        self.rates.iter().find(|r| r.quantity == quantity).map(|r| r.bps)
    }
}

pub fn air_config(a: &DimensionArgs) -> anyhow::Result<AirInterfaceConfig> {
    if !(a.bandwidth_mhz > 0.0 && a.bandwidth_mhz.is_finite()) {
        bail!("--bandwidth-mhz must be positive, got {}", a.bandwidth_mhz);
    }
    let scs = match a.scs_khz {
        Some(s) => s,
        None => default_scs_for(a.bandwidth_mhz).ok_or_else(|| anyhow!("no standard subcarrier spacing for {} MHz; pass --scs-khz", a.bandwidth_mhz))?,
    };
    let prb = match a.prb {
        Some(p) => p,
        None => standard_prb_count(a.bandwidth_mhz, scs)
            .ok_or_else(|| anyhow!("no standard PRB count for {} MHz at {scs} kHz; pass --prb", a.bandwidth_mhz))?,
    };
    let direction: Direction = a.direction.parse()?;
    let mut cfg = AirInterfaceConfig::new(a.bandwidth_mhz, scs, prb)
        .with_layers(a.layers)
        .with_modulation(parse_modulation(&a.modulation)?)
        .with_direction(direction);
    cfg.bitwidth = a.bitwidth;
    cfg.validate().context("invalid air interface")?;
    Ok(cfg)
}

pub fn dimension_table(cfg: &AirInterfaceConfig) -> anyhow::Result<DimensionTable> {
    let rates = vec![
        ("fronthaul_data", fronthaul_data_rate(cfg)?),
        ("fronthaul_control", fronthaul_control_rate(cfg)),
        ("fronthaul", fronthaul_bit_rate(cfg)?),
        ("midhaul_peak", midhaul_peak_rate(cfg)),
        ("midhaul_control", midhaul_control_rate(cfg)),
        ("midhaul", midhaul_bit_rate(cfg)),
    ]
    .into_iter()
    .map(|(q, r)| RateRow { quantity: q.to_string(), bps: r.as_bps() })
    .collect();
    let budgets = [InterfaceClass::Ofh, InterfaceClass::F1U, InterfaceClass::F1C, InterfaceClass::E2, InterfaceClass::A1]
        .into_iter()
        .map(|c| {
            let b = latency_budget(c);
            BudgetRow { class: c, max_one_way_s: b.max_one_way_s, window_s: b.tolerance_window_s, loop_window_s: b.loop_window_s }
        })
        .collect();
    Ok(DimensionTable { air: cfg.clone(), rates, budgets })
}

fn human_rate(bps: f64) -> String {
    if bps >= 1e9 {
        format!("{:.2} Gbps", bps / 1e9)
    } else {
        format!("{:.3} Mbps", bps / 1e6)
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn human_time(s: f64) -> String {
    if s.is_infinite() {
        "inf".into()
    } else if s >= 1.0 {
        format!("{} s", trim(s))
    } else if s >= 1e-3 {
        format!("{} ms", trim(s * 1e3))
    } else {
        format!("{} us", trim(s * 1e6))
    }
}

fn human_window(w: Option<(f64, f64)>) -> String {
    w.map_or("-".into(), |(a, b)| format!("{}..{}", human_time(a), human_time(b)))
}

pub fn write_table(t: &DimensionTable, out: &mut dyn Write) -> std::io::Result<()> {
    let a = &t.air;
    writeln!(
        out,
        "air interface: {} MHz, {} kHz, {} PRB, {} layer(s), {} bits/symbol, {:?}",
        a.bandwidth_mhz, a.scs_khz, a.n_prb, a.n_layers, a.modulation_order, a.direction
    )?;
    writeln!(out)?;
    writeln!(out, "{:<20} {:>18} {:>14}", "quantity", "bps", "rate")?;
    for r in &t.rates {
        writeln!(out, "{:<20} {:>18.0} {:>14}", r.quantity, r.bps, human_rate(r.bps))?;
    }
    writeln!(out)?;
    writeln!(out, "{:<8} {:>12} {:>16} {:>16}", "class", "max one-way", "tolerance", "loop")?;
    for b in &t.budgets {
        writeln!(
            out,
            "{:<8} {:>12} {:>16} {:>16}",
            b.class.as_str(),
            b.max_one_way_s.map_or("-".into(), human_time),
            human_window(b.window_s),
            human_window(b.loop_window_s)
        )?;
    }
    Ok(())
}

pub fn cmd_dimension(a: &DimensionArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let table = dimension_table(&air_config(a)?)?;
    match a.format {
        Some(Format::Json) => writeln!(out, "{}", serde_json::to_string_pretty(&table)?)?,
        _ => write_table(&table, out)?,
    }
    Ok(())
}
