//! `appcast gen`: synthetic fleet generation.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use appcast_core::event::serialize_event;
use appcast_core::simulator::{generate_stream, SimConfig};

use crate::out::write_atomic;

#[derive(Args)]
pub struct GenArgs {
    /// Number of simulated devices.
    #[arg(long)]
    devices: usize,
    /// Days of stream per device.
    #[arg(long)]
    days: u32,
    /// Master seed; APPCAST_SEED overrides the default when unset.
    #[arg(long)]
    seed: Option<u64>,
    /// Event log destination (JSONL, one click per line).
    #[arg(long)]
    out: PathBuf,
    /// Persona dump destination; defaults to personas.json beside the log.
    #[arg(long)]
    personas: Option<PathBuf>,
}

pub fn exec(args: GenArgs) -> Result<()> {
    let seed = crate::resolve_seed(args.seed, None)?;
    let (events, personas) =
        generate_stream(seed, args.devices, args.days, &SimConfig::default())
            .context("generating stream")?;

    let mut log = String::new();
    for ev in &events {
        log.push_str(&serialize_event(ev));
        log.push('\n');
    }
    write_atomic(&args.out, log.as_bytes())?;

    let personas_path = args.personas.unwrap_or_else(|| {
        let dir = args.out.parent().map(PathBuf::from).unwrap_or_default();
        dir.join("personas.json")
    });
    let dump = serde_json::to_string_pretty(&personas).context("serializing personas")?;
    write_atomic(&personas_path, dump.as_bytes())?;

    let apps: BTreeSet<&str> = events.iter().map(|e| e.app.as_str()).collect();
    println!("events: {}", events.len());
    println!("devices: {}", personas.len());
    println!("distinct apps: {}", apps.len());
    println!("seed: {seed}");
    println!("log: {}", args.out.display());
    println!("personas: {}", personas_path.display());
    Ok(())
}
