use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use nrm_core::algorithm::{csv_line, h2pialg_with, nlialg_with, BasisEvent, TraceRow, TRACE_HEADER};
use nrm_core::model::{load_instance, to_json, BusLineSpec, HubSpokeSpec};
use nrm_core::simulate::simulate_with;
use nrm_core::{solve_aa, value_iteration, AlgoConfig, Approximation, Instance, Mode, RunTrace, SimOptions, StopReason};
use serde_json::json;

use crate::manifest::{sidecar, InstanceRef, RunManifest, BUILD_ID};
use crate::{exit, report, AaArgs, AlgoName, Cli, Command, ExactArgs, GenArgs, ModeName, RunArgs, SimulateArgs, TuneArgs};

pub const BUILTIN_TOY: &str = "toy2leg";

pub fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Gen(a) => gen(cli, a),
        Command::Exact(a) => exact(cli, a),
        Command::Aa(a) => aa(cli, a),
        Command::Run(a) => run(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Report(a) => report::report(a),
    }
}

struct Session {
    command: &'static str,
    started: Instant,
}

impl Session {
    fn new(command: &'static str) -> Self {
        Session { command, started: Instant::now() }
    }

    fn manifest(
        &self,
        instance: InstanceRef,
        config: Option<AlgoConfig>,
        outputs: Vec<PathBuf>,
        summary: serde_json::Value,
    ) -> RunManifest {
        RunManifest {
            command: self.command.to_string(),
            argv: std::env::args().collect(),
            instance,
            config,
            outputs,
            build: BUILD_ID.to_string(),
            wall_s: self.started.elapsed().as_secs_f64(),
            summary,
        }
    }
}

/// Loads an instance file; a missing `toy2leg` or `toy2leg.json` means the bundled example.
fn resolve_instance(name: &str) -> Result<(Instance, Option<PathBuf>)> {
    let path = Path::new(name);
    if path.exists() {
        let inst = load_instance(path).with_context(|| format!("loading instance {name}"))?;
        return Ok((inst, Some(path.to_path_buf())));
    }
    let stem = path.file_stem().and_then(|s| s.to_str());
    if path.parent().is_none_or(|p| p.as_os_str().is_empty()) && stem == Some(BUILTIN_TOY) {
        info!("{name} not found; using the bundled two-leg instance");
        return Ok((Instance::toy2leg(), None));
    }
    bail!(nrm_core::NrmError::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("instance file {name} does not exist"),
    )))
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<u8> {
    let session = Session::new("gen");
    let seed = cli.seed.unwrap_or(0);
    let need = |v: Option<usize>, flag: &str| v.with_context(|| format!("{flag} is required"));
    let (inst, spec) = if a.toy {
        (Instance::toy2leg(), json!({ "kind": "toy2leg" }))
    } else if a.hub_spoke {
        let c = a.c.context("--c is required for --hub-spoke")?;
        let mut spec = HubSpokeSpec::new(need(a.locations, "--L")?, need(a.tau, "--tau")?, c, seed);
        if let Some(lf) = a.load_factor {
            spec.load_factor = lf;
        }
        (spec.generate()?, json!({ "kind": "hub_spoke", "spec": spec }))
    } else if a.bus_line {
        if a.caps.is_empty() {
            bail!(nrm_core::NrmError::InvalidArgument("--caps is required for --bus-line".into()));
        }
        let mut spec = BusLineSpec::new(a.caps.clone(), need(a.tau, "--tau")?, seed);
        spec.fare_classes = a.classes;
        if let Some(lf) = a.load_factor {
            spec.load_factor = lf;
        }
        (spec.generate()?, json!({ "kind": "bus_line", "spec": spec }))
    } else {
        bail!(nrm_core::NrmError::InvalidArgument("choose one of --hub-spoke, --bus-line or --toy".into()));
    };
    let text = to_json(&inst);
    match &a.out {
        None => {
            println!("{text}");
        }
        Some(out) => {
            fs::write(out, format!("{text}\n")).with_context(|| format!("writing {}", out.display()))?;
            let mut iref = InstanceRef::new(&inst, Some(out));
            iref.spec = Some(spec);
            let m = session.manifest(iref, None, vec![out.clone()], json!({}));
            m.save(&sidecar(out))?;
            info!("wrote {} ({} legs, {} products)", out.display(), inst.num_legs(), inst.num_products());
        }
    }
    Ok(exit::OK)
}

fn exact(_cli: &Cli, a: &ExactArgs) -> Result<u8> {
    let session = Session::new("exact");
    let (inst, path) = resolve_instance(&a.instance)?;
    let vt = value_iteration(&inst)?;
    let v = vt.initial_value();
    println!("{v}");
    if let Some(table) = &a.table {
        let file = File::create(table).with_context(|| format!("creating {}", table.display()))?;
        let mut w = BufWriter::new(file);
        vt.write_to(&mut w)?;
        w.flush()?;
        let m = session.manifest(InstanceRef::new(&inst, path.as_deref()), None, vec![table.clone()], json!({ "v1": v }));
        m.save(&sidecar(table))?;
    }
    Ok(exit::OK)
}

/// Defaults, then the config file, then flags.
fn effective_config(cli: &Cli, tune: &TuneArgs, mode: Option<ModeName>) -> Result<AlgoConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            AlgoConfig::from_json(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => AlgoConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeName::Standalone => Mode::Standalone,
            ModeName::Addon => Mode::Addon,
        };
    }
    if tune.max_wall.is_some() {
        cfg.max_wall_s = tune.max_wall;
    }
    if let Some(k) = tune.max_k {
        cfg.max_k = k;
    }
    if let Some(v) = tune.omega_gap {
        cfg.omega_gap = v;
    }
    if let Some(v) = tune.omega_policy {
        cfg.omega_policy = v;
    }
    if let Some(v) = tune.omega_pgap {
        cfg.omega_pgap = v;
    }
    if let Some(n) = tune.sim_n_max {
        cfg.sim_n_max = n;
        cfg.sim_n_min = cfg.sim_n_min.min(n);
    }
    if tune.exact_subproblems.is_some() {
        cfg.exact_subproblems = tune.exact_subproblems;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn save_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn aa(cli: &Cli, a: &AaArgs) -> Result<u8> {
    let session = Session::new("aa");
    let (inst, path) = resolve_instance(&a.instance)?;
    let cfg = effective_config(cli, &a.tune, None)?;
    create_dir(&a.out_dir)?;
    let res = solve_aa(&inst, &cfg)?;
    let approx_path = a.out_dir.join("aa.json");
    let trace_path = a.out_dir.join("trace.csv");
    res.approx.save(&approx_path)?;
    RunTrace { rows: vec![res.trace.clone()] }.save_csv(&trace_path)?;
    println!("{TRACE_HEADER}");
    println!("{}", csv_line(&res.trace));
    let summary = json!({
        "method": "AA",
        "K": 0,
        "z_b": res.z_b,
        "zhat": res.zhat,
        "zbar": res.zbar,
        "rbar": res.sim.rbar,
        "se": res.sim.se,
        "n": res.sim.n,
        "truncated": res.truncated,
    });
    let m = session.manifest(InstanceRef::new(&inst, path.as_deref()), Some(cfg), vec![approx_path, trace_path], summary);
    m.save(&a.out_dir.join("manifest.json"))?;
    Ok(if res.truncated { exit::TRUNCATED } else { exit::OK })
}

/// Appends each trace row to the CSV file and stdout as soon as it exists,
/// so a run cut short still leaves its progress behind.
struct TraceSink {
    file: BufWriter<File>,
    failed: Option<std::io::Error>,
}

impl TraceSink {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut sink = TraceSink { file: BufWriter::new(file), failed: None };
        sink.write_line(TRACE_HEADER);
        println!("{TRACE_HEADER}");
        Ok(sink)
    }

    fn write_line(&mut self, line: &str) {
        if self.failed.is_some() {
            return;
        }
        if let Err(e) = writeln!(self.file, "{line}").and_then(|_| self.file.flush()) {
            self.failed = Some(e);
        }
    }

    fn push(&mut self, row: &TraceRow) {
        let line = csv_line(row);
        println!("{line}");
        info!("K={} Zhat={:.4} Rbar={:.4} rows={}", row.k, row.zhat, row.rbar, row.rows_total);
        self.write_line(&line);
    }

    fn finish(self) -> Result<()> {
        match self.failed {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

fn run(cli: &Cli, a: &RunArgs) -> Result<u8> {
    let session = Session::new("run");
    let (inst, path) = resolve_instance(&a.instance)?;
    let cfg = effective_config(cli, &a.tune, a.mode)?;
    create_dir(&a.out_dir)?;
    let trace_path = a.out_dir.join("trace.csv");
    let mut sink = TraceSink::create(&trace_path)?;
    let mut on_row = |r: &TraceRow| sink.push(r);
    let res = match a.algo {
        AlgoName::H2pialg => h2pialg_with(&inst, &cfg, &mut on_row)?,
        AlgoName::Nlialg => nlialg_with(&inst, &cfg, &mut on_row)?,
    };
    sink.finish()?;

    let approx_path = a.out_dir.join("approx.json");
    let best_path = a.out_dir.join("best.json");
    let events_path = a.out_dir.join("events.json");
    res.approx.save(&approx_path)?;
    res.best.save(&best_path)?;
    save_json(&events_path, &res.events)?;
    let mut outputs = vec![trace_path, approx_path, best_path, events_path];
    if let Some(aa) = &res.aa {
        let aa_path = a.out_dir.join("aa.json");
        aa.approx.save(&aa_path)?;
        outputs.push(aa_path);
    }

    let algo = match a.algo {
        AlgoName::H2pialg => "h2pialg",
        AlgoName::Nlialg => "nlialg",
    };
    let mode = match cfg.mode {
        Mode::Standalone => "standalone",
        Mode::Addon => "addon",
    };
    let last = res.trace.last();
    let summary = json!({
        "method": format!("{algo}-{mode}"),
        "K": res.approx.num_bases(),
        "stop": res.stop,
        "truncated": res.truncated,
        "zhat": last.map(|r| r.zhat),
        "zbar": res.upper_bound(),
        "best_rbar": res.trace.best_rbar(),
        "max_flow_residual": res.max_flow_residual,
        "events": res.events.len(),
    });
    log_events(&res.events);
    eprintln!("stopped: {} after K={}", res.stop, res.approx.num_bases());
    let m = session.manifest(InstanceRef::new(&inst, path.as_deref()), Some(cfg), outputs, summary);
    m.save(&a.out_dir.join("manifest.json"))?;
    Ok(if res.stop == StopReason::WallClock || res.truncated { exit::TRUNCATED } else { exit::OK })
}

fn log_events(events: &[BasisEvent]) {
    for e in events {
        info!("basis {}: imbalance {:.3e}, Z {:.6} -> {:.6}", e.k, e.imbalance, e.z_before, e.z_after);
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    let session = Session::new("simulate");
    let (inst, path) = resolve_instance(&a.instance)?;
    let approx = Approximation::load(&a.approx).with_context(|| format!("loading {}", a.approx.display()))?;
    check_fits(&approx, &inst)?;
    let defaults = SimOptions::default();
    let n_max = a.n_max.unwrap_or(defaults.n_max);
    let opts = SimOptions {
        omega_policy: a.omega.unwrap_or(defaults.omega_policy),
        n_max,
        n_min: a.n_min.unwrap_or(defaults.n_min).min(n_max),
        keep_revenues: a.revenues.is_some(),
        ..defaults
    };
    let seed = cli.seed.unwrap_or(0);
    let sim = simulate_with(&inst, &approx, &opts, seed)?;
    println!("Rbar,Se,N");
    println!("{},{},{}", sim.rbar, sim.se, sim.n);
    if sim.undefined_ratio {
        eprintln!("warning: mean revenue is zero with positive spread; ran to n_max");
    }
    if let Some(out) = &a.revenues {
        let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
        let mut w = BufWriter::new(file);
        sim.write_revenues_csv(&mut w)?;
        w.flush()?;
        let summary = json!({ "rbar": sim.rbar, "se": sim.se, "n": sim.n, "seed": seed, "approx": a.approx });
        let m = session.manifest(InstanceRef::new(&inst, path.as_deref()), None, vec![out.clone()], summary);
        m.save(&sidecar(out))?;
    }
    Ok(exit::OK)
}

fn check_fits(approx: &Approximation, inst: &Instance) -> Result<()> {
    let legs_ok = approx.bases.iter().all(|b| b.beta.len() == inst.num_legs());
    if approx.horizon() != inst.horizon() || !legs_ok {
        bail!(nrm_core::NrmError::Validation(format!(
            "approximation has horizon {} but the instance has {} periods and {} legs",
            approx.horizon(),
            inst.horizon(),
            inst.num_legs()
        )));
    }
    Ok(())
}
