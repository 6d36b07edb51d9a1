//! Benchmark harness: random benefit instances solved by each engine under
//! a wall-clock limit.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use unitsel_core::ac::ac_rmap_with;
use unitsel_core::bench::{generate_instance, GenConfig, OutcomeMode};
use unitsel_core::circuit::Compiler;
use unitsel_core::objective::compose_objective;
use unitsel_core::oracle::{brute_rmap, DEFAULT_BUDGET};
use unitsel_core::order::minfill_order;
use unitsel_core::ve::VeSolver;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Engines {
    pub brute: bool,
    pub ve: bool,
    pub ac: bool,
}

impl Engines {
    pub const ALL: Engines = Engines { brute: true, ve: true, ac: true };

    /// Parses `ve,ac,brute`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut e = Engines::default();
        for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match t {
                "brute" => e.brute = true,
                "ve" => e.ve = true,
                "ac" => e.ac = true,
                _ => return Err(format!("unknown engine `{t}` (expected brute, ve or ac)")),
            }
        }
        Ok(e)
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    /// Capped at `n - 1` for each `n`.
    pub p: usize,
    pub instances: u32,
    /// Instance `i` uses seed `seed + i`.
    pub seed: u64,
    pub engines: Engines,
    pub timeout: Duration,
    pub jobs: usize,
    pub outcome_mode: OutcomeMode,
}

impl BenchConfig {
    pub fn gen_config(&self, n: usize, i: u32) -> GenConfig {
        GenConfig { n, p: self.p.min(n.saturating_sub(1)).max(1), seed: self.seed.wrapping_add(i as u64), outcome_mode: self.outcome_mode }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRecord {
    pub seed: u64,
    pub n: usize,
    pub n_prime: usize,
    pub u_count: usize,
    /// Width of the constrained elimination order on the objective model.
    pub tw: usize,
    /// Variables in the objective model.
    pub model_vars: usize,
    pub done_ve: bool,
    pub time_ve: Option<f64>,
    pub ve_size: Option<u64>,
    pub done_ac: bool,
    pub time_ac: Option<f64>,
    pub ac_nodes: Option<usize>,
    pub ac_edges: Option<usize>,
    /// Operation counter of the circuit solve.
    pub ac_ops: Option<u64>,
    pub done_brute: bool,
    pub value_ve: Option<f64>,
    pub value_ac: Option<f64>,
    pub value_brute: Option<f64>,
    /// `None` when fewer than two engines finished.
    pub agree: Option<bool>,
    pub error: Option<String>,
}

pub fn values_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Runs every requested engine on one instance. Failures land in
/// `error` instead of aborting.
pub fn run_instance(cfg: &BenchConfig, n: usize, i: u32) -> BenchRecord {
    let gen = cfg.gen_config(n, i);
    let mut rec = BenchRecord { seed: gen.seed, n, ..Default::default() };
    let inst = match generate_instance(&gen, 0) {
        Ok(inst) => inst,
        Err(e) => {
            rec.error = Some(format!("generate: {e}"));
            return rec;
        }
    };
    rec.n_prime = inst.scm.n_prime();
    rec.u_count = inst.roles.units.len();
    let model = match compose_objective(&inst.scm.network, &inst.objective) {
        Ok(m) => m,
        Err(e) => {
            rec.error = Some(format!("objective: {e}"));
            return rec;
        }
    };
    let net = &model.network;
    rec.model_vars = net.len();
    let plan = minfill_order(net, &model.units);
    rec.tw = plan.width;
    let mut errors = Vec::new();

    if cfg.engines.ve {
        let start = Instant::now();
        let deadline = start + cfg.timeout;
        let stop = || Instant::now() >= deadline;
        match VeSolver::new(net).with_plan(&plan).with_interrupt(&stop).rmap(&model.units, &model.e1, &model.e2) {
            Ok(r) => {
                rec.done_ve = true;
                rec.time_ve = Some(start.elapsed().as_secs_f64());
                rec.ve_size = Some(r.stats.ve_size);
                rec.value_ve = Some(r.value);
            }
            Err(e) => errors.push(format!("ve: {e}")),
        }
    }
    if cfg.engines.ac {
        let start = Instant::now();
        let deadline = start + cfg.timeout;
        let stop = || Instant::now() >= deadline;
        let result = Compiler::new()
            .folding(true)
            .with_interrupt(&stop)
            .compile_network(net, &model.units, &plan)
            .and_then(|ac| ac_rmap_with(&ac, &model.units, &model.e1, &model.e2, &stop).map(|r| (ac, r)));
        match result {
            Ok((ac, r)) => {
                rec.done_ac = true;
                rec.time_ac = Some(start.elapsed().as_secs_f64());
                rec.ac_nodes = Some(ac.node_count());
                rec.ac_edges = Some(ac.edge_count());
                rec.ac_ops = Some(r.stats.ops);
                rec.value_ac = Some(r.value);
            }
            Err(e) => errors.push(format!("ac: {e}")),
        }
    }
    if cfg.engines.brute {
        match brute_rmap(net, &model.units, &model.e1, &model.e2, DEFAULT_BUDGET) {
            Ok(r) => {
                rec.done_brute = true;
                rec.value_brute = Some(r.value);
            }
            Err(e) => errors.push(format!("brute: {e}")),
        }
    }
    let values: Vec<f64> = [rec.value_ve, rec.value_ac, rec.value_brute].into_iter().flatten().collect();
    if values.len() >= 2 {
        rec.agree = Some(values.iter().all(|&v| values_agree(v, values[0])));
    }
    if !errors.is_empty() {
        rec.error = Some(errors.join("; "));
    }
    rec
}

/// All instances for every `n`, ordered by `n` then instance index, run on
/// `cfg.jobs` worker threads.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRecord> {
    let tasks: Vec<(usize, u32)> = cfg.n_list.iter().flat_map(|&n| (0..cfg.instances).map(move |i| (n, i))).collect();
    let slots: Vec<Mutex<Option<BenchRecord>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.jobs.clamp(1, tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, i)) = tasks.get(k) else { break };
                let rec = run_instance(cfg, n, i);
                *slots[k].lock().unwrap() = Some(rec);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every task ran")).collect()
}

pub const CSV_HEADER: [&str; 15] = [
    "seed", "n", "n_prime", "u_count", "tw", "done_ve", "time_ve", "ve_size", "done_ac", "time_ac", "ac_nodes",
    "ac_edges", "value_ve", "value_ac", "agree",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn secs(x: Option<f64>) -> String {
    x.map_or_else(String::new, |t| format!("{t:.3}"))
}

fn value(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.17e}"))
}

fn mean<I: IntoIterator<Item = f64>>(xs: I) -> Option<f64> {
    let (sum, count) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Per-`n` means over instances that generated successfully; engine
/// columns average over instances that engine solved.
pub fn summary_rows(records: &[BenchRecord]) -> Vec<Vec<String>> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rs: Vec<&BenchRecord> = records.iter().filter(|r| r.n == n && r.n_prime > 0).collect();
            let f = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.3}"));
            let solved = |pick: fn(&BenchRecord) -> Option<f64>| mean(rs.iter().filter_map(|r| pick(r)));
            let compared: Vec<bool> = rs.iter().filter_map(|r| r.agree).collect();
            vec![
                "mean".to_string(),
                n.to_string(),
                f(mean(rs.iter().map(|r| r.n_prime as f64))),
                f(mean(rs.iter().map(|r| r.u_count as f64))),
                f(mean(rs.iter().map(|r| r.tw as f64))),
                rs.iter().filter(|r| r.done_ve).count().to_string(),
                f(solved(|r| r.time_ve)),
                f(solved(|r| r.ve_size.map(|x| x as f64))),
                rs.iter().filter(|r| r.done_ac).count().to_string(),
                f(solved(|r| r.time_ac)),
                f(solved(|r| r.ac_nodes.map(|x| x as f64))),
                f(solved(|r| r.ac_edges.map(|x| x as f64))),
                String::new(),
                String::new(),
                if compared.is_empty() { String::new() } else { compared.iter().all(|&a| a).to_string() },
            ]
        })
        .collect()
}

pub fn write_csv<W: std::io::Write>(out: W, records: &[BenchRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.n.to_string(),
            r.n_prime.to_string(),
            r.u_count.to_string(),
            r.tw.to_string(),
            r.done_ve.to_string(),
            secs(r.time_ve),
            opt(r.ve_size),
            r.done_ac.to_string(),
            secs(r.time_ac),
            opt(r.ac_nodes),
            opt(r.ac_edges),
            value(r.value_ve),
            value(r.value_ac),
            opt(r.agree),
        ])?;
    }
    for row in summary_rows(records) {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
