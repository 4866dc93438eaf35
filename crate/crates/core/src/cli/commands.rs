//! Bodies of the subcommands. Each one reads the project, writes its
//! artifacts under the output directory and prints a short summary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::config::{rng_for, ProjectConfig};
use super::{EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_SYNTHESIS};
use crate::automata::{build_switching, triplets_of, Acceptance, Automaton, Decomposition, PartitionKey};
use crate::barrier::{
    check_decrease_composed, compose, gamma_matrix, verify_local, ComposedCertificate, LocalCertificate,
    VerificationReport,
};
use crate::comparison::{check_small_gain, find_phi};
use crate::error::Error;
use crate::policy::{
    envelope, monitor_trace, simulate as rollout, write_envelope_csv, HybridPolicy, MonitorReport, NetworkController,
};
use crate::synthesis::{input_candidates, synthesize_cegis, Regions};
use crate::system::{InterconnectedSystem, LabelingFunction, Subsystem};

/// Command-line values that override the project file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid_resolution: Option<f64>,
    pub horizon: Option<usize>,
    pub n: Option<usize>,
}

/// Why a command stopped, with the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub stage: String,
    pub message: String,
}

impl Failure {
    pub fn config(stage: &str, e: impl fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, stage: stage.to_string(), message: e.to_string() }
    }

    pub fn check(stage: &str, msg: impl fmt::Display) -> Self {
        Failure { code: EXIT_CHECK_FAILED, stage: stage.to_string(), message: msg.to_string() }
    }

    pub fn synthesis(stage: &str, msg: impl fmt::Display) -> Self {
        Failure { code: EXIT_SYNTHESIS, stage: stage.to_string(), message: msg.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn cfg_err(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |e| Failure::config(stage, e)
}

fn prepared(cfg: &ProjectConfig, ov: &Overrides) -> std::result::Result<ProjectConfig, Failure> {
    let mut c = cfg.clone();
    if let Some(n) = ov.n {
        c.set_n(n).map_err(cfg_err("config"))?;
    }
    if let Some(h) = ov.grid_resolution {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Failure::config("config", format!("grid resolution {h} must be positive")));
        }
        c.verify.grid.step = h;
        c.synthesis.cegis.final_resolution = h;
        c.synthesis.cegis.initial_grid_resolution = c.synthesis.cegis.initial_grid_resolution.max(h);
    }
    if let Some(k) = ov.horizon {
        c.simulation.horizon = k;
    }
    if let Some(s) = ov.seed {
        c.verify.seed = s;
        c.simulation.seed = s;
    }
    if let Some(o) = &ov.out {
        c.output = o.clone();
    }
    Ok(c)
}

fn output_dir(cfg: &ProjectConfig, sub: &str) -> std::result::Result<PathBuf, Failure> {
    let dir = cfg.output_dir().join(sub);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::config("output", Error::io(&dir, e)))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::config("output", Error::io(path, e)))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Outcome {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::config("output", e))?;
    s.push('\n');
    write_text(path, &s)
}

/// File-name form of a partition key, e.g. `q0_q1_q1_q2`.
pub fn slug(key: &str) -> String {
    let mut out = String::new();
    for ch in key.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

/// The automaton the switching construction works on: a co-Büchi
/// specification is complemented, a Büchi file is taken as already
/// complemented.
pub fn specification(cfg: &ProjectConfig) -> crate::Result<Automaton> {
    let a = cfg.automaton()?;
    Ok(match a.acceptance() {
        Acceptance::Cobuchi => a.complement(),
        Acceptance::Buchi => a,
    })
}

fn labeling_only(cfg: &ProjectConfig) -> std::result::Result<Option<LabelingFunction>, Failure> {
    if cfg.system.is_some() {
        return Ok(cfg.system().map_err(cfg_err("system"))?.1);
    }
    cfg.labeling.as_ref().map(|l| l.build()).transpose().map_err(cfg_err("labeling"))
}

fn network(cfg: &ProjectConfig) -> std::result::Result<(InterconnectedSystem, Option<LabelingFunction>), Failure> {
    cfg.system().map_err(cfg_err("system"))
}

/// Looks a key up among the edges of `a`; spaces in `s` are ignored.
pub fn resolve_key(a: &Automaton, s: &str) -> std::result::Result<PartitionKey, Failure> {
    let wanted: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    for q in a.states() {
        for q2 in a.successors(q).map_err(cfg_err("automaton"))? {
            let k = PartitionKey::of(a, q, &q2).map_err(cfg_err("automaton"))?;
            if k.to_string() == wanted {
                return Ok(k);
            }
        }
    }
    Err(Failure::config("certificates", format!("{s} is not a partition key of the automaton")))
}

/// Certificates of one key, either one shared by all subsystems or one per
/// subsystem.
pub struct KeyGroup {
    pub key: PartitionKey,
    pub certs: Vec<Arc<LocalCertificate>>,
}

impl KeyGroup {
    pub fn network_locals(&self, n: usize) -> std::result::Result<Vec<Arc<LocalCertificate>>, Failure> {
        match self.certs.len() {
            1 => Ok(vec![self.certs[0].clone(); n]),
            m if m == n => Ok(self.certs.clone()),
            m => Err(Failure::config(
                "certificates",
                format!("key {} has {m} certificates for {n} subsystems", self.key),
            )),
        }
    }
}

pub fn key_groups(cfg: &ProjectConfig, a: &Automaton) -> std::result::Result<Vec<KeyGroup>, Failure> {
    let mut groups: Vec<KeyGroup> = Vec::new();
    for (key, cert) in cfg.certificates().map_err(cfg_err("certificates"))? {
        let key = resolve_key(a, &key)?;
        let cert = Arc::new(cert);
        match groups.iter_mut().find(|g| g.key == key) {
            Some(g) => g.certs.push(cert),
            None => groups.push(KeyGroup { key, certs: vec![cert] }),
        }
    }
    Ok(groups)
}

fn switching_json(a: &Automaton) -> crate::Result<serde_json::Value> {
    let sw = build_switching(a)?;
    let mut transitions = Vec::new();
    for s in sw.states() {
        for (p, t) in sw.transitions_from(s) {
            transitions.push(json!({"from": s.to_string(), "prop": p, "to": t.to_string()}));
        }
    }
    Ok(json!({
        "initial": sw.initial().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "states": sw.states().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "transitions": transitions,
    }))
}

pub fn decompose(cfg: &ProjectConfig, ov: &Overrides) -> Outcome {
    let cfg = prepared(cfg, ov)?;
    let a = specification(&cfg).map_err(cfg_err("automaton"))?;
    let labeling = labeling_only(&cfg)?;
    let d = Decomposition::compute(&a, labeling.as_ref()).map_err(cfg_err("decompose"))?;
    let dir = output_dir(&cfg, "decompose")?;
    write_json(&dir.join("fragments.json"), &d.fragments)?;
    write_json(&dir.join("fragments_by_prop.json"), &d.fragments_by_prop)?;
    write_json(&dir.join("triplets_by_prop.json"), &d.triplets_by_prop)?;
    let per_fragment: BTreeMap<&String, Vec<serde_json::Value>> = d
        .fragments_by_prop
        .iter()
        .map(|(p, fs)| (p, fs.iter().map(|f| json!({"fragment": f, "triplets": triplets_of(f)})).collect()))
        .collect();
    write_json(&dir.join("triplets_by_fragment.json"), &per_fragment)?;
    write_json(&dir.join("partitions.json"), &d.partitions)?;
    write_json(&dir.join("decomposition.json"), &d)?;
    write_json(&dir.join("switching.json"), &switching_json(&a).map_err(cfg_err("switching"))?)?;
    let sw = build_switching(&a).map_err(cfg_err("switching"))?;
    write_text(&dir.join("switching.dot"), &sw.to_dot())?;
    write_text(&dir.join("complement.dot"), &a.to_dot())?;

    println!("complement automaton: {} states, accepting {:?}", a.states().len(), a.finals());
    println!("run fragments ({}):", d.fragments.len());
    for f in &d.fragments {
        println!("  {f}");
    }
    println!("partition keys ({}):", d.partitions.len());
    for p in &d.partitions {
        let triplets: Vec<String> = p.triplets.iter().map(ToString::to_string).collect();
        let status = match p.feasible {
            Some(true) => "feasible",
            Some(false) => "infeasible",
            None => "unchecked",
        };
        println!("  {}  {}  {status}", p.key, triplets.join(" "));
    }
    if let Some(o) = &d.obligations {
        let keys: Vec<String> = o.required.iter().map(ToString::to_string).collect();
        println!("certificates required: {}", if keys.is_empty() { "none".into() } else { keys.join(", ") });
        let triplets: Vec<String> = d
            .partitions
            .iter()
            .filter(|p| o.required.contains(&p.key))
            .flat_map(|p| p.triplets.iter().map(ToString::to_string))
            .collect();
        match triplets.len() {
            0 => {}
            1 => println!("only triplet {} needs a certificate", triplets[0]),
            k => println!("{k} triplets need certificates: {}", triplets.join(", ")),
        }
        println!("initial propositions covered: {:?}", o.guaranteed);
        println!("initial propositions not covered: {:?}", o.unguaranteed);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Maps a composition error to the stage that raised it.
fn compose_stage(e: &Error) -> Option<&'static str> {
    match e {
        Error::SmallGainViolated { .. } | Error::SmallGainUndecided { .. } => Some("small-gain"),
        Error::NoScaling(_) => Some("scaling"),
        Error::LevelConditionViolated { .. } => Some("level condition"),
        _ => None,
    }
}

pub fn check_smallgain(cfg: &ProjectConfig, ov: &Overrides) -> Outcome {
    let cfg = prepared(cfg, ov)?;
    let a = specification(&cfg).map_err(cfg_err("automaton"))?;
    let (sys, _) = network(&cfg)?;
    let groups = key_groups(&cfg, &a)?;
    if groups.is_empty() {
        return Err(Failure::config("certificates", "no certificates configured"));
    }
    let mut summary = Vec::new();
    let mut failed = Vec::new();
    for g in &groups {
        let locals = g.network_locals(sys.n())?;
        let gm = gamma_matrix(&locals, sys.wiring(), cfg.verify.psi).map_err(cfg_err("gains"))?;
        let mut distinct: BTreeMap<String, usize> = BTreeMap::new();
        for (_, _, f) in gm.entries().filter(|(i, j, _)| i != j) {
            *distinct.entry(f.simplify().to_string()).or_default() += 1;
        }
        let verdict = check_small_gain(&gm);
        let (pass, detail) = match &verdict {
            Ok(()) => (true, String::new()),
            Err(e @ (Error::SmallGainViolated { .. } | Error::SmallGainUndecided { .. })) => (false, e.to_string()),
            Err(e) => return Err(Failure::config("small-gain", e)),
        };
        let phis = if pass {
            Some(
                find_phi(&gm).map_err(cfg_err("scaling"))?.iter().map(|p| p.simplify().to_string()).collect::<Vec<_>>(),
            )
        } else {
            None
        };
        println!("{}: {} gain entries", g.key, gm.entries().count());
        let mut diag: Vec<String> =
            gm.entries().filter(|(i, j, _)| i == j).map(|(_, _, f)| f.simplify().to_string()).collect();
        diag.dedup();
        println!("  kappa = {}", diag.join(", "));
        for (f, count) in &distinct {
            println!("  gamma = {f}  ({count} entries)");
        }
        println!("  small-gain condition: {}", if pass { "holds".to_string() } else { format!("fails: {detail}") });
        if !pass {
            failed.push(g.key.to_string());
        }
        summary.push(json!({
            "key": g.key.to_string(),
            "gains": distinct,
            "small_gain": pass,
            "detail": detail,
            "scalings": phis.map(|p| { let mut p = p; p.dedup(); p }),
        }));
    }
    let dir = output_dir(&cfg, "smallgain")?;
    write_json(&dir.join("smallgain.json"), &summary)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::check("small-gain", format!("condition fails for {}", failed.join(", "))))
    }
}

/// Distinct `(subsystem, certificate)` pairs of a network, with the first
/// block index using each.
fn distinct_pairs(
    sys: &InterconnectedSystem,
    locals: &[Arc<LocalCertificate>],
) -> Vec<(usize, Arc<Subsystem>, Arc<LocalCertificate>)> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for (i, c) in locals.iter().enumerate() {
        let s = sys.subsystem(i);
        let id = (Arc::as_ptr(s), Arc::as_ptr(c));
        if !seen.contains(&id) {
            seen.push(id);
            out.push((i, s.clone(), c.clone()));
        }
    }
    out
}

#[derive(Serialize)]
struct KeyVerification {
    key: String,
    local: Vec<(usize, bool)>,
    gains: Vec<String>,
    small_gain: Option<bool>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    composed_decrease: Option<bool>,
    failed_stage: Option<String>,
    message: Option<String>,
}

pub fn verify(cfg: &ProjectConfig, ov: &Overrides) -> Outcome {
    let cfg = prepared(cfg, ov)?;
    let a = specification(&cfg).map_err(cfg_err("automaton"))?;
    let (sys, _) = network(&cfg)?;
    let groups = key_groups(&cfg, &a)?;
    if groups.is_empty() {
        return Err(Failure::config("certificates", "no certificates configured"));
    }
    let dir = output_dir(&cfg, "verify")?;
    let mut results = Vec::new();
    for g in &groups {
        let name = slug(&g.key.to_string());
        let mut r = KeyVerification {
            key: g.key.to_string(),
            local: Vec::new(),
            gains: Vec::new(),
            small_gain: None,
            eps1: None,
            eps2: None,
            composed_decrease: None,
            failed_stage: None,
            message: None,
        };
        let fail = |r: &mut KeyVerification, stage: &str, msg: String| {
            if r.failed_stage.is_none() {
                r.failed_stage = Some(stage.to_string());
                r.message = Some(msg);
            }
        };
        let locals = g.network_locals(sys.n())?;
        println!("{}:", g.key);
        for (i, s, c) in distinct_pairs(&sys, &locals) {
            let report = verify_local(&c, &s, &cfg.verify.grid).map_err(cfg_err("local"))?;
            print!("{}", indent(&report.to_string()));
            write_text(
                &dir.join(format!("{name}_local_{i}.json")),
                &report.to_json_string().map_err(cfg_err("output"))?,
            )?;
            r.local.push((i, report.passed()));
            if !report.passed() {
                fail(&mut r, "local", format!("subsystem {i}: {}", failing_conditions(&report)));
            }
        }
        let gm = gamma_matrix(&locals, sys.wiring(), cfg.verify.psi).map_err(cfg_err("gains"))?;
        let mut gains: Vec<String> =
            gm.entries().filter(|(i, j, _)| i != j).map(|(_, _, f)| f.simplify().to_string()).collect();
        gains.sort();
        gains.dedup();
        println!("  gamma: {}", gains.join(", "));
        r.gains = gains;
        let composed = match compose(locals, None, sys.wiring(), cfg.verify.psi) {
            Ok(c) => {
                r.small_gain = Some(true);
                r.eps1 = Some(c.eps1);
                r.eps2 = Some(c.eps2);
                println!("  composed: eps1 = {}, eps2 = {}", c.eps1, c.eps2);
                Some(c)
            }
            Err(e) => match compose_stage(&e) {
                Some(stage) => {
                    r.small_gain = Some(stage != "small-gain");
                    println!("  composition fails at {stage}: {e}");
                    fail(&mut r, stage, e.to_string());
                    None
                }
                None => return Err(Failure::config("compose", e)),
            },
        };
        if let (Some(c), true) = (&composed, cfg.verify.composed_samples > 0) {
            let ctrl = NetworkController::from_certificates(&sys, &g.certs).map_err(cfg_err("controller"))?;
            let report = check_decrease_composed(
                c,
                &sys,
                |x| ctrl.input(&sys, x),
                cfg.verify.composed_samples,
                cfg.verify.seed,
                cfg.verify.composed_tolerance,
            )
            .map_err(cfg_err("composed decrease"))?;
            print!("{}", indent(&report.to_string()));
            write_text(
                &dir.join(format!("{name}_composed.json")),
                &report.to_json_string().map_err(cfg_err("output"))?,
            )?;
            r.composed_decrease = Some(report.passed());
            if !report.passed() {
                fail(&mut r, "composed decrease", failing_conditions(&report));
            }
        }
        match &r.failed_stage {
            None => println!("  PASS"),
            Some(stage) => println!("  FAIL at {stage}: {}", r.message.as_deref().unwrap_or("")),
        }
        results.push(r);
    }
    write_json(&dir.join("summary.json"), &results)?;
    match results.iter().find(|r| r.failed_stage.is_some()) {
        None => Ok(()),
        Some(r) => Err(Failure::check(
            r.failed_stage.as_deref().unwrap_or("verify"),
            format!("{}: {}", r.key, r.message.as_deref().unwrap_or("")),
        )),
    }
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}\n")).collect()
}

fn failing_conditions(r: &VerificationReport) -> String {
    r.conditions
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{} (worst slack {:.6e})", c.condition.name(), c.worst_slack))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Serialize)]
struct ManifestEntry {
    key: String,
    subsystem: usize,
    certificate: Option<String>,
    log: String,
    iterations: usize,
    counterexamples: usize,
    best_violation: f64,
    level_condition: bool,
    failure: Option<String>,
}

/// Local regions of `key` for block `i`: configured ones, or the labeled
/// regions projected onto the block's coordinates.
fn local_regions(
    cfg: &ProjectConfig,
    a: &Automaton,
    d: Option<&Decomposition>,
    labeling: Option<&LabelingFunction>,
    sys: &InterconnectedSystem,
    key: &PartitionKey,
    i: usize,
) -> std::result::Result<Regions, Failure> {
    let s = sys.subsystem(i);
    if let Some((_, r)) = cfg.synthesis.regions.iter().find(|(k, _)| resolve_key(a, k).is_ok_and(|k| k == *key)) {
        return Ok(Regions::for_subsystem(s, r.initial.clone(), r.unsafe_set.clone()));
    }
    let (Some(d), Some(l)) = (d, labeling) else {
        return Err(Failure::config(
            "regions",
            format!("no regions configured for {key} and no labeling to derive them"),
        ));
    };
    let part =
        d.partitions.iter().find(|p| p.key == *key).ok_or_else(|| {
            Failure::config("regions", format!("{key} is not a partition of the complement automaton"))
        })?;
    let offset: usize = (0..i).map(|j| sys.subsystem(j).state_dim).sum();
    let project = |label| -> crate::Result<_> { l.region_of_label(label)?.project(offset, s.state_dim) };
    let initial = project(&part.source_label).map_err(cfg_err("regions"))?;
    let unsafe_set = project(&part.target_label).map_err(cfg_err("regions"))?;
    Ok(Regions::for_subsystem(s, initial, unsafe_set))
}

pub fn synthesize(cfg: &ProjectConfig, ov: &Overrides) -> Outcome {
    let cfg = prepared(cfg, ov)?;
    let a = specification(&cfg).map_err(cfg_err("automaton"))?;
    let (sys, labeling) = network(&cfg)?;
    let d = match &labeling {
        Some(l) => Some(Decomposition::compute(&a, Some(l)).map_err(cfg_err("decompose"))?),
        None => None,
    };
    let keys: Vec<PartitionKey> = if cfg.synthesis.keys.is_empty() {
        d.as_ref()
            .and_then(|d| d.obligations.as_ref())
            .map(|o| o.required.clone())
            .ok_or_else(|| Failure::config("synthesis", "no keys configured and no labeling to derive them"))?
    } else {
        cfg.synthesis.keys.iter().map(|k| resolve_key(&a, k)).collect::<std::result::Result<_, _>>()?
    };
    if keys.is_empty() {
        println!("no certificates are required");
        return Ok(());
    }
    let cert_dir = output_dir(&cfg, "certificates")?;
    let log_dir = output_dir(&cfg, "synthesis")?;
    let mut distinct: Vec<usize> = Vec::new();
    for i in 0..sys.n() {
        if !distinct.iter().any(|&j| Arc::ptr_eq(sys.subsystem(i), sys.subsystem(j))) {
            distinct.push(i);
        }
    }
    let mut manifest = Vec::new();
    let mut first_failure: Option<Failure> = None;
    for key in &keys {
        for &i in &distinct {
            let s = sys.subsystem(i);
            let regions = local_regions(&cfg, &a, d.as_ref(), labeling.as_ref(), &sys, key, i)?;
            let template = cfg.synthesis.template.build(s.state_dim);
            let inputs = input_candidates(s, cfg.synthesis.input_points).map_err(cfg_err("inputs"))?;
            let stem =
                if distinct.len() == 1 { slug(&key.to_string()) } else { format!("{}_{i}", slug(&key.to_string())) };
            let outcome = match synthesize_cegis(&template, s, &regions, &inputs, &cfg.synthesis.cegis) {
                Ok(o) => o,
                Err(e @ Error::InfeasibleRegions(_)) => {
                    return Err(Failure::synthesis("regions", format!("{key}: {e}")))
                }
                Err(e) => return Err(Failure::config("synthesis", e)),
            };
            let log = log_dir.join(format!("{stem}_log.csv"));
            outcome.write_log_csv(&log).map_err(cfg_err("output"))?;
            write_json(&log_dir.join(format!("{stem}_counterexamples.json")), &outcome.counterexamples)?;
            let mut entry = ManifestEntry {
                key: key.to_string(),
                subsystem: i,
                certificate: None,
                log: log.file_name().unwrap().to_string_lossy().into_owned(),
                iterations: outcome.iterations,
                counterexamples: outcome.counterexamples.len(),
                best_violation: outcome.best_violation,
                level_condition: outcome.level_condition,
                failure: outcome.failure.clone(),
            };
            match outcome.certificate {
                Some(mut c) => {
                    c.key = Some(key.to_string());
                    c.name = Some(s.name.clone());
                    let file = format!("{stem}.json");
                    write_text(&cert_dir.join(&file), &c.to_json_string().map_err(cfg_err("output"))?)?;
                    println!(
                        "{key} / {}: certificate after {} iterations, {} counterexamples, B = {}",
                        s.name, outcome.iterations, entry.counterexamples, c.barrier
                    );
                    entry.certificate = Some(format!("certificates/{file}"));
                }
                None => {
                    let reason = outcome.failure.clone().unwrap_or_default();
                    println!(
                        "{key} / {}: no certificate after {} iterations (best violation {:.3e}): {reason}",
                        s.name, outcome.iterations, outcome.best_violation
                    );
                    first_failure.get_or_insert_with(|| {
                        Failure::synthesis(
                            "cegis",
                            format!(
                                "{key}: {} iterations, best violation {:.3e}: {reason}",
                                outcome.iterations, outcome.best_violation
                            ),
                        )
                    });
                }
            }
            manifest.push(entry);
        }
    }
    write_json(&log_dir.join("manifest.json"), &manifest)?;
    match first_failure {
        None => Ok(()),
        Some(f) => Err(f),
    }
}

/// The composed certificate of the first key whose `X_a` holds every block
/// of `x0`.
fn barrier_for<'a>(
    sys: &InterconnectedSystem,
    composed: &'a [(Vec<Arc<LocalCertificate>>, Option<ComposedCertificate>)],
    x0: &[f64],
) -> Option<&'a ComposedCertificate> {
    composed.iter().find_map(|(locals, c)| {
        let inside = (0..sys.n()).all(|i| locals[i].region_a.contains(sys.block(x0, i)));
        if inside {
            c.as_ref()
        } else {
            None
        }
    })
}

pub fn simulate(cfg: &ProjectConfig, ov: &Overrides) -> Outcome {
    let cfg = prepared(cfg, ov)?;
    if cfg.simulation.horizon == 0 {
        return Err(Failure::config("simulation", "the horizon must be at least 1"));
    }
    if cfg.simulation.runs == 0 {
        return Err(Failure::config("simulation", "at least one run is needed"));
    }
    let a = specification(&cfg).map_err(cfg_err("automaton"))?;
    let (sys, labeling) = network(&cfg)?;
    let labeling = labeling.ok_or_else(|| Failure::config("labeling", "simulation needs a labeling"))?;
    let groups = key_groups(&cfg, &a)?;
    let pairs: Vec<_> = groups.iter().map(|g| (g.key.clone(), g.certs.clone())).collect();
    let policy = HybridPolicy::from_certificates(&a, &sys, &pairs).map_err(cfg_err("controller"))?;
    let mut composed = Vec::new();
    for g in &groups {
        let locals = g.network_locals(sys.n())?;
        let c = match compose(locals.clone(), None, sys.wiring(), cfg.verify.psi) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("warning: no composed barrier for {}: {e}", g.key);
                None
            }
        };
        composed.push((locals, c));
    }
    let dir = output_dir(&cfg, "simulation")?;
    let runs = cfg.simulation.runs;
    let mut reports: Vec<MonitorReport> = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut rng = rng_for(cfg.simulation.seed, r as u64);
        let x0 = cfg.simulation.x0.sample(sys.state_dim(), &labeling, &mut rng).map_err(cfg_err("x0"))?;
        let barrier = barrier_for(&sys, &composed, &x0);
        let trace =
            rollout(&sys, &policy, &labeling, &x0, cfg.simulation.horizon, barrier).map_err(cfg_err("simulation"))?;
        let monitor = monitor_trace(&trace, &a, &labeling).map_err(cfg_err("monitor"))?;
        let suffix = if runs == 1 { String::new() } else { format!("_{r}") };
        trace
            .write_csv(dir.join(format!("trace{suffix}.csv")), cfg.simulation.full_state)
            .map_err(cfg_err("output"))?;
        write_envelope_csv(&trace, dir.join(format!("envelope{suffix}.csv"))).map_err(cfg_err("output"))?;
        let env = envelope(&trace);
        let lo = env.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = env.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        let bmax = trace.barrier.as_ref().map(|b| b.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        println!(
            "run {r}: {} steps, states in [{lo:.4}, {hi:.4}], final label {}, fallback steps {}, max barrier {}, specification {}",
            cfg.simulation.horizon,
            trace.labels.last().map(String::as_str).unwrap_or("?"),
            trace.fallback_steps.len(),
            bmax.map_or("n/a".into(), |b| format!("{b:.6}")),
            if monitor.pass { "satisfied" } else { "VIOLATED" }
        );
        reports.push(monitor);
    }
    write_json(&dir.join("monitor.json"), &reports)?;
    let failed: Vec<usize> = reports.iter().enumerate().filter(|(_, m)| !m.pass).map(|(i, _)| i).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::check("monitor", format!("specification violated in runs {failed:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("(q0,q1,{q1,q2})"), "q0_q1_q1_q2");
        assert_eq!(slug("(q0,q2,{q2,q3})"), "q0_q2_q2_q3");
    }

    #[test]
    fn failure_codes() {
        assert_eq!(Failure::config("x", "y").code, EXIT_CONFIG);
        assert_eq!(Failure::check("x", "y").code, EXIT_CHECK_FAILED);
        assert_eq!(Failure::synthesis("x", "y").code, EXIT_SYNTHESIS);
    }
}
