//! Project configuration: one JSON file naming the automaton, the system,
//! the certificates and the settings of every command. Relative paths are
//! resolved against the directory of the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automata::Automaton;
use crate::barrier::{GridSpec, LocalCertificate};
use crate::comparison::DEFAULT_PSI;
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::synthesis::{CegisConfig, Template};
use crate::system::{
    build_kuramoto_network, build_room_network, CustomSystemJson, InterconnectedSystem, KuramotoParams,
    LabelingFunction, LabelingJson, RoomParams,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Specification automaton (co-Büchi, as drawn for the specification).
    pub automaton: PathBuf,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    /// Overrides the labeling that comes with the system.
    #[serde(default)]
    pub labeling: Option<LabelingJson>,
    #[serde(default)]
    pub certificates: Vec<CertificateEntry>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Rooms {
        n: usize,
        #[serde(default)]
        params: RoomParams,
    },
    Kuramoto {
        n: usize,
        #[serde(default)]
        params: KuramotoParams,
    },
    /// Path of a custom system JSON file.
    Custom(PathBuf),
}

/// A certificate file and the partition key it serves. The key may be left
/// out when the file carries one.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateEntry {
    #[serde(default)]
    pub key: Option<String>,
    pub file: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub grid: GridSpec,
    /// `ψ` of the additive-to-max gain conversion, as a linear coefficient.
    pub psi: f64,
    /// Random states for the composed decrease check; 0 skips it.
    pub composed_samples: usize,
    pub composed_tolerance: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid: GridSpec::default(),
            psi: DEFAULT_PSI,
            composed_samples: 10_000,
            composed_tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// Either a dense template or an explicit one.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateSpec {
    Dense { degree: u32, bound: f64 },
    Explicit(Template),
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec::Dense { degree: 2, bound: 100.0 }
    }
}

impl TemplateSpec {
    pub fn build(&self, dim: usize) -> Template {
        match self {
            TemplateSpec::Dense { degree, bound } => Template::dense(dim, *degree, *bound),
            TemplateSpec::Explicit(t) => t.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub template: TemplateSpec,
    pub cegis: CegisConfig,
    /// Partition keys to synthesize for; the required ones when empty.
    pub keys: Vec<String>,
    /// Per-key local regions. Keys not listed take the labeled regions of
    /// the key projected onto the subsystem's coordinates.
    pub regions: BTreeMap<String, LocalRegions>,
    /// Grid points per axis when the input set is a box.
    pub input_points: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            template: TemplateSpec::default(),
            cegis: CegisConfig::default(),
            keys: Vec::new(),
            regions: BTreeMap::new(),
            input_points: 11,
        }
    }
}

/// `X_a` and `X_b` of one subsystem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalRegions {
    pub initial: Region,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Region,
}

/// Initial state of a rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Every component equal to the value.
    Constant(f64),
    Point(Vec<f64>),
    /// Every component drawn uniformly from `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Uniform over the first box of the proposition's region.
    Label(String),
}

impl InitialState {
    pub fn sample(&self, dim: usize, labeling: &LabelingFunction, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let x = match self {
            InitialState::Constant(v) => vec![*v; dim],
            InitialState::Point(p) => p.clone(),
            InitialState::Uniform { lo, hi } => {
                if !(lo <= hi) {
                    return Err(Error::Config(format!("x0 interval [{lo}, {hi}] is empty")));
                }
                (0..dim).map(|_| draw(rng, *lo, *hi)).collect()
            }
            InitialState::Label(p) => {
                let region = labeling.region_of(p)?;
                let b =
                    region.boxes().first().ok_or_else(|| Error::Config(format!("proposition {p} labels no state")))?;
                b.lo().iter().zip(b.hi()).map(|(l, h)| draw(rng, *l, *h)).collect()
            }
        };
        if x.len() != dim {
            return Err(Error::Config(format!("x0 has length {}, the system has {dim} states", x.len())));
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: InitialState,
    pub horizon: usize,
    pub seed: u64,
    /// Independent rollouts; run `k` uses stream `k` of the seed.
    pub runs: usize,
    /// Also write every state component to the trace CSV.
    pub full_state: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { x0: InitialState::Constant(0.0), horizon: 100, seed: 0, runs: 1, full_state: false }
    }
}

impl ProjectConfig {
    pub fn from_json_str(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut c: ProjectConfig = serde_json::from_str(s).map_err(|e| Error::Config(format!("project file: {e}")))?;
        c.base_dir = base_dir.into();
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The automaton as written in the file.
    pub fn automaton(&self) -> Result<Automaton> {
        Automaton::from_json_file(self.resolve(&self.automaton))
    }

    /// Replaces the network size of a builder system.
    pub fn set_n(&mut self, n: usize) -> Result<()> {
        match &mut self.system {
            Some(SystemConfig::Rooms { n: m, .. }) | Some(SystemConfig::Kuramoto { n: m, .. }) => {
                *m = n;
                Ok(())
            }
            _ => Err(Error::Config("--n applies to the rooms and kuramoto builders only".into())),
        }
    }

    /// The network and its labeling (the configured labeling wins).
    pub fn system(&self) -> Result<(InterconnectedSystem, Option<LabelingFunction>)> {
        let cfg = self.system.as_ref().ok_or_else(|| Error::Config("no system configured".into()))?;
        let (sys, labeling) = match cfg {
            SystemConfig::Rooms { n, params } => {
                let (s, l) = build_room_network(*n, *params)?;
                (s, Some(l))
            }
            SystemConfig::Kuramoto { n, params } => {
                let (s, l) = build_kuramoto_network(*n, params.clone())?;
                (s, Some(l))
            }
            SystemConfig::Custom(path) => {
                let p = self.resolve(path);
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let custom = CustomSystemJson::from_json_str(&text)?;
                (custom.build_network()?, custom.build_labeling()?)
            }
        };
        let labeling = match &self.labeling {
            Some(l) => Some(l.build()?),
            None => labeling,
        };
        Ok((sys, labeling))
    }

    /// Every configured certificate with its key string.
    pub fn certificates(&self) -> Result<Vec<(String, LocalCertificate)>> {
        self.certificates
            .iter()
            .map(|e| {
                let c = LocalCertificate::from_json_file(self.resolve(&e.file))?;
                let key = e
                    .key
                    .clone()
                    .or_else(|| c.key.clone())
                    .ok_or_else(|| Error::Config(format!("{} names no partition key", e.file.display())))?;
                Ok((key, c))
            })
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
