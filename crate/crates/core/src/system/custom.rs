//! User-defined systems read from JSON, with dynamics written as expressions.
//!
//! ```json
//! {
//!   "subsystems": [{
//!     "state_region": [{"lo": [-2], "hi": [2]}],
//!     "internal_region": [{"lo": [-1], "hi": [1]}],
//!     "inputs": {"finite": [[-0.5], [0], [0.5]]},
//!     "update": ["0.5*x0 + u0 + 0.1*w0"]
//!   }],
//!   "wiring": "none"
//! }
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{
    Dynamics, IdentityOutput, InputSpec, InterconnectedSystem, LabelingFunction, OutputMap, Subsystem, Wiring,
};
use crate::error::{Error, Result};
use crate::geometry::Region;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubsystemJson {
    #[serde(default)]
    pub name: Option<String>,
    pub state_region: Region,
    #[serde(default = "Region::empty")]
    pub internal_region: Region,
    pub inputs: InputSpec,
    /// One expression per state component.
    pub update: Vec<String>,
    /// Output expressions in `x`; identity when absent.
    #[serde(default)]
    pub outputs: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledRegion {
    pub prop: String,
    pub region: Region,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelingJson {
    pub domain: Region,
    pub regions: Vec<LabeledRegion>,
    #[serde(default)]
    pub otherwise: Option<String>,
}

impl LabelingJson {
    pub fn build(&self) -> Result<LabelingFunction> {
        LabelingFunction::new(
            self.domain.clone(),
            self.regions.iter().map(|r| (r.prop.clone(), r.region.clone())).collect(),
            self.otherwise.clone(),
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CustomSystemJson {
    pub subsystems: Vec<SubsystemJson>,
    /// Repeat a single subsystem description this many times.
    #[serde(default)]
    pub replicate: Option<usize>,
    #[serde(default = "no_wiring")]
    pub wiring: Wiring,
    #[serde(default)]
    pub labeling: Option<LabelingJson>,
}

fn no_wiring() -> Wiring {
    Wiring::None
}

#[derive(Debug)]
struct ExprDynamics(Vec<Expr>);

impl Dynamics for ExprDynamics {
    fn step(&self, x: &[f64], w: &[f64], u: &[f64], next: &mut [f64]) {
        for (n, e) in next.iter_mut().zip(&self.0) {
            *n = e.eval(x, w, u);
        }
    }
}

#[derive(Debug)]
struct ExprOutput(Vec<Expr>);

impl OutputMap for ExprOutput {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.0) {
            *o = e.eval(x, &[], &[]);
        }
    }
}

impl SubsystemJson {
    pub fn build(&self, index: usize) -> Result<Subsystem> {
        let name = self.name.clone().unwrap_or_else(|| format!("subsystem{index}"));
        let nx = self.state_region.dim().ok_or_else(|| Error::InvalidSystem(format!("{name}: empty state region")))?;
        let nw = self.internal_region.dim().unwrap_or(0);
        let nu = self.inputs.dim();
        if self.update.len() != nx {
            return Err(Error::InvalidSystem(format!(
                "{name}: {} update expressions for a {nx}-dimensional state",
                self.update.len()
            )));
        }
        let exprs: Vec<Expr> = self.update.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?;
        for (k, e) in exprs.iter().enumerate() {
            let (ax, aw, au) = e.arity();
            if ax > nx || aw > nw || au > nu {
                return Err(Error::InvalidSystem(format!(
                    "{name}: update {k} reads x/w/u up to ({ax}, {aw}, {au}) but dimensions are ({nx}, {nw}, {nu})"
                )));
            }
        }
        let output: Arc<dyn OutputMap> = match &self.outputs {
            None => Arc::new(IdentityOutput(nx)),
            Some(src) => {
                let outs: Vec<Expr> = src.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?;
                if outs.iter().any(|e| {
                    let (ax, aw, au) = e.arity();
                    ax > nx || aw > 0 || au > 0
                }) {
                    return Err(Error::InvalidSystem(format!("{name}: outputs may only read x0..x{}", nx - 1)));
                }
                Arc::new(ExprOutput(outs))
            }
        };
        Subsystem::new(
            name,
            self.state_region.clone(),
            self.internal_region.clone(),
            self.inputs.clone(),
            output,
            Arc::new(ExprDynamics(exprs)),
        )
    }
}

impl CustomSystemJson {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn build_subsystems(&self) -> Result<Vec<Arc<Subsystem>>> {
        if self.subsystems.is_empty() {
            return Err(Error::InvalidSystem("no subsystems".into()));
        }
        match self.replicate {
            Some(n) => {
                if self.subsystems.len() != 1 {
                    return Err(Error::InvalidSystem("`replicate` needs exactly one subsystem description".into()));
                }
                let s = Arc::new(self.subsystems[0].build(0)?);
                Ok(vec![s; n])
            }
            None => self.subsystems.iter().enumerate().map(|(i, s)| s.build(i).map(Arc::new)).collect(),
        }
    }

    pub fn build_network(&self) -> Result<InterconnectedSystem> {
        InterconnectedSystem::new(self.build_subsystems()?, self.wiring.clone())
    }

    pub fn build_labeling(&self) -> Result<Option<LabelingFunction>> {
        self.labeling.as_ref().map(LabelingJson::build).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{
        "subsystems": [{
            "state_region": [{"lo": [-2], "hi": [2]}],
            "internal_region": [{"lo": [-1], "hi": [1]}],
            "inputs": {"finite": [[-0.5], [0], [0.5]]},
            "update": ["0.5*x0 + u0 + 0.1*w0"]
        }]
    }"#;

    #[test]
    fn toy_subsystem() {
        let c = CustomSystemJson::from_json_str(TOY).unwrap();
        let s = &c.build_subsystems().unwrap()[0];
        assert_eq!((s.state_dim, s.internal_dim, s.input_dim()), (1, 1, 1));
        let step = s.step(&[1.0], &[1.0], &[0.5]).unwrap();
        assert!((step.next[0] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let bad = TOY.replace("0.1*w0", "0.1*w3");
        let c = CustomSystemJson::from_json_str(&bad).unwrap();
        assert!(matches!(c.build_subsystems(), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn replicated_ring_matches_dimensions() {
        let src = r#"{
            "subsystems": [{
                "state_region": [{"lo": [0], "hi": [1]}],
                "internal_region": [{"lo": [0, 0], "hi": [1, 1]}],
                "inputs": {"box": {"lo": [0], "hi": [1]}},
                "update": ["0.5*x0 + 0.25*(w0 + w1) + 0*u0"]
            }],
            "replicate": 4,
            "wiring": "ring"
        }"#;
        let c = CustomSystemJson::from_json_str(src).unwrap();
        let net = c.build_network().unwrap();
        let next = net.step(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap();
        assert_eq!(next, vec![0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn wiring_dimension_mismatch_is_rejected() {
        let c = CustomSystemJson {
            wiring: Wiring::Complete,
            replicate: Some(3),
            ..CustomSystemJson::from_json_str(TOY).unwrap()
        };
        assert!(matches!(c.build_network(), Err(Error::InvalidSystem(_))));
    }
}
