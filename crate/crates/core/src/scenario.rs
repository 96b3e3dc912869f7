//! TOML scenario files for the command-line drivers.
//!
//! ```toml
//! dim = 1
//! extents = [1.0]
//! gamma = 1.0
//! q = 2.0
//!
//! [operator]
//! kind = "full-strain"
//!
//! [density]
//! p = 2.0
//! lambda1 = 1.0
//!
//! [schedule]
//! eps = [0.125, 0.0625]
//!
//! [boundary]
//! u_faces = ["x1-", "x1+"]
//! v_faces = ["x1-", "x1+"]
//! u_datum = { constant = [0.0], linear = [[6.0]] }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{BulkDensity, HookeTensor};
use crate::energy::PsiSpec;
use crate::error::{Error, Result};
use crate::field::QuadraticField;
use crate::grid::{Face, Side};
use crate::limit::{
    bar_limit_minimum, limit_energy, JumpTemplate, LimitModel, LimitQuadrature, LimsupOptions,
    PhaseParams, RhoRule,
};
use crate::operator::{classify_ellipticity, FirstOrderOperator, DEFAULT_WITNESS_TOL};
use crate::solver::{EtaRule, GridRule, Initializer, Problem, SolverConfig, SweepOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    /// `full-strain`, `deviatoric` or `custom`.
    pub kind: String,
    /// Row-major matrix for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    /// Accept an operator that is not ℂ-elliptic.
    #[serde(default)]
    pub allow_non_c_elliptic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub p: f64,
    #[serde(default)]
    pub mu: f64,
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<Geometric>,
    #[serde(default = "default_eta")]
    pub eta: EtaRule,
    #[serde(default = "default_grid")]
    pub grid: GridRule,
}

fn default_eta() -> EtaRule {
    EtaRule::PowerP
}

fn default_grid() -> GridRule {
    GridRule::PerEps { cells_per_eps: 8.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub u_faces: Vec<Face>,
    pub u_datum: QuadraticField,
    #[serde(default)]
    pub v_faces: Vec<Face>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub start: Initializer,
    pub restart: Initializer,
    pub use_restart: bool,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            start: Initializer::Elastic,
            restart: Initializer::notched(),
            use_restart: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimsupSpec {
    pub rho_rule: RhoRule,
    pub quadrature: LimitQuadrature,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
    /// `--assert` fails when the last ratio leaves `[1 − tol, 1 + tol]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assert_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    /// Deterministic runtime column (all zeros).
    pub no_timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    pub extents: Vec<f64>,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "two")]
    pub q: f64,
    pub operator: OperatorSpec,
    pub density: DensitySpec,
    #[serde(default)]
    pub psi: PsiSpec,
    pub schedule: Schedule,
    pub boundary: Boundary,
    #[serde(default)]
    pub initializer: InitSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<JumpTemplate>,
    #[serde(default)]
    pub limsup: LimsupSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn config(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Re-labels a component error with the scenario key it came from.
fn at<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => config(format!("{section}.{name}"), reason),
        Error::DimensionMismatch { expected, got } => config(
            section,
            format!("dimension mismatch: expected {expected}, got {got}"),
        ),
        Error::Config { .. } => e,
        other => config(section, other.to_string()),
    })
}

impl Scenario {
    /// A 1D bar `(0, 1)` pulled to `u(1) = δ` with `v = 1` at both ends.
    pub fn bar(delta: f64) -> Self {
        Self {
            dim: 1,
            extents: vec![1.0],
            gamma: 1.0,
            q: 2.0,
            operator: OperatorSpec {
                kind: "full-strain".into(),
                matrix: None,
                allow_non_c_elliptic: false,
            },
            density: DensitySpec {
                p: 2.0,
                mu: 0.0,
                lambda1: 1.0,
                lambda2: 0.0,
            },
            psi: PsiSpec::default(),
            schedule: Schedule {
                eps: Some((3..=6).map(|k| 2f64.powi(-k)).collect()),
                geometric: None,
                eta: default_eta(),
                grid: default_grid(),
            },
            boundary: Boundary {
                u_faces: vec![Face::new(0, Side::Min), Face::new(0, Side::Max)],
                u_datum: QuadraticField::affine(vec![vec![delta]], &[0.0]),
                v_faces: vec![Face::new(0, Side::Min), Face::new(0, Side::Max)],
            },
            initializer: InitSpec::default(),
            solver: SolverConfig::default(),
            template: None,
            limsup: LimsupSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| config("<document>", e.message().to_string()))?;
        let s: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config(
                if key == "." { "<document>".into() } else { key },
                e.into_inner().message().to_string(),
            )
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical dump.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn operator(&self) -> Result<FirstOrderOperator> {
        let spec = &self.operator;
        match spec.kind.as_str() {
            "custom" => {
                let m = spec
                    .matrix
                    .as_ref()
                    .ok_or_else(|| config("operator.matrix", "required for custom operators"))?;
                at("operator", FirstOrderOperator::from_matrix(self.dim, m))
            }
            kind => {
                if spec.matrix.is_some() {
                    return Err(config(
                        "operator.matrix",
                        "only allowed for custom operators",
                    ));
                }
                FirstOrderOperator::from_name(kind, self.dim)
                    .map_err(|e| config("operator.kind", e.to_string()))
            }
        }
    }

    pub fn density(&self) -> Result<BulkDensity> {
        let d = &self.density;
        let hooke = at("density", HookeTensor::new(d.lambda1, d.lambda2, self.dim))?;
        at("density", BulkDensity::new(d.p, d.mu, hooke))
    }

    pub fn phase(&self) -> PhaseParams {
        PhaseParams {
            gamma: self.gamma,
            q: self.q,
            psi: self.psi,
        }
    }

    pub fn limit_model(&self) -> Result<LimitModel> {
        LimitModel::new(self.operator()?, self.density()?, self.phase())
    }

    pub fn eps_list(&self) -> Result<Vec<f64>> {
        let s = &self.schedule;
        let list = match (&s.eps, &s.geometric) {
            (Some(list), None) => list.clone(),
            (None, Some(g)) => {
                if !(g.start > 0.0 && g.ratio > 0.0 && g.ratio < 1.0) || g.count == 0 {
                    return Err(config(
                        "schedule.geometric",
                        "needs start > 0, 0 < ratio < 1 and count >= 1",
                    ));
                }
                (0..g.count)
                    .map(|k| g.start * g.ratio.powi(k as i32))
                    .collect()
            }
            _ => {
                return Err(config(
                    "schedule",
                    "give exactly one of `eps` and `geometric`",
                ))
            }
        };
        if list.is_empty() {
            return Err(config("schedule.eps", "schedule is empty"));
        }
        if list.iter().any(|e| !(*e > 0.0 && e.is_finite()))
            || list.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(config(
                "schedule.eps",
                "values must be positive and strictly decreasing",
            ));
        }
        Ok(list)
    }

    pub fn problem(&self) -> Result<Problem> {
        let p = Problem {
            extents: self.extents.clone(),
            op: self.operator()?,
            density: self.density()?,
            gamma: self.gamma,
            q: self.q,
            psi: self.psi,
            eta: self.schedule.eta,
            u_faces: self.boundary.u_faces.clone(),
            u_datum: self.boundary.u_datum.clone(),
            v_faces: self.boundary.v_faces.clone(),
        };
        at("boundary", p.validate())?;
        Ok(p)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            grid_rule: self.schedule.grid.clone(),
            initializer: self.initializer.start,
            restart: self
                .initializer
                .use_restart
                .then_some(self.initializer.restart),
            timing: !self.output.no_timing,
        }
    }

    pub fn limsup_options(&self) -> LimsupOptions {
        LimsupOptions {
            rho_rule: self.limsup.rho_rule,
            eta: self.schedule.eta,
            quadrature: self.limsup.quadrature,
            cells: self.limsup.cells.clone(),
        }
    }

    /// Predicted limit energy: the template's `D(u, 1)` when one is given,
    /// otherwise the bar minimum for a 1D problem pinned at both ends.
    pub fn prediction(&self) -> Result<Option<f64>> {
        let model = self.limit_model()?;
        if let Some(t) = &self.template {
            return Ok(Some(
                limit_energy(t, &model, &self.limsup.quadrature)?.total,
            ));
        }
        let faces = &self.boundary.u_faces;
        if self.dim == 1
            && faces.contains(&Face::new(0, Side::Min))
            && faces.contains(&Face::new(0, Side::Max))
        {
            let l = self.extents[0];
            let delta = self.boundary.u_datum.eval(&[l])[0] - self.boundary.u_datum.eval(&[0.0])[0];
            return Ok(Some(bar_limit_minimum(&model, l, delta)?.energy));
        }
        Ok(None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(config(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        if self.extents.len() != self.dim {
            return Err(config("extents", format!("expected {} entries", self.dim)));
        }
        if self.extents.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(config("extents", "must be positive"));
        }
        let op = self.operator()?;
        self.density()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config("gamma", "must be positive"));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(config("q", "must exceed 1"));
        }
        at("psi", self.psi.validate())?;
        self.eps_list()?;
        if let GridRule::Fixed { cells } = &self.schedule.grid {
            if cells.len() != self.dim || cells.contains(&0) {
                return Err(config(
                    "schedule.grid.cells",
                    format!("expected {} positive counts", self.dim),
                ));
            }
        }
        if self.boundary.u_datum.dim() != self.dim {
            return Err(config(
                "boundary.u_datum",
                format!("expected a {}-component field", self.dim),
            ));
        }
        at("boundary.u_datum", self.boundary.u_datum.validate())?;
        if self.boundary.u_faces.is_empty() {
            return Err(config(
                "boundary.u_faces",
                "at least one Dirichlet face is required",
            ));
        }
        if self
            .boundary
            .u_faces
            .iter()
            .chain(&self.boundary.v_faces)
            .any(|f| f.axis >= self.dim)
        {
            return Err(config("boundary", "face axis exceeds the dimension"));
        }
        at("solver", self.solver.validate())?;
        if let Some(t) = &self.template {
            if t.dim() != self.dim || t.extents != self.extents {
                return Err(config("template.extents", "must match the scenario box"));
            }
            at("template", t.validate())?;
        }
        if let Some(cells) = &self.limsup.cells {
            if cells.len() != self.dim || cells.contains(&0) {
                return Err(config(
                    "limsup.cells",
                    format!("expected {} positive counts", self.dim),
                ));
            }
        }
        if self.limsup.quadrature.points == 0 {
            return Err(config("limsup.quadrature.points", "must be at least 1"));
        }
        if !self.operator.allow_non_c_elliptic {
            let report = classify_ellipticity(&op, 2000, DEFAULT_WITNESS_TOL, 0)?;
            if !report.c_elliptic {
                return Err(config(
                    "operator.allow_non_c_elliptic",
                    format!(
                        "the {} operator in n = {} is not C-elliptic; set this flag to proceed",
                        op.name(),
                        self.dim
                    ),
                ));
            }
        }
        Ok(())
    }

    /// True when the operator is accepted only through the override flag.
    pub fn needs_ellipticity_warning(&self) -> Result<bool> {
        if !self.operator.allow_non_c_elliptic {
            return Ok(false);
        }
        Ok(!classify_ellipticity(&self.operator()?, 2000, DEFAULT_WITNESS_TOL, 0)?.c_elliptic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAR: &str = r#"
dim = 1
extents = [1.0]

[operator]
kind = "full-strain"

[density]
p = 2.0
lambda1 = 1.0

[schedule]
eps = [0.125, 0.0625]

[boundary]
u_faces = ["x1-", "x1+"]
v_faces = ["x1-", "x1+"]
u_datum = { constant = [0.0], linear = [[6.0]] }
"#;

    #[test]
    fn roundtrip_and_hash() {
        let s = Scenario::from_toml(BAR).unwrap();
        let dumped = s.to_toml();
        let again = Scenario::from_toml(&dumped).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.hash(), again.hash());
        assert_eq!(s.hash().len(), 16);
        let mut b = Scenario::bar(6.0);
        b.schedule.eps = Some(vec![0.125, 0.0625]);
        assert_eq!(b, s);
    }

    #[test]
    fn bar_prediction() {
        let p = Scenario::bar(6.0).prediction().unwrap().unwrap();
        assert!((p - (1.0 + 6.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((Scenario::bar(1.0).prediction().unwrap().unwrap() - 0.5).abs() < 1e-14);
    }

    fn key_of(text: &str) -> String {
        match Scenario::from_toml(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&BAR.replace("p = 2.0", "p = 0.5")), "density.p");
        assert_eq!(
            key_of(&BAR.replace("lambda1 = 1.0", "lambda1 = 1.0\nbogus = 3")),
            "density.bogus"
        );
        assert!(
            key_of(&BAR.replace("lambda1 = 1.0", "lambda1 = \"x\"")).starts_with("density.lambda1")
        );
        assert_eq!(
            key_of(&BAR.replace("[0.125, 0.0625]", "[0.0625, 0.125]")),
            "schedule.eps"
        );
        assert_eq!(
            key_of(&BAR.replace("full-strain", "shear")),
            "operator.kind"
        );
        assert_eq!(key_of(&BAR.replace("dim = 1", "dim = 2")), "extents");
        assert_eq!(
            key_of(&format!("{BAR}\n[solver]\ntol_rel = -1.0\n")),
            "solver.tol_rel"
        );
    }

    #[test]
    fn deviatoric_plane_needs_override() {
        let text = r#"
dim = 2
extents = [1.0, 1.0]

[operator]
kind = "deviatoric"

[density]
p = 2.0
lambda1 = 1.0

[schedule]
eps = [0.25]

[boundary]
u_faces = ["x2-"]
u_datum = { constant = [0.0, 0.0] }
"#;
        assert_eq!(key_of(text), "operator.allow_non_c_elliptic");
        let ok = text.replace(
            "kind = \"deviatoric\"",
            "kind = \"deviatoric\"\nallow_non_c_elliptic = true",
        );
        let s = Scenario::from_toml(&ok).unwrap();
        assert!(s.needs_ellipticity_warning().unwrap());
    }
}
