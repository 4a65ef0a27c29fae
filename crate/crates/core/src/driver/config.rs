//! Flat `key = value` run configuration.
//!
//! Keys match the command-line flags (`tol`, `mesh-n`, ...); underscores and
//! dashes are interchangeable. `#` starts a comment.

use std::path::{Path, PathBuf};

use super::{Experiment, InitialCondition, Mode, RunConfig};
use crate::error::{AmotError, Result};
use crate::velocity::{FieldKind, VelocityField};

/// Optional settings from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<FieldKind>,
    pub mode: Option<Mode>,
    pub tol: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub theta: Option<f64>,
    pub tau0: Option<f64>,
    pub tfinal: Option<f64>,
    pub mesh_n: Option<usize>,
    pub snapshot_every: Option<usize>,
    pub out: Option<PathBuf>,
    pub velocity: Option<VelocityField>,
    pub ic_box: Option<InitialCondition>,
    pub max_iterations: Option<usize>,
}

impl Overrides {
    /// Fields set in `higher` win.
    pub fn merge(self, higher: Overrides) -> Overrides {
        Overrides {
            experiment: higher.experiment.or(self.experiment),
            mode: higher.mode.or(self.mode),
            tol: higher.tol.or(self.tol),
            alpha: higher.alpha.or(self.alpha),
            epsilon: higher.epsilon.or(self.epsilon),
            sigma: higher.sigma.or(self.sigma),
            theta: higher.theta.or(self.theta),
            tau0: higher.tau0.or(self.tau0),
            tfinal: higher.tfinal.or(self.tfinal),
            mesh_n: higher.mesh_n.or(self.mesh_n),
            snapshot_every: higher.snapshot_every.or(self.snapshot_every),
            out: higher.out.or(self.out),
            velocity: higher.velocity.or(self.velocity),
            ic_box: higher.ic_box.or(self.ic_box),
            max_iterations: higher.max_iterations.or(self.max_iterations),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("'{v}': {e}"))
        }
        let key = key.replace('_', "-");
        match key.as_str() {
            "experiment" => self.experiment = Some(value.parse().map_err(|e: AmotError| e.to_string())?),
            "mode" => self.mode = Some(value.parse().map_err(|e: AmotError| e.to_string())?),
            "tol" => self.tol = Some(num(value)?),
            "alpha" => self.alpha = Some(num(value)?),
            "epsilon" => self.epsilon = Some(num(value)?),
            "sigma" => self.sigma = Some(num(value)?),
            "theta" => self.theta = Some(num(value)?),
            "tau0" => self.tau0 = Some(num(value)?),
            "tfinal" => self.tfinal = Some(num(value)?),
            "mesh-n" => self.mesh_n = Some(num(value)?),
            "snapshot-every" => self.snapshot_every = Some(num(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "velocity" => self.velocity = Some(VelocityField::parse_affine(value).map_err(|e| e.to_string())?),
            "max-iterations" => self.max_iterations = Some(num(value)?),
            "ic-box" => self.ic_box = Some(InitialCondition::parse_box(value).map_err(|e| e.to_string())?),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Builds the run configuration on top of the experiment preset.
    pub fn into_config(self) -> Result<RunConfig> {
        let kind = self.experiment.unwrap_or(FieldKind::Sheering);
        let mut exp = Experiment::preset(kind);
        match kind {
            FieldKind::Custom => {
                exp.field = self
                    .velocity
                    .ok_or_else(|| AmotError::InvalidArgument("the custom experiment needs a velocity".into()))?;
            }
            _ if self.velocity.is_some() => {
                return Err(AmotError::InvalidArgument(format!(
                    "velocity can only be set for the custom experiment, not '{kind}'"
                )))
            }
            _ => {}
        }
        if let Some(ic) = self.ic_box {
            exp.initial = ic;
        }
        if let Some(e) = self.epsilon {
            exp.epsilon = e;
        }
        if let Some(t) = self.tfinal {
            exp.t_final = t;
        }
        let mut cfg = RunConfig::new(exp, self.mode.unwrap_or_default());
        let a = &mut cfg.amot;
        if let Some(v) = self.tol {
            a.tol = v;
        }
        if let Some(v) = self.alpha {
            a.alpha = v;
        }
        if let Some(v) = self.theta {
            a.theta = v;
        }
        if let Some(v) = self.tau0 {
            a.tau0 = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.mesh_n {
            cfg.mesh_n = v;
        }
        if let Some(v) = self.snapshot_every {
            cfg.snapshot_every = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        cfg.out_dir = self.out;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses config text; `path` only labels errors.
pub fn parse_config(text: &str, path: &Path) -> Result<Overrides> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| AmotError::Config {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
        let value = value.trim().trim_matches('"');
        o.set(key.trim(), value).map_err(err)?;
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# run\nexperiment = expanding\ntol = 1e-2  # looser\nmesh_n = 16\nsnapshot-every=0\n\n";
        let o = parse_config(text, Path::new("x.cfg")).unwrap();
        assert_eq!(o.experiment, Some(FieldKind::Expanding));
        assert_eq!(o.tol, Some(1e-2));
        assert_eq!(o.mesh_n, Some(16));
        let cfg = o.into_config().unwrap();
        assert_eq!(cfg.experiment.initial, InitialCondition::square(0.3));
        assert_eq!(cfg.snapshot_every, 0);
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_config("tol = 1e-3\nbogus = 2\n", Path::new("a.cfg")).unwrap_err();
        assert!(matches!(e, AmotError::Config { line: 2, .. }), "{e}");
        let e = parse_config("tol 1e-3\n", Path::new("a.cfg")).unwrap_err();
        assert!(matches!(e, AmotError::Config { line: 1, .. }));
    }

    #[test]
    fn later_overrides_win() {
        let file = parse_config("tol = 0.1\ntheta = 0.5\n", Path::new("f")).unwrap();
        let flags = Overrides {
            tol: Some(0.01),
            ..Overrides::default()
        };
        let m = file.merge(flags);
        assert_eq!(m.tol, Some(0.01));
        assert_eq!(m.theta, Some(0.5));
    }

    #[test]
    fn custom_needs_velocity() {
        let o = parse_config("experiment = custom\n", Path::new("f")).unwrap();
        assert!(o.into_config().is_err());
        let o = parse_config(
            "experiment = custom\nvelocity = 1,0,0,0,0,0\nic-box = -0.5,0.5,-0.5,0.5\n",
            Path::new("f"),
        )
        .unwrap();
        let cfg = o.into_config().unwrap();
        assert_eq!(cfg.experiment.field.at(0.3, 0.3), [1.0, 0.0]);
        let o = parse_config("velocity = 1,0,0,0,0,0\n", Path::new("f")).unwrap();
        assert!(o.into_config().is_err());
    }

    #[test]
    fn tfinal_sets_step_cap() {
        let o = parse_config("tfinal = 0.6\n", Path::new("f")).unwrap();
        let cfg = o.into_config().unwrap();
        assert!((cfg.amot.tau_max - 0.06).abs() < 1e-15);
    }
}
