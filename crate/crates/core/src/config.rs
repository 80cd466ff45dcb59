//! Run configuration as `key = value` text.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::classical::ClassicalConfig;
use crate::error::{Error, Result};
use crate::qmcdm::TrainConfig;

/// Which detection maps a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Classical,
    Quantum,
    #[default]
    Fused,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Quantum => "quantum",
            Mode::Fused => "fused",
        }
    }

    pub fn needs_training(self) -> bool {
        self != Mode::Classical
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(Mode::Classical),
            "quantum" => Ok(Mode::Quantum),
            "fused" => Ok(Mode::Fused),
            other => Err(Error::Argument(format!(
                "unknown mode '{other}' (expected classical, quantum or fused)"
            ))),
        }
    }
}

/// Every tunable of a detection run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub mode: Mode,
    pub classical: ClassicalConfig,
    pub train: TrainConfig,
    /// Noise added to the input before detection; `None` leaves it untouched.
    pub snr_db: Option<f64>,
}

/// Keys accepted by [`RunConfig::set`], in echo order.
pub const KEYS: [&str; 22] = [
    "mode",
    "ops",
    "components",
    "endmembers",
    "sigma",
    "area_threshold",
    "e1",
    "e2",
    "radius",
    "eps",
    "ec_alpha0",
    "ec_learning_rate",
    "ec_max_iter",
    "epochs",
    "steps_per_epoch",
    "lr",
    "lambda_tv",
    "e3",
    "e4",
    "use_tokens",
    "seed",
    "snr",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_as<V: FromStr>(key: &str, value: &str, what: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("expected {what}, got '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(key, format!("expected a boolean, got '{value}'"))),
    }
}

fn optional<V: FromStr>(key: &str, value: &str, what: &str) -> Result<Option<V>> {
    match value.to_ascii_lowercase().as_str() {
        "auto" | "none" => Ok(None),
        _ => parse_as(key, value, what).map(Some),
    }
}

fn unit_interval(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(config_err(key, format!("must lie in (0, 1], got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(key, format!("must be a positive finite number, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(config_err(key, format!("must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let c = &mut self.classical;
        let t = &mut self.train;
        match key {
            "mode" => self.mode = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?,
            "ops" => c.ops = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?,
            "components" => c.fuzzify.components = parse_as(key, value, "an integer")?,
            "endmembers" => c.fuzzify.endmembers = parse_as(key, value, "an integer")?,
            "sigma" => c.fuzzify.sigma = parse_as(key, value, "a number")?,
            "area_threshold" => c.fuzzify.area_threshold = optional(key, value, "an integer or 'auto'")?,
            "e1" => c.e1 = parse_as(key, value, "a number")?,
            "e2" => c.e2 = parse_as(key, value, "a number")?,
            "radius" => c.radius = parse_as(key, value, "an integer")?,
            "eps" => c.eps = parse_as(key, value, "a number")?,
            "ec_alpha0" => c.ec.alpha0 = parse_as(key, value, "a number")?,
            "ec_learning_rate" => c.ec.learning_rate = parse_as(key, value, "a number")?,
            "ec_max_iter" => c.ec.max_iter = parse_as(key, value, "an integer")?,
            "epochs" => t.epochs = parse_as(key, value, "an integer")?,
            "steps_per_epoch" => t.steps_per_epoch = parse_as(key, value, "an integer")?,
            "lr" => t.lr = parse_as(key, value, "a number")?,
            "lambda_tv" => t.lambda_tv = parse_as(key, value, "a number")?,
            "e3" => t.e3 = parse_as(key, value, "a number")?,
            "e4" => t.e4 = parse_as(key, value, "a number")?,
            "use_tokens" => t.use_tokens = parse_bool(key, value)?,
            "seed" => t.seed = parse_as(key, value, "a nonnegative integer")?,
            "snr" => self.snr_db = optional(key, value, "a number or 'none'")?,
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks every field; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let c = &self.classical;
        let t = &self.train;
        at_least("components", c.fuzzify.components, 1)?;
        at_least("endmembers", c.fuzzify.endmembers, 2)?;
        positive("sigma", c.fuzzify.sigma)?;
        if let Some(a) = c.fuzzify.area_threshold {
            at_least("area_threshold", a, 1)?;
        }
        unit_interval("e1", c.e1)?;
        unit_interval("e2", c.e2)?;
        at_least("radius", c.radius, 1)?;
        positive("eps", c.eps)?;
        if !(c.ec.alpha0 >= 0.0 && c.ec.alpha0.is_finite()) {
            return Err(config_err("ec_alpha0", format!("must be a nonnegative finite number, got {}", c.ec.alpha0)));
        }
        positive("ec_learning_rate", c.ec.learning_rate)?;
        at_least("ec_max_iter", c.ec.max_iter, 1)?;
        at_least("epochs", t.epochs, 1)?;
        at_least("steps_per_epoch", t.steps_per_epoch, 1)?;
        positive("lr", t.lr)?;
        if !(t.lambda_tv >= 0.0 && t.lambda_tv.is_finite()) {
            return Err(config_err("lambda_tv", format!("must be a nonnegative finite number, got {}", t.lambda_tv)));
        }
        unit_interval("e3", t.e3)?;
        unit_interval("e4", t.e4)?;
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(config_err("snr", format!("must be finite, got {s}")));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are skipped; the result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, None)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies assignments from `text`. With a `prefix`, only keys carrying it
    /// are used (with the prefix stripped); other lines are ignored.
    pub fn apply_text(&mut self, text: &str, prefix: Option<&str>) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
            let key = key.trim();
            let key = match prefix {
                Some(p) => match key.strip_prefix(p) {
                    Some(k) => k,
                    None => continue,
                },
                None => key,
            };
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// `(key, value)` pairs that [`RunConfig::set`] reads back to the same config.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let c = &self.classical;
        let t = &self.train;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        vec![
            ("mode", self.mode.name().into()),
            ("ops", c.ops.name().into()),
            ("components", c.fuzzify.components.to_string()),
            ("endmembers", c.fuzzify.endmembers.to_string()),
            ("sigma", format!("{:?}", c.fuzzify.sigma)),
            (
                "area_threshold",
                c.fuzzify.area_threshold.map_or_else(|| "auto".into(), |a| a.to_string()),
            ),
            ("e1", format!("{:?}", c.e1)),
            ("e2", format!("{:?}", c.e2)),
            ("radius", c.radius.to_string()),
            ("eps", format!("{:?}", c.eps)),
            ("ec_alpha0", format!("{:?}", c.ec.alpha0)),
            ("ec_learning_rate", format!("{:?}", c.ec.learning_rate)),
            ("ec_max_iter", c.ec.max_iter.to_string()),
            ("epochs", t.epochs.to_string()),
            ("steps_per_epoch", t.steps_per_epoch.to_string()),
            ("lr", format!("{:?}", t.lr)),
            ("lambda_tv", format!("{:?}", t.lambda_tv)),
            ("e3", format!("{:?}", t.e3)),
            ("e4", format!("{:?}", t.e4)),
            ("use_tokens", t.use_tokens.to_string()),
            ("seed", t.seed.to_string()),
            ("snr", opt(self.snr_db.map(|s| format!("{s:?}")))),
        ]
    }

    /// The configuration as `key = value` text, one line per key.
    pub fn render(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{prefix}{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::OperatorPair;

    #[test]
    fn defaults_render_and_reparse() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(RunConfig::parse(&cfg.render("")).unwrap(), cfg);
        assert_eq!(cfg.classical.ops, OperatorPair::Einstein);
        assert_eq!(cfg.train.epochs, 30);
    }

    #[test]
    fn assignments_comments_and_round_trip() {
        let text = "# tuned run\nops = minmax\nmode=classical\ne1 = 0.3 # inline\n\narea_threshold = 12\nsnr = 25\nuse_tokens = no\nseed = 42\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.classical.ops, OperatorPair::MinMax);
        assert_eq!(cfg.mode, Mode::Classical);
        assert_eq!(cfg.classical.e1, 0.3);
        assert_eq!(cfg.classical.fuzzify.area_threshold, Some(12));
        assert_eq!(cfg.snr_db, Some(25.0));
        assert!(!cfg.train.use_tokens);
        assert_eq!(cfg.seed(), 42);
        assert_eq!(RunConfig::parse(&cfg.render("")).unwrap(), cfg);
    }

    #[test]
    fn prefixed_lines_are_selected() {
        let cfg = RunConfig {
            mode: Mode::Quantum,
            ..Default::default()
        };
        let text = format!("version = 1\nresult.alpha = 2.5\n{}", cfg.render("config."));
        let mut back = RunConfig::default();
        back.apply_text(&text, Some("config.")).unwrap();
        assert_eq!(back, cfg);
    }

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("e1 = 0", "e1"),
            ("e4 = 1.5", "e4"),
            ("radius = 0", "radius"),
            ("lr = -1", "lr"),
            ("eps = abc", "eps"),
            ("ops = product", "ops"),
            ("mode = hybrid", "mode"),
            ("use_tokens = maybe", "use_tokens"),
            ("endmembers = 1", "endmembers"),
            ("lambda_tv = -0.1", "lambda_tv"),
            ("colour = red", "colour"),
            ("snr = inf", "snr"),
        ] {
            assert_eq!(key_of(RunConfig::parse(text).unwrap_err()), key, "{text}");
        }
        assert!(matches!(RunConfig::parse("no equals sign"), Err(Error::Parse(_))));
    }

    #[test]
    fn every_listed_key_is_settable() {
        let defaults = RunConfig::default();
        for (k, v) in defaults.entries() {
            let mut c = RunConfig::default();
            c.set(k, &v).unwrap();
            assert_eq!(c, defaults, "{k}");
        }
        let listed: Vec<&str> = defaults.entries().iter().map(|(k, _)| *k).collect();
        assert_eq!(listed, KEYS);
    }
}
