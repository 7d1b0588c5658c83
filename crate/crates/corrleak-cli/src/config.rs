//! Flat `key = value` run configuration with `#` comments and dotted
//! section prefixes. Every key has a reference default except `N`; the
//! fully defaulted configuration reproduces the reference simulation setup
//! (misalignment 0.01, dark rate 1e-9, error-correction efficiency 1.16,
//! extinction 1e-3, eps_tot 1e-10 with the five-way split and
//! eps2 = eps3 = eps^2).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use corrleak::bounds::LogEpsilon;
use corrleak::channel::ChannelParams;
use corrleak::optimizer::{AxisRange, SearchSpace};
use corrleak::security::SecurityBudget;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Typed run configuration; fields hold input values only, so serializing
/// and re-parsing reconstructs bit-identical state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_total: f64,
    pub xi: u32,
    pub p_pe: f64,
    pub ec_efficiency: f64,
    pub p_send: f64,
    pub mu_max: f64,
    pub out: Option<String>,

    pub att_db: f64,
    pub att_a_db: Option<f64>,
    pub att_b_db: Option<f64>,
    pub dark_rate: f64,
    pub misalignment: f64,
    pub extinction: f64,

    /// Direct vacuum-bound route; both must be given together. When absent
    /// the bounds derive from `mu_max` and the extinction ratio.
    pub v0: Option<f64>,
    pub v1: Option<f64>,

    pub eps_tot: f64,
    pub eps: Option<f64>,
    pub eps_bar: Option<f64>,
    pub eps_cor: Option<f64>,
    pub eps0: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub definetti_x: u32,

    pub sweep_att_start: f64,
    pub sweep_att_stop: f64,
    pub sweep_att_step: f64,
    pub sweep_xi_list: Vec<u32>,

    pub opt_points: usize,
    pub opt_depth: u32,
    pub opt_shrink: f64,
    pub opt_p_send_lo: f64,
    pub opt_p_send_hi: f64,
    pub opt_mu_lo: f64,
    pub opt_mu_hi: f64,
    pub opt_p_pe_lo: f64,
    pub opt_p_pe_hi: f64,

    pub mc_samples: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_total: f64::NAN, // required
            xi: 0,
            p_pe: 0.5,
            ec_efficiency: 1.16,
            p_send: 0.1,
            mu_max: 0.05,
            out: None,
            att_db: 0.0,
            att_a_db: None,
            att_b_db: None,
            dark_rate: 1e-9,
            misalignment: 0.01,
            extinction: 1e-3,
            v0: None,
            v1: None,
            eps_tot: 1e-10,
            eps: None,
            eps_bar: None,
            eps_cor: None,
            eps0: None,
            eps2: None,
            eps3: None,
            definetti_x: 256,
            sweep_att_start: 0.0,
            sweep_att_stop: 60.0,
            sweep_att_step: 2.0,
            sweep_xi_list: vec![0, 1, 5],
            opt_points: 16,
            opt_depth: 3,
            opt_shrink: 4.0,
            opt_p_send_lo: 1e-3,
            opt_p_send_hi: 0.5,
            opt_mu_lo: 1e-5,
            opt_mu_hi: 0.5,
            opt_p_pe_lo: 0.05,
            opt_p_pe_hi: 0.95,
            mc_samples: 1_000_000,
        }
    }
}

fn parse_entries(text: &str, entries: &mut BTreeMap<String, String>) -> Result<(), ConfigError> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!(
                "config line {}: expected `key = value`, got `{}`",
                lineno + 1,
                line
            ));
        };
        entries.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(())
}

impl RunConfig {
    /// Builds from optional file text plus `--set key=value` overrides.
    pub fn load(file_text: Option<&str>, sets: &[String]) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        if let Some(text) = file_text {
            parse_entries(text, &mut entries)?;
        }
        for s in sets {
            let Some((key, value)) = s.split_once('=') else {
                return err(format!("--set `{s}`: expected KEY=VALUE"));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut entries: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();

        fn f64_of(key: &str, v: &str) -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| ConfigError(format!("config key `{key}`: expected number, got `{v}`")))
        }
        fn u32_of(key: &str, v: &str) -> Result<u32, ConfigError> {
            v.parse::<u32>().map_err(|_| {
                ConfigError(format!("config key `{key}`: expected nonnegative integer, got `{v}`"))
            })
        }

        let mut take_f64 = |key: &str, slot: &mut f64| -> Result<(), ConfigError> {
            if let Some(v) = entries.remove(key) {
                *slot = f64_of(key, &v)?;
            }
            Ok(())
        };
        take_f64("N", &mut cfg.n_total)?;
        take_f64("p_pe", &mut cfg.p_pe)?;
        take_f64("ec_efficiency", &mut cfg.ec_efficiency)?;
        take_f64("p_send", &mut cfg.p_send)?;
        take_f64("mu_max", &mut cfg.mu_max)?;
        take_f64("channel.att_db", &mut cfg.att_db)?;
        take_f64("channel.dark_rate", &mut cfg.dark_rate)?;
        take_f64("channel.misalignment", &mut cfg.misalignment)?;
        take_f64("channel.extinction", &mut cfg.extinction)?;
        take_f64("security.eps_tot", &mut cfg.eps_tot)?;
        take_f64("sweep.att_start", &mut cfg.sweep_att_start)?;
        take_f64("sweep.att_stop", &mut cfg.sweep_att_stop)?;
        take_f64("sweep.att_step", &mut cfg.sweep_att_step)?;
        take_f64("optimizer.shrink", &mut cfg.opt_shrink)?;
        take_f64("optimizer.p_send_lo", &mut cfg.opt_p_send_lo)?;
        take_f64("optimizer.p_send_hi", &mut cfg.opt_p_send_hi)?;
        take_f64("optimizer.mu_lo", &mut cfg.opt_mu_lo)?;
        take_f64("optimizer.mu_hi", &mut cfg.opt_mu_hi)?;
        take_f64("optimizer.p_pe_lo", &mut cfg.opt_p_pe_lo)?;
        take_f64("optimizer.p_pe_hi", &mut cfg.opt_p_pe_hi)?;

        let mut take_opt_f64 = |key: &str, slot: &mut Option<f64>| -> Result<(), ConfigError> {
            if let Some(v) = entries.remove(key) {
                *slot = Some(f64_of(key, &v)?);
            }
            Ok(())
        };
        take_opt_f64("channel.att_a_db", &mut cfg.att_a_db)?;
        take_opt_f64("channel.att_b_db", &mut cfg.att_b_db)?;
        take_opt_f64("source.v0", &mut cfg.v0)?;
        take_opt_f64("source.v1", &mut cfg.v1)?;
        take_opt_f64("security.eps", &mut cfg.eps)?;
        take_opt_f64("security.eps_bar", &mut cfg.eps_bar)?;
        take_opt_f64("security.eps_cor", &mut cfg.eps_cor)?;
        take_opt_f64("security.eps0", &mut cfg.eps0)?;
        take_opt_f64("security.eps2", &mut cfg.eps2)?;
        take_opt_f64("security.eps3", &mut cfg.eps3)?;

        if let Some(v) = entries.remove("xi") {
            cfg.xi = u32_of("xi", &v)?;
        }
        if let Some(v) = entries.remove("security.definetti_x") {
            cfg.definetti_x = u32_of("security.definetti_x", &v)?;
        }
        if let Some(v) = entries.remove("optimizer.depth") {
            cfg.opt_depth = u32_of("optimizer.depth", &v)?;
        }
        if let Some(v) = entries.remove("optimizer.points") {
            cfg.opt_points = u32_of("optimizer.points", &v)? as usize;
        }
        if let Some(v) = entries.remove("mc.samples") {
            cfg.mc_samples = v.parse::<u64>().map_err(|_| {
                ConfigError(format!("config key `mc.samples`: expected integer, got `{v}`"))
            })?;
        }
        if let Some(v) = entries.remove("sweep.xi_list") {
            let mut list = Vec::new();
            for item in v.split(',') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                list.push(u32_of("sweep.xi_list", item)?);
            }
            list.sort_unstable();
            list.dedup();
            cfg.sweep_xi_list = list;
        }
        if let Some(v) = entries.remove("out") {
            cfg.out = Some(v);
        }

        if let Some((key, _)) = entries.into_iter().next() {
            return err(format!("unknown config key `{key}`"));
        }
        if cfg.n_total.is_nan() {
            return err("missing required key `N`");
        }
        if !(cfg.n_total >= 1.0 && cfg.n_total.is_finite()) {
            return err(format!("config key `N`: must be >= 1, got {}", cfg.n_total));
        }
        if cfg.v0.is_some() != cfg.v1.is_some() {
            return err("config keys `source.v0` and `source.v1` must be given together");
        }
        Ok(cfg)
    }

    /// Serializes the effective configuration back to the flat format, in a
    /// fixed key order; parsing the output reconstructs this exact value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("N", self.n_total.to_string());
        kv("xi", self.xi.to_string());
        kv("p_pe", self.p_pe.to_string());
        kv("ec_efficiency", self.ec_efficiency.to_string());
        kv("p_send", self.p_send.to_string());
        kv("mu_max", self.mu_max.to_string());
        if let Some(out) = &self.out {
            kv("out", out.clone());
        }
        kv("channel.att_db", self.att_db.to_string());
        if let Some(v) = self.att_a_db {
            kv("channel.att_a_db", v.to_string());
        }
        if let Some(v) = self.att_b_db {
            kv("channel.att_b_db", v.to_string());
        }
        kv("channel.dark_rate", self.dark_rate.to_string());
        kv("channel.misalignment", self.misalignment.to_string());
        kv("channel.extinction", self.extinction.to_string());
        if let (Some(v0), Some(v1)) = (self.v0, self.v1) {
            kv("source.v0", v0.to_string());
            kv("source.v1", v1.to_string());
        }
        kv("security.eps_tot", self.eps_tot.to_string());
        for (k, v) in [
            ("security.eps", self.eps),
            ("security.eps_bar", self.eps_bar),
            ("security.eps_cor", self.eps_cor),
            ("security.eps0", self.eps0),
            ("security.eps2", self.eps2),
            ("security.eps3", self.eps3),
        ] {
            if let Some(v) = v {
                kv(k, v.to_string());
            }
        }
        kv("security.definetti_x", self.definetti_x.to_string());
        kv("sweep.att_start", self.sweep_att_start.to_string());
        kv("sweep.att_stop", self.sweep_att_stop.to_string());
        kv("sweep.att_step", self.sweep_att_step.to_string());
        kv(
            "sweep.xi_list",
            self.sweep_xi_list
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("optimizer.points", self.opt_points.to_string());
        kv("optimizer.depth", self.opt_depth.to_string());
        kv("optimizer.shrink", self.opt_shrink.to_string());
        kv("optimizer.p_send_lo", self.opt_p_send_lo.to_string());
        kv("optimizer.p_send_hi", self.opt_p_send_hi.to_string());
        kv("optimizer.mu_lo", self.opt_mu_lo.to_string());
        kv("optimizer.mu_hi", self.opt_mu_hi.to_string());
        kv("optimizer.p_pe_lo", self.opt_p_pe_lo.to_string());
        kv("optimizer.p_pe_hi", self.opt_p_pe_hi.to_string());
        kv("mc.samples", self.mc_samples.to_string());
        s
    }

    pub fn channel(&self) -> Result<ChannelParams, ConfigError> {
        let a = self.att_a_db.unwrap_or(self.att_db);
        let b = self.att_b_db.unwrap_or(self.att_db);
        ChannelParams::new(a, b, self.dark_rate, self.misalignment, self.extinction)
            .map_err(|e| ConfigError(e.to_string()))
    }

    /// Channel with the symmetric attenuation replaced (sweep rows).
    pub fn channel_at(&self, att_db: f64) -> Result<ChannelParams, ConfigError> {
        ChannelParams::symmetric(att_db, self.dark_rate, self.misalignment, self.extinction)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn budget(&self) -> Result<SecurityBudget, ConfigError> {
        let lep = |key: &str, v: f64| {
            LogEpsilon::from_probability(v)
                .map_err(|e| ConfigError(format!("config key `{key}`: {e}")))
        };
        let eps_tot = lep("security.eps_tot", self.eps_tot)?;
        let share = eps_tot.divided_by(5.0);
        let eps = match self.eps {
            Some(v) => lep("security.eps", v)?,
            None => share,
        };
        let eps_bar = match self.eps_bar {
            Some(v) => lep("security.eps_bar", v)?,
            None => share,
        };
        let eps_cor = match self.eps_cor {
            Some(v) => lep("security.eps_cor", v)?,
            None => share,
        };
        let eps0 = match self.eps0 {
            Some(v) => lep("security.eps0", v)?,
            None => share,
        };
        let eps2 = match self.eps2 {
            Some(v) => lep("security.eps2", v)?,
            None => eps.pow(2.0),
        };
        let eps3 = match self.eps3 {
            Some(v) => lep("security.eps3", v)?,
            None => eps.pow(2.0),
        };
        SecurityBudget::new(
            eps_tot,
            eps,
            eps_bar,
            eps_cor,
            eps0,
            eps2,
            eps3,
            self.definetti_x,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace {
            p_send: AxisRange::log(self.opt_p_send_lo, self.opt_p_send_hi, self.opt_points),
            mu_max: AxisRange::log(self.opt_mu_lo, self.opt_mu_hi, self.opt_points),
            p_pe: AxisRange::new(self.opt_p_pe_lo, self.opt_p_pe_hi, self.opt_points),
            depth: self.opt_depth,
            shrink: self.opt_shrink,
        }
    }

    /// Attenuation grid of the sweep, empty when the range is empty.
    pub fn sweep_attenuations(&self) -> Vec<f64> {
        if self.sweep_att_step <= 0.0 || self.sweep_att_stop < self.sweep_att_start {
            return Vec::new();
        }
        let n = ((self.sweep_att_stop - self.sweep_att_start) / self.sweep_att_step + 1e-9)
            .floor() as usize;
        (0..=n)
            .map(|i| self.sweep_att_start + i as f64 * self.sweep_att_step)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_only_n() {
        let cfg = RunConfig::load(None, &["N=1e12".into()]).unwrap();
        assert_eq!(cfg.n_total, 1e12);
        assert_eq!(cfg.xi, 0);
        assert_eq!(cfg.dark_rate, 1e-9);
        assert_eq!(cfg.misalignment, 0.01);
        assert_eq!(cfg.extinction, 1e-3);
        assert_eq!(cfg.ec_efficiency, 1.16);
        assert_eq!(cfg.eps_tot, 1e-10);
        assert_eq!(cfg.definetti_x, 256);
    }

    #[test]
    fn missing_n_names_the_key() {
        let e = RunConfig::load(None, &[]).unwrap_err();
        assert!(e.0.contains("`N`"), "{}", e.0);
    }

    #[test]
    fn unknown_key_named() {
        let e = RunConfig::load(Some("N = 1e10\nchannel.att = 3"), &[]).unwrap_err();
        assert!(e.0.contains("channel.att"), "{}", e.0);
    }

    #[test]
    fn comments_whitespace_and_overrides() {
        let text = "# run setup\nN = 1e10   # pulses\n  xi = 3\nsweep.xi_list = 5, 1, 5\n";
        let cfg = RunConfig::load(Some(text), &["xi=7".into()]).unwrap();
        assert_eq!(cfg.xi, 7); // --set wins
        assert_eq!(cfg.sweep_xi_list, vec![1, 5]); // sorted, deduped
    }

    #[test]
    fn text_round_trip_is_exact() {
        let cfg = RunConfig::load(
            Some("N = 1e12\nchannel.att_db = 17.35\nsecurity.eps = 2.5e-11"),
            &["p_send=0.123456789012345".into()],
        )
        .unwrap();
        let again = RunConfig::load(Some(&cfg.to_text()), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn sweep_grid() {
        let cfg = RunConfig::load(
            Some("N=1e10\nsweep.att_start=2\nsweep.att_stop=6\nsweep.att_step=2"),
            &[],
        )
        .unwrap();
        assert_eq!(cfg.sweep_attenuations(), vec![2.0, 4.0, 6.0]);
        let cfg = RunConfig::load(
            Some("N=1e10\nsweep.att_start=5\nsweep.att_stop=2\nsweep.att_step=2"),
            &[],
        )
        .unwrap();
        assert!(cfg.sweep_attenuations().is_empty());
    }
}
