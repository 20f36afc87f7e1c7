//! Config file schema.
//!
//! TOML with a required top-level `schema = 1` and one section per
//! subcommand. Unknown keys anywhere are errors. Every physical
//! quantity is a string with an explicit unit suffix ("2.356 ghz",
//! "5 mt", "10 us", "80 k", "43 per_k_s"); a bare number where a
//! quantity is expected is a schema error, never a silent default.
//! Dimensionless values (contrast, counts, exponents) are plain numbers.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Freq,
    Field,
    Time,
    Temp,
    RatePerK,
    RatePerK7,
}

impl Dim {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Freq => &[("hz", 1.0), ("khz", 1e3), ("mhz", 1e6), ("ghz", 1e9)],
            Dim::Field => &[("t", 1.0), ("mt", 1e-3), ("ut", 1e-6), ("nt", 1e-9)],
            Dim::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Dim::Temp => &[("k", 1.0)],
            Dim::RatePerK => &[("per_k_s", 1.0)],
            Dim::RatePerK7 => &[("per_k7_s", 1.0)],
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Dim::Freq => "a frequency (hz, khz, mhz, ghz)",
            Dim::Field => "a magnetic field (t, mt, ut, nt)",
            Dim::Time => "a time (s, ms, us, ns)",
            Dim::Temp => "a temperature (k)",
            Dim::RatePerK => "a direct-process coefficient (per_k_s)",
            Dim::RatePerK7 => "a Raman coefficient (per_k7_s)",
        }
    }
}

/// Parse "NUMBER UNIT" (whitespace optional) into SI base units. The
/// number part is the longest prefix that parses as f64, so exponent
/// forms like "47e-12 per_k7_s" and attached units like "5mt" both work.
pub fn parse_quantity(raw: &str, dim: Dim) -> Result<f64, String> {
    let s = raw.trim().to_ascii_lowercase();
    if s.is_empty() {
        return Err(format!("empty quantity; expected {}", dim.describe()));
    }
    let mut split = None;
    for i in (1..=s.len()).rev() {
        if !s.is_char_boundary(i) {
            continue;
        }
        if s[..i].trim_end().parse::<f64>().is_ok() {
            split = Some(i);
            break;
        }
    }
    let Some(i) = split else {
        return Err(format!(
            "cannot parse quantity {raw:?}; expected {}",
            dim.describe()
        ));
    };
    let value: f64 = s[..i].trim_end().parse().unwrap();
    let unit = s[i..].trim();
    if unit.is_empty() {
        return Err(format!(
            "quantity {raw:?} has no unit suffix; expected {}",
            dim.describe()
        ));
    }
    for &(name, scale) in dim.units() {
        if unit == name {
            if !value.is_finite() {
                return Err(format!("quantity {raw:?} is not finite"));
            }
            return Ok(value * scale);
        }
    }
    Err(format!(
        "unit {unit:?} in {raw:?} is not {}",
        dim.describe()
    ))
}

macro_rules! quantity_type {
    ($name:ident, $dim:expr, $example:literal) => {
        #[derive(Clone, Copy, Debug)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D>(d: D) -> Result<Self, D::Error>
            where
                D: Deserializer<'de>,
            {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = f64;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "a quantity string like \"{}\"", $example)
                    }
                    fn visit_str<E: de::Error>(self, s: &str) -> Result<f64, E> {
                        parse_quantity(s, $dim).map_err(E::custom)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                        Err(E::custom(format!(
                            "bare number {v} where a quantity is required; write a \
                             unit string like \"{}\"",
                            $example
                        )))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                        self.visit_f64(v as f64)
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                        self.visit_f64(v as f64)
                    }
                }
                d.deserialize_any(V).map($name)
            }
        }
    };
}

quantity_type!(FreqQ, Dim::Freq, "2.356 ghz");
quantity_type!(FieldQ, Dim::Field, "5 mt");
quantity_type!(TimeQ, Dim::Time, "10 us");
quantity_type!(TempQ, Dim::Temp, "80 k");
quantity_type!(RatePerKQ, Dim::RatePerK, "43 per_k_s");
quantity_type!(RatePerK7Q, Dim::RatePerK7, "47e-12 per_k7_s");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootConfig {
    pub schema: u32,
    pub odmr: Option<OdmrConfig>,
    pub fit: Option<FitConfig>,
    pub rabi: Option<RabiConfig>,
    pub coherence: Option<CoherenceConfig>,
    pub t1: Option<T1Config>,
    pub oadf: Option<OadfConfig>,
    pub sense: Option<SenseConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdmrConfig {
    pub d: FreqQ,
    pub e: FreqQ,
    pub linewidth: FreqQ,
    pub freq_start: FreqQ,
    pub freq_stop: FreqQ,
    pub freq_points: usize,
    pub fields: Vec<FieldQ>,
    pub n_orientations: usize,
    #[serde(default = "unit_amps")]
    pub amplitudes: [f64; 3],
    /// RMS of Gaussian noise added to the signal (same units as the
    /// signal); drawn from the --seed stream. 0 disables.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Spectrum CSV (field_t,freq_hz,signal); relative paths resolve
    /// against the config file's directory.
    pub data: String,
    #[serde(default = "default_fit_orientations")]
    pub n_orientations: usize,
    pub max_field: Option<FieldQ>,
    pub init_d: Option<FreqQ>,
    pub init_e: Option<FreqQ>,
    pub init_linewidth: Option<FreqQ>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiConfig {
    pub d: FreqQ,
    pub e: FreqQ,
    pub static_field: FieldQ,
    pub drive_field: FieldQ,
    pub drive_freq: FreqQ,
    pub duration: TimeQ,
    pub samples: usize,
    pub n_orientations: usize,
    pub capture_window: Option<FreqQ>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    /// PSD amplitude at omega = 1 rad/s; dimension depends on the
    /// exponent, so this is a plain number by design.
    pub noise_amplitude: f64,
    pub noise_exponent: f64,
    pub low_cutoff_rad_s: Option<f64>,
    pub high_cutoff_rad_s: Option<f64>,
    pub pulse_numbers: Vec<usize>,
    pub points_per_decade: Option<usize>,
    pub clock: Option<ClockConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    pub e: FreqQ,
    pub t2_zero: TimeQ,
    pub anchor_field: FieldQ,
    pub t2_anchor: TimeQ,
    pub field_start: FieldQ,
    pub field_stop: FieldQ,
    pub field_points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T1Config {
    pub direct: RatePerKQ,
    pub raman: RatePerK7Q,
    pub temp_start: TempQ,
    pub temp_stop: TempQ,
    pub temp_points: usize,
    /// Extra temperatures evaluated into the JSON payload.
    #[serde(default)]
    pub eval_temps: Vec<TempQ>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OadfConfig {
    /// "cryo_80k" or "ambient".
    pub preset: String,
    /// Triplet pair the microwave pulse addresses: "xz", "yz", or "xy".
    pub pair: String,
    pub t_init: TimeQ,
    pub t_wait: TimeQ,
    pub t_read: TimeQ,
    #[serde(default = "one")]
    pub mw_fraction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenseConfig {
    /// "dc" (slope-probed) or "ac" (echo-phase).
    pub mode: String,
    /// Line model probed by the two-point measurement: a Lorentzian of
    /// peak contrast `contrast` whose center shifts linearly with field.
    pub contrast: f64,
    pub center: FreqQ,
    pub fwhm: FreqQ,
    pub bias: FieldQ,
    /// Detected photons per molecule per shot.
    pub photons_per_shot: f64,
    pub molecules: f64,
    pub t_init: TimeQ,
    pub t_evolve: TimeQ,
    pub t_read: TimeQ,
    #[serde(default = "one")]
    pub overhead: f64,
    /// Coherence time bound for ac mode.
    pub t2: Option<TimeQ>,
    /// Distance of a unit nuclear moment for the proton-detection
    /// figure, meters (no length unit suffixes are defined).
    pub dipole_distance_m: Option<f64>,
    pub polarization: Option<f64>,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
}

fn unit_amps() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn one() -> f64 {
    1.0
}

fn default_fit_orientations() -> usize {
    1000
}

fn default_scan_points() -> usize {
    801
}

/// A parsed config plus everything needed for provenance and path
/// resolution.
pub struct LoadedConfig {
    pub root: RootConfig,
    pub hash: String,
    pub dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    let value = toml::Value::Table(table);
    let hash = canonical_hash(&value);
    let root: RootConfig = value
        .try_into()
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    if root.schema != SCHEMA_VERSION {
        return Err(format!(
            "config {}: schema = {} is not supported (expected {})",
            path.display(),
            root.schema,
            SCHEMA_VERSION
        ));
    }
    let dir = path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { root, hash, dir })
}

/// Canonical config digest: the parsed value re-serialized as JSON with
/// sorted keys (the JSON map is ordered), SHA-256, hex. Whitespace and
/// key order in the file do not affect it; any value change does.
pub fn canonical_hash(value: &toml::Value) -> String {
    let json = serde_json::to_value(value).expect("toml value converts to json");
    let canon = serde_json::to_string(&json).expect("json serializes");
    let mut h = Sha256::new();
    h.update(canon.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
