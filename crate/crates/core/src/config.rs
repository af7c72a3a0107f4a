//! Run configuration files.
//!
//! Files are TOML with `[chip]`, `[species]`, `[transport]`, `[sweep]` and
//! `[sequence]` tables. Lengths are in mm, currents in A, fields in G and
//! durations in ms; everything is converted to SI on load. Unknown keys are
//! rejected with their position.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chip_model::{AtomSpecies, ChipConfig, WireSegment};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::sequence::{LensPulse, SequencePlan};
use crate::sta_design::TrajectoryAnsatz;
use crate::units::{ATOMIC_MASS_UNIT, BOHR_MAGNETON, BOHR_RADIUS, GAUSS, MM, MS};

/// Environment variable naming a configuration file.
pub const CONFIG_ENV: &str = "ATOMCHIP_STA_CONFIG";

/// Built-in presets by name.
pub const PRESETS: [(&str, &str); 2] = [
    ("quantus_z", include_str!("../presets/quantus_z.cfg")),
    ("quantus_dkc", include_str!("../presets/quantus_dkc.cfg")),
];
pub const DEFAULT_PRESET: &str = "quantus_z";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    chip: ChipSection,
    species: SpeciesSection,
    transport: TransportSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    sequence: SequenceSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChipSection {
    #[serde(rename = "current_A")]
    current: f64,
    #[serde(rename = "bias_G")]
    bias: f64,
    #[serde(default = "default_bias_direction")]
    bias_direction: [f64; 3],
    segments: Vec<SegmentSection>,
}

fn default_bias_direction() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentSection {
    start_mm: [f64; 3],
    end_mm: [f64; 3],
    /// Overrides the chip current for this segment.
    #[serde(rename = "current_A")]
    current: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesSection {
    mass_amu: f64,
    g_f: f64,
    m_f: f64,
    a_s_bohr: f64,
    atom_number: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportSection {
    #[serde(rename = "initial_bias_G")]
    initial_bias: f64,
    #[serde(rename = "final_bias_G")]
    final_bias: Option<f64>,
    final_z_mm: Option<f64>,
    duration_ms: f64,
    chirp_a: f64,
    chirp_b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(rename = "bias_min_G")]
    bias_min: f64,
    #[serde(rename = "bias_max_G")]
    bias_max: f64,
    samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            bias_min: 4.0,
            bias_max: 25.0,
            samples: 46,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceSection {
    hold_ms: f64,
    free1_ms: f64,
    #[serde(rename = "lens_Hz")]
    lens_hz: [f64; 3],
    lens_ms: f64,
    #[serde(rename = "lens_current_A")]
    lens_current: f64,
    #[serde(rename = "lens_bias_G")]
    lens_bias: f64,
    free2_ms: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        let p = SequencePlan::default();
        Self {
            hold_ms: p.hold / MS,
            free1_ms: p.free1 / MS,
            lens_hz: p.lens.frequencies_hz,
            lens_ms: p.lens.duration / MS,
            lens_current: p.lens.wire_current,
            lens_bias: p.lens.bias / GAUSS,
            free2_ms: p.free2 / MS,
        }
    }
}

/// Where the transport ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportEnd {
    /// Trap position for this bias, T.
    Bias(f64),
    /// Explicit position, m.
    Position(f64),
}

/// Transport and sweep settings, SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportDefaults {
    pub initial_bias: f64,
    pub end: TransportEnd,
    pub duration: f64,
    pub chirp_a: f64,
    pub chirp_b: f64,
    pub sweep_bias_min: f64,
    pub sweep_bias_max: f64,
    pub sweep_samples: usize,
}

/// A validated configuration in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub chip: ChipConfig,
    pub species: AtomSpecies,
    pub transport: TransportDefaults,
    pub plan: SequencePlan,
    /// SHA-256 of the source text.
    pub hash: String,
    /// File path or `preset:<name>`.
    pub source: String,
}

impl RunConfig {
    /// Trap tables and transport end points.
    pub fn scenario(&self) -> Result<Scenario> {
        let t = &self.transport;
        let mut sc = Scenario::build_with(&self.chip, &self.species, t.sweep_bias_min, t.sweep_bias_max, t.sweep_samples)?;
        sc.initial_bias = t.initial_bias;
        match t.end {
            TransportEnd::Bias(b) => sc.final_bias = b,
            TransportEnd::Position(z) => sc.final_position = Some(z),
        }
        Ok(sc)
    }

    /// The chirped trajectory of this configuration between the end points
    /// of `scenario`.
    pub fn chirped(&self, scenario: &Scenario) -> Result<TrajectoryAnsatz> {
        let t = &self.transport;
        Ok(TrajectoryAnsatz::chirped(scenario.z_i()?, scenario.z_f()?, t.duration, t.chirp_a, t.chirp_b))
    }
}

fn location(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{name} must be positive, got {v}")))
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str, source: &str) -> Result<RunConfig> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "configuration is empty".into(),
        });
    }
    let file: FileConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| location(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;

    let c = &file.chip;
    if !(c.bias >= 0.0) {
        return Err(Error::Validation(format!("chip bias must be non-negative, got {} G", c.bias)));
    }
    let segments = c
        .segments
        .iter()
        .map(|s| WireSegment::new(s.start_mm.map(|v| v * MM), s.end_mm.map(|v| v * MM), s.current.unwrap_or(c.current)))
        .collect::<Result<Vec<_>>>()?;
    let chip = ChipConfig::new(segments, c.bias_direction, c.bias * GAUSS)?;

    let s = &file.species;
    let species = AtomSpecies {
        mass: s.mass_amu * ATOMIC_MASS_UNIT,
        g_f: s.g_f,
        m_f: s.m_f,
        mu_b: BOHR_MAGNETON,
        a_s: s.a_s_bohr * BOHR_RADIUS,
        atom_number: s.atom_number,
    };
    species.validate()?;

    let t = &file.transport;
    let end = match (t.final_bias, t.final_z_mm) {
        (Some(b), None) => TransportEnd::Bias(positive("transport.final_bias_G", b)? * GAUSS),
        (None, Some(z)) => TransportEnd::Position(positive("transport.final_z_mm", z)? * MM),
        _ => {
            return Err(Error::Validation(
                "transport needs exactly one of final_bias_G and final_z_mm".into(),
            ))
        }
    };
    let w = &file.sweep;
    if !(w.bias_min > 0.0 && w.bias_max > w.bias_min) {
        return Err(Error::Validation(format!(
            "sweep range [{}, {}] G must be increasing and positive",
            w.bias_min, w.bias_max
        )));
    }
    let transport = TransportDefaults {
        initial_bias: positive("transport.initial_bias_G", t.initial_bias)? * GAUSS,
        end,
        duration: positive("transport.duration_ms", t.duration_ms)? * MS,
        chirp_a: t.chirp_a,
        chirp_b: t.chirp_b,
        sweep_bias_min: w.bias_min * GAUSS,
        sweep_bias_max: w.bias_max * GAUSS,
        sweep_samples: w.samples,
    };

    let q = &file.sequence;
    let plan = SequencePlan {
        hold: q.hold_ms * MS,
        free1: q.free1_ms * MS,
        lens: LensPulse {
            frequencies_hz: q.lens_hz,
            duration: q.lens_ms * MS,
            wire_current: q.lens_current,
            bias: q.lens_bias * GAUSS,
        },
        free2: q.free2_ms * MS,
        ..SequencePlan::default()
    };
    plan.validate()?;

    Ok(RunConfig {
        chip,
        species,
        transport,
        plan,
        hash: hex::encode(Sha256::digest(text.as_bytes())),
        source: source.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Usage(format!("unknown preset '{name}'")))?;
    parse_config(text, &format!("preset:{name}"))
}

/// Path from the command line, then the environment, else `None` for the
/// default preset.
pub fn config_path(cli: Option<&Path>) -> Option<PathBuf> {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

/// Loads the configuration selected by `path` or `preset_name`.
pub fn resolve(path: Option<&Path>, preset_name: Option<&str>) -> Result<RunConfig> {
    match (config_path(path), preset_name) {
        (Some(p), None) => load_config(&p),
        (None, Some(name)) => preset(name),
        (None, None) => preset(DEFAULT_PRESET),
        (Some(p), Some(name)) if path.is_none() => {
            log::info!("{CONFIG_ENV}={} ignored in favour of preset {name}", p.display());
            preset(name)
        }
        (Some(_), Some(_)) => Err(Error::Usage("give either --config or --preset, not both".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_preset_values() {
        let cfg = preset("quantus_z").unwrap();
        assert_eq!(cfg.chip.segments.len(), 3);
        assert!(cfg.chip.segments.iter().all(|s| s.current == 5.0));
        assert_eq!(cfg.chip.bias_direction, [0.0, 1.0, 0.0]);
        let lengths: Vec<f64> = cfg.chip.segments.iter().map(|s| s.length() / MM).collect();
        for (l, want) in lengths.iter().zip([16.0, 4.0, 16.0]) {
            assert!((l - want).abs() < 1e-12);
        }
        assert!((cfg.chip.bias_magnitude - 21.5e-4).abs() < 1e-15);
        assert_eq!(cfg.transport.end, TransportEnd::Bias(4.5 * GAUSS));
        assert_eq!(cfg.chip, ChipConfig::z_wire(5.0, 21.5 * GAUSS));
        assert_eq!(cfg.species, AtomSpecies::rb87());
        assert_eq!(cfg.plan, SequencePlan::default());
    }

    #[test]
    fn lensing_preset_ends_at_position() {
        let cfg = preset("quantus_dkc").unwrap();
        assert_eq!(cfg.transport.end, TransportEnd::Position(1.35 * MM));
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse_config("", "t"), Err(Error::Parse { line: 1, column: 1, .. })));
        assert!(matches!(parse_config("  \n# nothing\n", "t"), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_bias_is_a_validation_error() {
        let text = PRESETS[0].1.replace("bias_G = 21.5", "bias_G = -1.0");
        assert!(matches!(parse_config(&text, "t"), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_key_reports_location() {
        let text = PRESETS[0].1.replace("g_f = 0.5", "g_f = 0.5\nspin = 3");
        let line = text.lines().position(|l| l.starts_with("spin")).unwrap() + 1;
        match parse_config(&text, "t") {
            Err(Error::Parse { line: l, column, message }) => {
                assert_eq!(l, line);
                assert_eq!(column, 1);
                assert!(message.contains("spin"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_value_reports_location() {
        let text = "[chip]\ncurrent_A = \"five\"\n";
        match parse_config(text, "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ambiguous_transport_end_is_rejected() {
        let text = PRESETS[0].1.replace("final_bias_G = 4.5", "final_bias_G = 4.5\nfinal_z_mm = 1.2");
        assert!(matches!(parse_config(&text, "t"), Err(Error::Validation(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config(PRESETS[0].1, "a").unwrap();
        let b = parse_config(&format!("{}\n", PRESETS[0].1), "b").unwrap();
        assert_eq!(a.hash.len(), 64);
        assert_ne!(a.hash, b.hash);
    }
}
