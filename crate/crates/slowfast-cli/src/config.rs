//! Layered run configuration: TOML file, overridden field-by-field by
//! command-line flags, validated per command, and hashed canonically so
//! every output can name the exact configuration that produced it.

use serde::Deserialize;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelSection>,
    pub simulate: Option<SimulateSection>,
    pub sweep: Option<SweepSection>,
    #[serde(rename = "singular-orbit")]
    pub singular_orbit: Option<SingularOrbitSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub delta: Option<f64>,
    pub theta: Option<f64>,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub u0: Option<f64>,
    pub v0: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_every: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub step: Option<f64>,
    pub max_transient: Option<f64>,
    pub refine: Option<bool>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct SingularOrbitSection {
    pub samples_per_segment: Option<usize>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// Fully merged configuration; every field still optional until the
/// per-command validation claims the ones it needs.
#[derive(Debug, Default, Clone)]
pub struct Effective {
    pub model: ModelSection,
    pub simulate: SimulateSection,
    pub sweep: SweepSection,
    pub singular_orbit: SingularOrbitSection,
    pub output: OutputSection,
}

fn take<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

impl Effective {
    pub fn merge(file: FileConfig, flags: Effective) -> Effective {
        let fm = file.model.unwrap_or_default();
        let fs = file.simulate.unwrap_or_default();
        let fw = file.sweep.unwrap_or_default();
        let fo = file.singular_orbit.unwrap_or_default();
        let fp = file.output.unwrap_or_default();
        Effective {
            model: ModelSection {
                delta: take(flags.model.delta, fm.delta),
                theta: take(flags.model.theta, fm.theta),
                eta: take(flags.model.eta, fm.eta),
                epsilon: take(flags.model.epsilon, fm.epsilon),
            },
            simulate: SimulateSection {
                u0: take(flags.simulate.u0, fs.u0),
                v0: take(flags.simulate.v0, fs.v0),
                t_end: take(flags.simulate.t_end, fs.t_end),
                sample_every: take(flags.simulate.sample_every, fs.sample_every),
                rtol: take(flags.simulate.rtol, fs.rtol),
                atol: take(flags.simulate.atol, fs.atol),
            },
            sweep: SweepSection {
                delta_min: take(flags.sweep.delta_min, fw.delta_min),
                delta_max: take(flags.sweep.delta_max, fw.delta_max),
                step: take(flags.sweep.step, fw.step),
                max_transient: take(flags.sweep.max_transient, fw.max_transient),
                refine: take(flags.sweep.refine, fw.refine),
            },
            singular_orbit: SingularOrbitSection {
                samples_per_segment: take(
                    flags.singular_orbit.samples_per_segment,
                    fo.samples_per_segment,
                ),
            },
            output: OutputSection {
                path: take(flags.output.path, fp.path),
            },
        }
    }

    /// Canonical `section.key=value` listing of every set field, sorted,
    /// prefixed with the command name. This string is what gets hashed.
    pub fn canonical(&self, command: &str) -> String {
        let mut entries: Vec<String> = Vec::new();
        let push_f64 = |entries: &mut Vec<String>, key: &str, v: Option<f64>| {
            if let Some(x) = v {
                entries.push(format!("{key}={x:e}"));
            }
        };
        push_f64(&mut entries, "model.delta", self.model.delta);
        push_f64(&mut entries, "model.theta", self.model.theta);
        push_f64(&mut entries, "model.eta", self.model.eta);
        push_f64(&mut entries, "model.epsilon", self.model.epsilon);
        push_f64(&mut entries, "simulate.u0", self.simulate.u0);
        push_f64(&mut entries, "simulate.v0", self.simulate.v0);
        push_f64(&mut entries, "simulate.t_end", self.simulate.t_end);
        push_f64(&mut entries, "simulate.sample_every", self.simulate.sample_every);
        push_f64(&mut entries, "simulate.rtol", self.simulate.rtol);
        push_f64(&mut entries, "simulate.atol", self.simulate.atol);
        push_f64(&mut entries, "sweep.delta_min", self.sweep.delta_min);
        push_f64(&mut entries, "sweep.delta_max", self.sweep.delta_max);
        push_f64(&mut entries, "sweep.step", self.sweep.step);
        push_f64(&mut entries, "sweep.max_transient", self.sweep.max_transient);
        if let Some(r) = self.sweep.refine {
            entries.push(format!("sweep.refine={r}"));
        }
        if let Some(n) = self.singular_orbit.samples_per_segment {
            entries.push(format!("singular-orbit.samples_per_segment={n}"));
        }
        entries.sort();
        let mut s = format!("command={command}\n");
        for e in entries {
            let _ = writeln!(s, "{e}");
        }
        s
    }

    pub fn hash(&self, command: &str) -> u64 {
        fnv1a(self.canonical(command).as_bytes())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A missing required field, reported by its TOML path.
pub fn require<T: Copy>(v: Option<T>, field: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing required field {field}"))
}
