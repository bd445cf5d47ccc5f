//! Run and population documents (TOML).
//!
//! Probabilities are written as strings, `"1/4"` or `"0.25"`, and converted
//! exactly; integers are accepted as well. Floats are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fosd::FosdCaps;
use crate::obs::{Bin, Cell, ObservedDistribution, Support};
use crate::psi::PsiCaps;
use crate::scalar::Scalar;
use crate::simulate::{DgpSpec, TypeEntry};
use crate::subset::Subset;
use crate::typespace::{ExtraRow, Preset, RestrictionSpec, TypeSpace, DEFAULT_TYPE_CAP};
use crate::Rational;

/// An exact number as written in a document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frac(pub Rational);

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        let text = match Raw::deserialize(de)? {
            Raw::Int(i) => i.to_string(),
            Raw::Str(s) => s,
        };
        Rational::parse_exact(&text)
            .map(Frac)
            .ok_or_else(|| serde::de::Error::custom(format!("`{text}` is not an exact number (use \"p/q\" or a decimal string)")))
    }
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_fraction())
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_fraction())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinDoc {
    Label(String),
    Interval { label: String, lo: Frac, hi: Frac },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportDoc {
    pub bins: Vec<BinDoc>,
    pub treatments: Vec<String>,
    pub instruments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl SupportDoc {
    pub fn build(&self) -> Result<Support<Rational>> {
        let bins = self
            .bins
            .iter()
            .map(|b| match b {
                BinDoc::Label(l) => Bin::label(l.clone()),
                BinDoc::Interval { label, lo, hi } => Bin { label: label.clone(), interval: Some((lo.0.clone(), hi.0.clone())) },
            })
            .collect();
        let order = match &self.order {
            None => None,
            Some(o) => Some(
                o.iter()
                    .map(|t| {
                        self.treatments
                            .iter()
                            .position(|x| x == t)
                            .ok_or_else(|| Error::UnknownLabel { kind: "treatment", label: t.clone() })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Support::new(bins, self.treatments.clone(), self.instruments.clone(), order)
    }

    pub fn from_support(s: &Support<Rational>) -> Self {
        SupportDoc {
            bins: s
                .outcome_bins
                .iter()
                .map(|b| match &b.interval {
                    None => BinDoc::Label(b.label.clone()),
                    Some((lo, hi)) => BinDoc::Interval { label: b.label.clone(), lo: Frac(lo.clone()), hi: Frac(hi.clone()) },
                })
                .collect(),
            treatments: s.treatments.clone(),
            instruments: s.instruments.clone(),
            order: s.treatment_order.as_ref().map(|o| o.iter().map(|&l| s.treatments[l].clone()).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub z: String,
    pub x: String,
    pub bin: String,
    pub p: Frac,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellDoc>,
    /// Record file, relative to the document's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument_mass: Option<Vec<Frac>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binarize: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    #[serde(default)]
    pub label: String,
    /// Keyed by the type written as `"x1,x0"`.
    pub coeffs: BTreeMap<String, Frac>,
    pub rhs: Frac,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Promoted treatments for `unordered-monotone`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub promoted: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ruled_out: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<RowDoc>,
}

fn parse_type(s: &Support<Rational>, ts: &TypeSpace, labels: &[String]) -> Result<Vec<usize>> {
    let v = labels.iter().map(|l| s.treatment_index(l.trim())).collect::<Result<Vec<_>>>()?;
    ts.index(&v)?;
    Ok(v)
}

impl RestrictionDoc {
    pub fn build(&self, s: &Support<Rational>, ts: &TypeSpace) -> Result<RestrictionSpec<Rational>> {
        let preset = match self.preset.as_deref() {
            None => None,
            Some("none") => Some(Preset::None),
            Some("no-defiers") => Some(Preset::NoDefiers),
            Some("ordered-monotone") => Some(Preset::OrderedMonotone),
            Some("unordered-monotone") => {
                if self.promoted.is_empty() {
                    return Err(Error::Input("unordered-monotone needs a nonempty `promoted` list".into()));
                }
                let idx = self.promoted.iter().map(|p| s.treatment_index(p)).collect::<Result<Vec<_>>>()?;
                Some(Preset::UnorderedMonotone { promoted: Subset::from_indices(idx) })
            }
            Some("custom") => Some(Preset::Custom),
            Some(other) => return Err(Error::Input(format!("unknown preset `{other}`; try the `presets` subcommand"))),
        };
        let ruled_out = self.ruled_out.iter().map(|t| parse_type(s, ts, t)).collect::<Result<BTreeSet<_>>>()?;
        let mut extra_rows = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            let mut coeffs = vec![Rational::from_int(0); ts.len()];
            for (key, c) in &r.coeffs {
                let labels: Vec<String> = key.split(',').map(|p| p.to_string()).collect();
                coeffs[ts.index(&parse_type(s, ts, &labels)?)?] = c.0.clone();
            }
            let label = if r.label.is_empty() { format!("row {i}") } else { r.label.clone() };
            extra_rows.push(ExtraRow { coeffs, rhs: r.rhs.0.clone(), label });
        }
        let spec = RestrictionSpec { ruled_out, extra_rows, preset };
        spec.validate(s, ts)?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksDoc {
    pub feasibility: bool,
    pub flow: bool,
    pub fosd: bool,
    pub corollary1: bool,
    /// Overlap rows in the linear system (always-takers for binary instruments).
    pub sufficient_takers: bool,
    pub submono_harness: bool,
}

impl Default for ChecksDoc {
    fn default() -> Self {
        ChecksDoc { feasibility: true, flow: false, fosd: false, corollary1: false, sufficient_takers: true, submono_harness: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsDoc {
    pub types: usize,
    pub instruments: usize,
    pub subsets: usize,
    /// Largest instrument subset in the overlap table; `0` means all of them.
    pub max_subset_size: usize,
    pub part1_treatments: usize,
    pub part2_treatments: usize,
}

impl Default for CapsDoc {
    fn default() -> Self {
        let p = PsiCaps::default();
        let f = FosdCaps::default();
        CapsDoc {
            types: DEFAULT_TYPE_CAP,
            instruments: p.max_instruments,
            subsets: p.max_subsets,
            max_subset_size: 0,
            part1_treatments: f.part1_max_treatments,
            part2_treatments: f.part2_max_treatments,
        }
    }
}

impl CapsDoc {
    pub fn psi(&self) -> PsiCaps {
        PsiCaps { max_instruments: self.instruments, max_subsets: self.subsets }
    }

    pub fn fosd(&self) -> FosdCaps {
        FosdCaps { part1_max_treatments: self.part1_treatments, part2_max_treatments: self.part2_treatments }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    #[default]
    Structured,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub support: SupportDoc,
    #[serde(default)]
    pub input: InputDoc,
    #[serde(default)]
    pub restriction: RestrictionDoc,
    #[serde(default)]
    pub checks: ChecksDoc,
    #[serde(default)]
    pub caps: CapsDoc,
    #[serde(default)]
    pub output: OutputDoc,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    /// The observed law before any binarization.
    pub fn raw_distribution(&self) -> Result<ObservedDistribution<Rational>> {
        let support = self.support.build()?;
        let mut d = match (&self.input.records, self.input.cells.is_empty()) {
            (Some(_), false) => return Err(Error::Input("give either `input.cells` or `input.records`, not both".into())),
            (None, true) => return Err(Error::Input("no input: set `input.cells` or `input.records`".into())),
            (Some(path), true) => {
                let full = self.base_dir.join(path);
                let file = std::fs::File::open(&full).map_err(|e| Error::Input(format!("{}: {e}", full.display())))?;
                ObservedDistribution::ingest_csv(support, file)?
            }
            (None, false) => {
                let cells: Vec<Cell<Rational>> = self
                    .input
                    .cells
                    .iter()
                    .map(|c| Cell { z: c.z.clone(), x: c.x.clone(), bin: c.bin.clone(), prob: c.p.0.clone() })
                    .collect();
                ObservedDistribution::from_joint_table(support, &cells)?
            }
        };
        if let Some(m) = &self.input.instrument_mass {
            d.instrument_mass = Some(m.iter().map(|f| f.0.clone()).collect());
            d.validate()?;
        }
        Ok(d)
    }

    pub fn distribution(&self) -> Result<ObservedDistribution<Rational>> {
        let d = self.raw_distribution()?;
        match &self.input.binarize {
            Some(t) => d.binarize(t),
            None => Ok(d),
        }
    }

    /// A table document for an observed law.
    pub fn from_distribution(d: &ObservedDistribution<Rational>) -> Self {
        RunConfig {
            support: SupportDoc::from_support(&d.support),
            input: InputDoc {
                cells: d
                    .to_cells()
                    .into_iter()
                    .map(|c| CellDoc { z: c.z, x: c.x, bin: c.bin, p: Frac(c.prob) })
                    .collect(),
                records: None,
                instrument_mass: d.instrument_mass.as_ref().map(|m| m.iter().cloned().map(Frac).collect()),
                binarize: None,
            },
            restriction: RestrictionDoc::default(),
            checks: ChecksDoc::default(),
            caps: CapsDoc::default(),
            output: OutputDoc::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDoc {
    pub tz: Vec<String>,
    pub outcomes: Vec<String>,
    pub weight: Frac,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakDoc {
    pub x: String,
    pub z: String,
    pub bin: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpBody {
    pub instrument_law: Vec<Frac>,
    pub types: Vec<TypeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breaks: Vec<BreakDoc>,
    /// One population per instrument value, overriding `types`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_instrument: Option<Vec<Vec<TypeDoc>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpDoc {
    pub support: SupportDoc,
    pub dgp: DgpBody,
    #[serde(default)]
    pub restriction: RestrictionDoc,
}

fn type_entry(s: &Support<Rational>, t: &TypeDoc) -> Result<TypeEntry<Rational>> {
    Ok(TypeEntry {
        tz: t.tz.iter().map(|x| s.treatment_index(x)).collect::<Result<_>>()?,
        outcomes: t.outcomes.iter().map(|b| s.bin_index(b)).collect::<Result<_>>()?,
        weight: t.weight.0.clone(),
    })
}

fn type_doc(s: &Support<Rational>, e: &TypeEntry<Rational>) -> TypeDoc {
    TypeDoc {
        tz: e.tz.iter().map(|&x| s.treatments[x].clone()).collect(),
        outcomes: e.outcomes.iter().map(|&b| s.outcome_bins[b].label.clone()).collect(),
        weight: Frac(e.weight.clone()),
    }
}

impl DgpDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("population document: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("population documents serialize")
    }

    pub fn build(&self) -> Result<DgpSpec<Rational>> {
        let s = self.support.build()?;
        let type_table = self.dgp.types.iter().map(|t| type_entry(&s, t)).collect::<Result<_>>()?;
        let per_instrument = match &self.dgp.per_instrument {
            None => None,
            Some(p) => Some(
                p.iter()
                    .map(|tab| tab.iter().map(|t| type_entry(&s, t)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let mut exclusion_break = BTreeMap::new();
        for b in &self.dgp.breaks {
            exclusion_break.insert((s.treatment_index(&b.x)?, s.instrument_index(&b.z)?), s.bin_index(&b.bin)?);
        }
        let dgp = DgpSpec {
            support: s,
            type_table,
            exclusion_break,
            instrument_law: self.dgp.instrument_law.iter().map(|f| f.0.clone()).collect(),
            per_instrument,
        };
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn from_spec(dgp: &DgpSpec<Rational>, restriction: RestrictionDoc) -> Self {
        let s = &dgp.support;
        DgpDoc {
            support: SupportDoc::from_support(s),
            dgp: DgpBody {
                instrument_law: dgp.instrument_law.iter().cloned().map(Frac).collect(),
                types: dgp.type_table.iter().map(|e| type_doc(s, e)).collect(),
                breaks: dgp
                    .exclusion_break
                    .iter()
                    .map(|(&(x, z), &b)| BreakDoc {
                        x: s.treatments[x].clone(),
                        z: s.instruments[z].clone(),
                        bin: s.outcome_bins[b].label.clone(),
                    })
                    .collect(),
                per_instrument: dgp
                    .per_instrument
                    .as_ref()
                    .map(|p| p.iter().map(|tab| tab.iter().map(|e| type_doc(s, e)).collect()).collect()),
            },
            restriction,
        }
    }
}
