//! Linear source-receptor transfer of emissions to receptor concentrations.
//!
//! A [`SourceReceptorMatrix`] holds one coefficient per (receptor, source,
//! species) in (µg/m³) per (metric ton/yr). Each coefficient maps the emitted
//! species into a PM2.5-equivalent annual-average concentration, so precursor
//! species (NOx, SO2, VOC) contribute through their secondary-formation
//! coefficients.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{from_csv, Error, Result};
use crate::pollutants::{PollutantVector, Species};

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A receptor or source region with its census attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
    pub households: f64,
    /// Region-to-nation per-household median income ratio.
    pub income_ratio: f64,
}

/// Ordered collection of regions keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionRegistry {
    regions: Vec<Region>,
    index: HashMap<String, usize>,
}

impl RegionRegistry {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut index = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if index.insert(r.region_id.clone(), i).is_some() {
                return Err(Error::DuplicateRegion(r.region_id.clone()));
            }
            for (what, v) in [("population", r.population), ("households", r.households)] {
                if !(v >= 0.0) {
                    return Err(Error::Negative {
                        what: format!("{what} of {}", r.region_id),
                        value: v,
                    });
                }
            }
        }
        Ok(RegionRegistry { regions, index })
    }

    /// Reads a `region_id,name,lat,lon,population,households,income_ratio` CSV.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| from_csv(path, e))?;
        check_header(
            path,
            &mut rdr,
            &["region_id", "name", "lat", "lon", "population", "households", "income_ratio"],
        )?;
        let mut regions = Vec::new();
        let mut seen = HashSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| from_csv(path, e))?;
            let line = line_of(&rec);
            let field = |i: usize, name: &str| -> Result<f64> {
                parse_f64(path, line, name, rec.get(i).unwrap_or(""))
            };
            let region = Region {
                region_id: rec[0].trim().to_owned(),
                name: rec[1].trim().to_owned(),
                lat: field(2, "lat")?,
                lon: field(3, "lon")?,
                population: field(4, "population")?,
                households: field(5, "households")?,
                income_ratio: field(6, "income_ratio")?,
            };
            if region.population < 0.0 || region.households < 0.0 {
                return Err(Error::parse(path, line, Some("population"), "negative count"));
            }
            if !seen.insert(region.region_id.clone()) {
                return Err(Error::parse(
                    path,
                    line,
                    Some("region_id"),
                    format!("duplicate region `{}`", region.region_id),
                ));
            }
            regions.push(region);
        }
        RegionRegistry::new(regions)
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.index.get(id).map(|&i| &self.regions[i])
    }

    pub fn require(&self, id: &str) -> Result<&Region> {
        self.get(id).ok_or_else(|| Error::UnknownRegion(id.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub(crate) fn parse_f64(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| {
        Error::parse(path, line, Some(column), format!("not a number: `{raw}`"))
    })?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, Some(column), format!("not finite: `{raw}`")));
    }
    Ok(v)
}

pub(crate) fn check_header<R: std::io::Read>(
    path: &Path,
    rdr: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<()> {
    let headers = rdr.headers().map_err(|e| from_csv(path, e))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            None,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Per (receptor, species) PM2.5-equivalent concentration delta, µg/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationField {
    pub receptors: Vec<String>,
    /// Row per receptor, one column per species contribution.
    pub values: Vec<[f64; Species::COUNT]>,
}

impl ConcentrationField {
    pub fn zeros(receptors: Vec<String>) -> Self {
        let values = vec![[0.0; Species::COUNT]; receptors.len()];
        ConcentrationField { receptors, values }
    }

    pub fn get(&self, receptor: usize, s: Species) -> f64 {
        self.values[receptor][s.index()]
    }

    /// Total PM2.5 concentration delta at a receptor: primary plus every
    /// precursor's secondary contribution.
    pub fn pm25_total(&self, receptor: usize) -> f64 {
        self.values[receptor].iter().sum()
    }

    pub fn len(&self) -> usize {
        self.receptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receptors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceReceptorMatrix {
    sources: Vec<String>,
    receptors: Vec<String>,
    source_index: HashMap<String, usize>,
    // [receptor][source][species], flattened.
    coefficients: Vec<f64>,
}

impl SourceReceptorMatrix {
    /// Zero matrix over the given region lists.
    pub fn zeros(sources: Vec<String>, receptors: Vec<String>) -> Result<Self> {
        let source_index = index_unique(&sources)?;
        index_unique(&receptors)?;
        let n = receptors.len() * sources.len() * Species::COUNT;
        Ok(SourceReceptorMatrix {
            sources,
            receptors,
            source_index,
            coefficients: vec![0.0; n],
        })
    }

    fn offset(&self, receptor: usize, source: usize, s: Species) -> usize {
        (receptor * self.sources.len() + source) * Species::COUNT + s.index()
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn receptors(&self) -> &[String] {
        &self.receptors
    }

    pub fn coefficient(&self, receptor: usize, source: usize, s: Species) -> f64 {
        self.coefficients[self.offset(receptor, source, s)]
    }

    pub fn set_coefficient(
        &mut self,
        receptor: usize,
        source: usize,
        s: Species,
        value: f64,
    ) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Negative {
                what: format!(
                    "coefficient ({}, {}, {s})",
                    self.receptors[receptor], self.sources[source]
                ),
                value,
            });
        }
        let off = self.offset(receptor, source, s);
        self.coefficients[off] = value;
        Ok(())
    }

    pub fn source_position(&self, id: &str) -> Option<usize> {
        self.source_index.get(id).copied()
    }

    /// Applies the transfer: `ΔC[i,s] = Σ_src coeff[i,src,s]·E[src][s]`.
    pub fn apply(&self, emissions: &BTreeMap<String, PollutantVector>) -> Result<ConcentrationField> {
        let mut resolved = Vec::with_capacity(emissions.len());
        for (src, e) in emissions {
            let j = self
                .source_position(src)
                .ok_or_else(|| Error::UnknownRegion(src.clone()))?;
            resolved.push((j, *e));
        }
        let mut field = ConcentrationField::zeros(self.receptors.clone());
        for (i, row) in field.values.iter_mut().enumerate() {
            for &(j, e) in &resolved {
                for s in Species::ALL {
                    row[s.index()] += self.coefficient(i, j, s) * e[s];
                }
            }
        }
        Ok(field)
    }

    /// Reads the `receptor_id,source_id,species,coefficient` CSV schema.
    ///
    /// Region lists are taken in order of first appearance. Missing cells are zero.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_inner(path.as_ref(), None)
    }

    /// Like [`load`](Self::load), additionally rejecting region ids absent from `registry`.
    pub fn load_with_registry(path: impl AsRef<Path>, registry: &RegionRegistry) -> Result<Self> {
        Self::load_inner(path.as_ref(), Some(registry))
    }

    fn load_inner(path: &Path, registry: Option<&RegionRegistry>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| from_csv(path, e))?;
        check_header(path, &mut rdr, &["receptor_id", "source_id", "species", "coefficient"])?;

        let mut cells: Vec<(usize, usize, Species, f64)> = Vec::new();
        let mut sources: Vec<String> = Vec::new();
        let mut receptors: Vec<String> = Vec::new();
        let mut src_pos: HashMap<String, usize> = HashMap::new();
        let mut rec_pos: HashMap<String, usize> = HashMap::new();
        let mut seen = HashSet::new();

        for rec in rdr.records() {
            let rec = rec.map_err(|e| from_csv(path, e))?;
            let line = line_of(&rec);
            let receptor = rec[0].trim();
            let source = rec[1].trim();
            for (col, id) in [("receptor_id", receptor), ("source_id", source)] {
                if id.is_empty() {
                    return Err(Error::parse(path, line, Some(col), "empty region id"));
                }
                if let Some(reg) = registry {
                    if reg.get(id).is_none() {
                        return Err(Error::parse(
                            path,
                            line,
                            Some(col),
                            format!("unknown region `{id}`"),
                        ));
                    }
                }
            }
            let species: Species = rec[2]
                .parse()
                .map_err(|e: Error| Error::parse(path, line, Some("species"), e.to_string()))?;
            let value = parse_f64(path, line, "coefficient", &rec[3])?;
            if value < 0.0 {
                return Err(Error::parse(
                    path,
                    line,
                    Some("coefficient"),
                    format!("negative coefficient {value} for ({receptor}, {source}, {species})"),
                ));
            }
            if !seen.insert((receptor.to_owned(), source.to_owned(), species)) {
                return Err(Error::parse(
                    path,
                    line,
                    None,
                    format!("duplicate cell ({receptor}, {source}, {species})"),
                ));
            }
            let i = *rec_pos.entry(receptor.to_owned()).or_insert_with(|| {
                receptors.push(receptor.to_owned());
                receptors.len() - 1
            });
            let j = *src_pos.entry(source.to_owned()).or_insert_with(|| {
                sources.push(source.to_owned());
                sources.len() - 1
            });
            cells.push((i, j, species, value));
        }

        let mut m = SourceReceptorMatrix::zeros(sources, receptors)?;
        for (i, j, s, v) in cells {
            m.set_coefficient(i, j, s, v)?;
        }
        Ok(m)
    }

    /// Writes nonzero coefficients, receptor-major, in the CSV schema.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| from_csv(path, e))?;
        w.write_record(["receptor_id", "source_id", "species", "coefficient"])
            .map_err(|e| from_csv(path, e))?;
        for (i, r) in self.receptors.iter().enumerate() {
            for (j, src) in self.sources.iter().enumerate() {
                for s in Species::ALL {
                    let v = self.coefficient(i, j, s);
                    if v != 0.0 {
                        w.write_record([r.as_str(), src.as_str(), s.key(), &v.to_string()])
                            .map_err(|e| from_csv(path, e))?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn index_unique(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateRegion(id.clone()));
        }
    }
    Ok(map)
}

/// Great-circle (haversine) distance in km.
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Parameters of the exponential distance-decay kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub decay_km: f64,
    /// Coefficient at zero distance, (µg/m³)/(t/yr).
    pub self_coefficient: f64,
    /// Per-species multiplier; precursor entries act as secondary-formation factors.
    pub species_scale: [f64; Species::COUNT],
}

impl KernelParams {
    pub fn new(decay_km: f64, self_coefficient: f64) -> Self {
        KernelParams {
            decay_km,
            self_coefficient,
            species_scale: [1.0; Species::COUNT],
        }
    }
}

/// Builds an every-region-to-every-region matrix with
/// `coeff = c0·scale[s]·exp(−d/L)`.
pub fn synthesize_matrix(regions: &[Region], params: &KernelParams) -> Result<SourceReceptorMatrix> {
    if !(params.decay_km > 0.0) || !params.decay_km.is_finite() {
        return Err(Error::domain(format!("decay length must be positive, got {}", params.decay_km)));
    }
    if !(params.self_coefficient > 0.0) || !params.self_coefficient.is_finite() {
        return Err(Error::domain(format!(
            "self coefficient must be positive, got {}",
            params.self_coefficient
        )));
    }
    for (s, &k) in Species::ALL.iter().zip(&params.species_scale) {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Negative {
                what: format!("{s} scale"),
                value: k,
            });
        }
    }
    let ids: Vec<String> = regions.iter().map(|r| r.region_id.clone()).collect();
    let mut m = SourceReceptorMatrix::zeros(ids.clone(), ids)?;
    for (i, rec) in regions.iter().enumerate() {
        for (j, src) in regions.iter().enumerate() {
            let d = great_circle_km(rec.lat, rec.lon, src.lat, src.lon);
            let base = params.self_coefficient * (-d / params.decay_km).exp();
            for s in Species::ALL {
                m.set_coefficient(i, j, s, base * params.species_scale[s.index()])?;
            }
        }
    }
    Ok(m)
}
