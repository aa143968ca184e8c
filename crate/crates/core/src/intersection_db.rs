//! Intersection geometry corpus.
//!
//! A corpus is a TOML document with one `[[intersection]]` table per
//! intersection and one `[[intersection.leg]]` table per crossing:
//!
//! ```toml
//! [[intersection]]
//! id = "central-lock"
//! name = "Central Ave and Lock St"
//! center = { lat = 40.7425, lon = -74.1786 }
//!
//! [[intersection.leg]]
//! street_name = "Lock St (north)"
//! entry = { lat = 40.74255723, lon = -74.17867554 }
//! heading_deg = 90.0
//! length_m = 12.7
//! ped_phase = 1
//! ```
//!
//! Leg order in the file is the order the short-tap gesture cycles through.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::PhaseId;
use crate::geo::{self, GeoPoint, Heading};
use crate::toml_util::{self, SchemaError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus schema error at {0}")]
    Schema(#[from] SchemaError),
    #[error("invalid {entity}: {reason}")]
    Invalid { entity: String, reason: String },
    #[error("no intersection found")]
    NotFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingLeg {
    pub street_name: String,
    pub crosswalk_entry: GeoPoint,
    pub crossing_heading: Heading,
    pub crossing_length_m: f64,
    pub ped_phase: PhaseId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: String,
    pub name: String,
    pub center: GeoPoint,
    legs: Vec<CrossingLeg>,
}

impl Intersection {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        center: GeoPoint,
        legs: Vec<CrossingLeg>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let invalid = |reason: String| CorpusError::Invalid {
            entity: format!("intersection '{id}'"),
            reason,
        };
        if id.trim().is_empty() {
            return Err(CorpusError::Invalid {
                entity: "intersection".into(),
                reason: "empty id".into(),
            });
        }
        if legs.len() < 2 {
            return Err(invalid(format!("needs at least 2 legs, has {}", legs.len())));
        }
        let mut names = HashSet::new();
        for leg in &legs {
            if leg.street_name.trim().is_empty() {
                return Err(invalid("leg with empty street_name".into()));
            }
            if !names.insert(leg.street_name.as_str()) {
                return Err(invalid(format!("duplicate street name '{}'", leg.street_name)));
            }
            if !(leg.crossing_length_m.is_finite() && leg.crossing_length_m > 0.0) {
                return Err(invalid(format!(
                    "leg '{}' crossing length must be > 0",
                    leg.street_name
                )));
            }
            if leg.ped_phase.get() == 0 {
                return Err(invalid(format!("leg '{}' ped_phase must be >= 1", leg.street_name)));
            }
        }
        Ok(Intersection { id, name: name.into(), center, legs })
    }

    /// Crossing options in short-tap cycle order.
    pub fn crossing_options(&self) -> &[CrossingLeg] {
        &self.legs
    }

    pub fn street_names(&self) -> Vec<&str> {
        self.legs.iter().map(|l| l.street_name.as_str()).collect()
    }
}

/// Immutable set of intersections loaded from a corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    intersections: Vec<Intersection>,
}

impl Registry {
    pub fn new(intersections: Vec<Intersection>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for x in &intersections {
            if !ids.insert(x.id.as_str()) {
                return Err(CorpusError::Invalid {
                    entity: format!("intersection '{}'", x.id),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(Registry { intersections })
    }

    pub fn load(document: &str) -> Result<Self, CorpusError> {
        let doc: CorpusDoc = toml_util::parse(document)?;
        doc.into_registry()
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Registry::load(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&CorpusDoc::from(self)).expect("corpus document serializes")
    }

    pub fn len(&self) -> usize {
        self.intersections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intersections.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Intersection> {
        self.intersections.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Intersection> {
        self.intersections.iter().find(|x| x.id == id)
    }

    /// Intersection whose center is closest to `p`; ties go to the
    /// lexicographically smaller id.
    pub fn nearest_intersection(&self, p: &GeoPoint) -> Result<(&Intersection, f64), CorpusError> {
        self.intersections
            .iter()
            .map(|x| (x, geo::distance(p, &x.center)))
            .min_by(|(xa, da), (xb, db)| da.total_cmp(db).then_with(|| xa.id.cmp(&xb.id)))
            .ok_or(CorpusError::NotFound)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusDoc {
    #[serde(default)]
    intersection: Vec<IntersectionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntersectionDoc {
    id: String,
    name: String,
    center: LatLon,
    #[serde(default)]
    leg: Vec<LegDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LegDoc {
    street_name: String,
    entry: LatLon,
    heading_deg: f64,
    length_m: f64,
    ped_phase: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub(crate) fn to_point(self, entity: &str) -> Result<GeoPoint, CorpusError> {
        GeoPoint::new(self.lat, self.lon).map_err(|e| CorpusError::Invalid {
            entity: entity.to_string(),
            reason: e.to_string(),
        })
    }
}

impl From<GeoPoint> for LatLon {
    fn from(p: GeoPoint) -> Self {
        LatLon { lat: p.lat_deg(), lon: p.lon_deg() }
    }
}

impl CorpusDoc {
    fn into_registry(self) -> Result<Registry, CorpusError> {
        let mut out = Vec::with_capacity(self.intersection.len());
        for x in self.intersection {
            let entity = format!("intersection '{}'", x.id);
            let center = x.center.to_point(&entity)?;
            let mut legs = Vec::with_capacity(x.leg.len());
            for leg in x.leg {
                let leg_entity = format!("{entity} leg '{}'", leg.street_name);
                let heading = Heading::new(leg.heading_deg).map_err(|e| CorpusError::Invalid {
                    entity: leg_entity.clone(),
                    reason: e.to_string(),
                })?;
                legs.push(CrossingLeg {
                    crosswalk_entry: leg.entry.to_point(&leg_entity)?,
                    street_name: leg.street_name,
                    crossing_heading: heading,
                    crossing_length_m: leg.length_m,
                    ped_phase: PhaseId::new_unchecked(leg.ped_phase),
                });
            }
            out.push(Intersection::new(x.id, x.name, center, legs)?);
        }
        Registry::new(out)
    }
}

impl From<&Registry> for CorpusDoc {
    fn from(r: &Registry) -> Self {
        CorpusDoc {
            intersection: r
                .intersections
                .iter()
                .map(|x| IntersectionDoc {
                    id: x.id.clone(),
                    name: x.name.clone(),
                    center: x.center.into(),
                    leg: x
                        .legs
                        .iter()
                        .map(|l| LegDoc {
                            street_name: l.street_name.clone(),
                            entry: l.crosswalk_entry.into(),
                            heading_deg: l.crossing_heading.deg(),
                            length_m: l.crossing_length_m,
                            ped_phase: l.ped_phase.get(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
