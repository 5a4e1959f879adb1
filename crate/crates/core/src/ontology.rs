//! Category forest: typing, coloring and grouping of features.
//!
//! Categories come from a JSON config of the form
//! `{ "categories": [ { "id", "label", "color": [r,g,b]?, "icon_id"?,
//! "parent_id"?, "default_height_m"? } ] }`. Categories without an explicit
//! color get a golden-angle hue at 90% saturation and 45% lightness, assigned
//! in config order.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Hue step between consecutive auto-colored categories, in degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 137.508;
pub const PALETTE_SATURATION: f64 = 0.90;
pub const PALETTE_LIGHTNESS: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(&self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

/// HSL to RGB, each channel rounded to the nearest integer.
/// `hue` in degrees, `saturation` and `lightness` in [0, 1].
pub fn hsl_to_rgb(hue: f64, saturation: f64, lightness: f64) -> Rgb {
    let h = hue.rem_euclid(360.0) / 360.0;
    if saturation == 0.0 {
        let v = (lightness * 255.0).round() as u8;
        return Rgb(v, v, v);
    }
    let q = if lightness < 0.5 {
        lightness * (1.0 + saturation)
    } else {
        lightness + saturation - lightness * saturation
    };
    let p = 2.0 * lightness - q;
    let channel = |t: f64| {
        let t = t.rem_euclid(1.0);
        let v = if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        };
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    };
    Rgb(channel(h + 1.0 / 3.0), channel(h), channel(h - 1.0 / 3.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub id: String,
    pub label: String,
    pub color: Option<Rgb>,
    pub icon_id: Option<String>,
    pub parent_id: Option<String>,
    pub default_height_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OntologyError {
    #[error("malformed ontology config: {0}")]
    MalformedConfig(String),
    #[error("duplicate category id `{0}`")]
    DuplicateCategoryId(String),
    #[error("category `{category}` names unknown parent `{parent}`")]
    UnknownParent { category: String, parent: String },
    #[error("category hierarchy has a cycle through `{0}`")]
    CyclicHierarchy(String),
    #[error("category `{0}` has a color component outside 0-255")]
    BadColor(String),
    #[error("category `{0}` has a negative or non-finite default height")]
    BadHeight(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
}

impl OntologyError {
    pub fn code(&self) -> &'static str {
        match self {
            OntologyError::MalformedConfig(_) => "malformed_config",
            OntologyError::DuplicateCategoryId(_) => "duplicate_category_id",
            OntologyError::UnknownParent { .. } => "unknown_parent",
            OntologyError::CyclicHierarchy(_) => "cyclic_hierarchy",
            OntologyError::BadColor(_) => "bad_color",
            OntologyError::BadHeight(_) => "bad_height",
            OntologyError::UnknownCategory(_) => "unknown_category",
        }
    }
}

#[derive(Deserialize)]
struct Config {
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawCategory {
    id: String,
    label: Option<String>,
    color: Option<Vec<Value>>,
    icon_id: Option<String>,
    parent_id: Option<String>,
    default_height_m: Option<f64>,
}

/// Validated category forest. Immutable after [`load_ontology`].
#[derive(Debug, Clone)]
pub struct Ontology {
    categories: Vec<Category>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    colors: Vec<Rgb>,
}

pub fn load_ontology(config: &str) -> Result<Ontology, OntologyError> {
    let raw: Config =
        serde_json::from_str(config).map_err(|e| OntologyError::MalformedConfig(e.to_string()))?;
    let categories = raw
        .categories
        .into_iter()
        .map(|c| {
            let color = c.color.map(|rgb| parse_color(&c.id, &rgb)).transpose()?;
            if let Some(h) = c.default_height_m {
                if !(h.is_finite() && h >= 0.0) {
                    return Err(OntologyError::BadHeight(c.id));
                }
            }
            Ok(Category {
                label: c.label.unwrap_or_else(|| c.id.clone()),
                id: c.id,
                color,
                icon_id: c.icon_id,
                parent_id: c.parent_id,
                default_height_m: c.default_height_m,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ontology::new(categories)
}

fn parse_color(id: &str, rgb: &[Value]) -> Result<Rgb, OntologyError> {
    let bad = || OntologyError::BadColor(id.to_string());
    if rgb.len() != 3 {
        return Err(bad());
    }
    let mut out = [0u8; 3];
    for (slot, v) in out.iter_mut().zip(rgb) {
        let n = v.as_i64().ok_or_else(bad)?;
        *slot = u8::try_from(n).map_err(|_| bad())?;
    }
    Ok(Rgb(out[0], out[1], out[2]))
}

impl Ontology {
    pub fn new(categories: Vec<Category>) -> Result<Self, OntologyError> {
        let mut index = HashMap::with_capacity(categories.len());
        for (i, c) in categories.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(OntologyError::DuplicateCategoryId(c.id.clone()));
            }
        }
        let mut parents = vec![None; categories.len()];
        let mut children = vec![Vec::new(); categories.len()];
        for (i, c) in categories.iter().enumerate() {
            if let Some(parent) = &c.parent_id {
                let p = *index
                    .get(parent)
                    .ok_or_else(|| OntologyError::UnknownParent {
                        category: c.id.clone(),
                        parent: parent.clone(),
                    })?;
                parents[i] = Some(p);
                children[p].push(i);
            }
        }
        // Walk up from every node; a forest reaches a root within n steps.
        for start in 0..categories.len() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parents[cur] {
                steps += 1;
                if p == start || steps > categories.len() {
                    return Err(OntologyError::CyclicHierarchy(categories[start].id.clone()));
                }
                cur = p;
            }
        }

        let mut auto = 0usize;
        let colors = categories
            .iter()
            .map(|c| {
                c.color.unwrap_or_else(|| {
                    let hue = (auto as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0);
                    auto += 1;
                    hsl_to_rgb(hue, PALETTE_SATURATION, PALETTE_LIGHTNESS)
                })
            })
            .collect();

        Ok(Self {
            categories,
            index,
            children,
            colors,
        })
    }

    /// Categories in config order.
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn get(&self, id: &str) -> Option<&Category> {
        self.index.get(id).map(|&i| &self.categories[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn position(&self, id: &str) -> Result<usize, OntologyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| OntologyError::UnknownCategory(id.to_string()))
    }

    pub fn roots(&self) -> Vec<&Category> {
        self.categories
            .iter()
            .filter(|c| c.parent_id.is_none())
            .collect()
    }

    pub fn resolve_color(&self, category_id: &str) -> Result<Rgb, OntologyError> {
        Ok(self.colors[self.position(category_id)?])
    }

    /// The category and all its transitive children.
    pub fn descendants(&self, category_id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self.position(category_id)?];
        while let Some(i) = stack.pop() {
            out.insert(self.categories[i].id.clone());
            stack.extend(&self.children[i]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent HSL conversion via the chroma/sector formulation.
    fn hsl_oracle(h: f64, s: f64, l: f64) -> (f64, f64, f64) {
        let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
        let hp = h / 60.0;
        let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
        let (r, g, b) = match hp as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = l - c / 2.0;
        ((r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0)
    }

    fn rgb_to_hsl(c: Rgb) -> (f64, f64) {
        let (r, g, b) = (c.0 as f64 / 255.0, c.1 as f64 / 255.0, c.2 as f64 / 255.0);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let l = (max + min) / 2.0;
        let s = if max == min {
            0.0
        } else {
            (max - min) / (1.0 - (2.0 * l - 1.0).abs())
        };
        (s, l)
    }

    fn config(entries: &str) -> String {
        format!(r#"{{"categories":[{entries}]}}"#)
    }

    #[test]
    fn flat_forest_has_two_roots() {
        let o = load_ontology(&config(
            r#"{"id":"school","label":"Schools"},{"id":"hospital","label":"Hospitals"}"#,
        ))
        .unwrap();
        assert_eq!(o.roots().len(), 2);
    }

    #[test]
    fn two_cycle_rejected() {
        let err = load_ontology(&config(
            r#"{"id":"hospital","label":"H","parent_id":"services"},
               {"id":"services","label":"S","parent_id":"hospital"}"#,
        ))
        .unwrap_err();
        assert!(matches!(err, OntologyError::CyclicHierarchy(_)));
    }

    #[test]
    fn self_parent_rejected() {
        let err = load_ontology(&config(r#"{"id":"a","label":"A","parent_id":"a"}"#)).unwrap_err();
        assert_eq!(err, OntologyError::CyclicHierarchy("a".into()));
    }

    #[test]
    fn bad_color_rejected() {
        let err =
            load_ontology(&config(r#"{"id":"a","label":"A","color":[300,0,0]}"#)).unwrap_err();
        assert_eq!(err, OntologyError::BadColor("a".into()));
        let err = load_ontology(&config(r#"{"id":"a","label":"A","color":[1,2]}"#)).unwrap_err();
        assert_eq!(err, OntologyError::BadColor("a".into()));
    }

    #[test]
    fn duplicate_and_unknown_parent() {
        assert_eq!(
            load_ontology(&config(r#"{"id":"a","label":"A"},{"id":"a","label":"B"}"#)).unwrap_err(),
            OntologyError::DuplicateCategoryId("a".into())
        );
        assert!(matches!(
            load_ontology(&config(r#"{"id":"a","label":"A","parent_id":"zz"}"#)).unwrap_err(),
            OntologyError::UnknownParent { .. }
        ));
    }

    #[test]
    fn explicit_and_palette_colors() {
        let o = load_ontology(&config(
            r#"{"id":"red","label":"R","color":[220,20,60]},
               {"id":"auto0","label":"A0"},{"id":"auto1","label":"A1"}"#,
        ))
        .unwrap();
        assert_eq!(o.resolve_color("red").unwrap(), Rgb(220, 20, 60));

        let (r, g, b) = hsl_oracle(0.0, 0.9, 0.45);
        let expect0 = Rgb(r.round() as u8, g.round() as u8, b.round() as u8);
        assert_eq!(expect0, Rgb(218, 11, 11));
        assert_eq!(o.resolve_color("auto0").unwrap(), expect0);

        let (r, g, b) = hsl_oracle(137.508, 0.9, 0.45);
        let expect1 = Rgb(r.round() as u8, g.round() as u8, b.round() as u8);
        assert_eq!(o.resolve_color("auto1").unwrap(), expect1);
        assert_ne!(expect0, expect1);

        assert_eq!(
            o.resolve_color("nope"),
            Err(OntologyError::UnknownCategory("nope".into()))
        );
    }

    #[test]
    fn descendants_examples() {
        let o = load_ontology(&config(
            r#"{"id":"a","label":"A"},{"id":"b","label":"B","parent_id":"a"},
               {"id":"c","label":"C","parent_id":"b"},{"id":"d","label":"D","parent_id":"a"},
               {"id":"leaf","label":"L"}"#,
        ))
        .unwrap();
        assert_eq!(
            o.descendants("leaf").unwrap(),
            BTreeSet::from(["leaf".to_string()])
        );
        assert_eq!(o.descendants("b").unwrap().len(), 2);
        assert_eq!(
            o.descendants("a").unwrap(),
            ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect()
        );
        assert!(o.descendants("x").is_err());
    }

    #[test]
    fn colors_deterministic_across_loads() {
        let cfg = config(r#"{"id":"a","label":"A"},{"id":"b","label":"B"},{"id":"c","label":"C"}"#);
        let a = load_ontology(&cfg).unwrap();
        let b = load_ontology(&cfg).unwrap();
        for c in ["a", "b", "c"] {
            assert_eq!(a.resolve_color(c), b.resolve_color(c));
        }
    }

    proptest! {
        #[test]
        fn palette_matches_oracle_and_round_trips(i in 0usize..100) {
            let hue = (i as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0);
            let c = hsl_to_rgb(hue, PALETTE_SATURATION, PALETTE_LIGHTNESS);
            let (r, g, b) = hsl_oracle(hue, PALETTE_SATURATION, PALETTE_LIGHTNESS);
            prop_assert!((c.0 as f64 - r).abs() <= 0.5 + 1e-9);
            prop_assert!((c.1 as f64 - g).abs() <= 0.5 + 1e-9);
            prop_assert!((c.2 as f64 - b).abs() <= 0.5 + 1e-9);

            // Back to HSL within rounding of one unit per channel.
            let (s, l) = rgb_to_hsl(c);
            prop_assert!((l - PALETTE_LIGHTNESS).abs() <= 1.0 / 255.0);
            // Channel rounding of 1/255 on (max - min) is amplified by the
            // saturation denominator 1 - |2L - 1|.
            prop_assert!((s - PALETTE_SATURATION).abs() <= 1.0 / 255.0 / (1.0 - (2.0 * l - 1.0).abs()));
        }

        #[test]
        fn root_descendants_are_disjoint(parents in proptest::collection::vec(proptest::option::of(0usize..20), 1..20)) {
            // Parent links only point to earlier entries, so the input is a forest.
            let categories: Vec<Category> = parents.iter().enumerate().map(|(i, p)| Category {
                id: format!("c{i}"),
                label: format!("C{i}"),
                color: None,
                icon_id: None,
                parent_id: p.filter(|&p| p < i).map(|p| format!("c{p}")),
                default_height_m: None,
            }).collect();
            let o = Ontology::new(categories).unwrap();
            let mut seen = BTreeSet::new();
            for root in o.roots() {
                for d in o.descendants(&root.id).unwrap() {
                    prop_assert!(seen.insert(d));
                }
            }
            prop_assert_eq!(seen.len(), parents.len());
        }
    }
}
