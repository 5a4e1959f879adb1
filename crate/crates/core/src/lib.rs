//! Category-styled map engine for geographic search results.
//!
//! Features arrive as a GeoJSON FeatureCollection, are typed by a category
//! forest, indexed on a uniform grid and rendered either as a deterministic
//! SVG map or as a 3D scene of extruded polygons and billboards. Each
//! category has a visibility switch and an opacity slider held in a
//! [`style::ViewState`].

pub mod catalog;
pub mod geo;
pub mod icons;
pub mod ontology;
pub mod render2d;
pub mod scene3d;
pub mod style;

pub use catalog::{ingest, CatalogError, Dataset, DetailTable};
pub use geo::{Bbox, Feature, Geometry, LonLat, ParseError, Region};
pub use icons::IconRegistry;
pub use ontology::{load_ontology, Ontology, OntologyError, Rgb};
pub use render2d::{render_svg, render_view, RenderError};
pub use scene3d::{build_scene, scene_view, Scene, SceneError};
pub use style::{Mode, ViewState, Viewport};
