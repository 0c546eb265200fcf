//! Semantic class partition.
//!
//! The class set `C` is split into obstacle classes and free (traversable)
//! classes. A third group of ids is dropped before rasterization: moving
//! objects and unidentifiable points. Every class in `C` also carries the RGB
//! color used when a grid is rendered to PNG.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic label id (the low 16 bits of a `.label` record).
pub type ClassId = u16;

pub type Rgb = [u8; 3];

/// Color reserved for cells that must be inpainted.
pub const TO_INPAINT_RGB: Rgb = [255, 255, 255];
/// Color reserved for cells no sensor observed and that are not inpaint targets.
pub const UNOBSERVED_RGB: Rgb = [128, 128, 128];

const SEMANTIC_KITTI_TOML: &str = include_str!("../config/semantic_kitti.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassRole {
    Obstacle,
    Free,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    pub rgb: Rgb,
    pub role: ClassRole,
}

#[derive(Debug, Deserialize, Serialize)]
struct PartitionFile {
    class: Vec<ClassEntry>,
}

/// Validated partition of class ids into obstacle, free and ignored sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    entries: BTreeMap<ClassId, ClassEntry>,
}

impl ClassPartition {
    /// Builds a partition, rejecting duplicate ids, reserved colors, and
    /// colors shared between two rendered classes.
    pub fn new(entries: impl IntoIterator<Item = ClassEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for entry in entries {
            if let Some(prev) = map.insert(entry.id, entry) {
                return Err(Error::InvalidPartition(format!(
                    "class id {} declared more than once",
                    prev.id
                )));
            }
        }
        let mut by_color: BTreeMap<Rgb, &ClassEntry> = BTreeMap::new();
        for entry in map.values().filter(|e| e.role != ClassRole::Ignore) {
            if entry.rgb == TO_INPAINT_RGB || entry.rgb == UNOBSERVED_RGB {
                return Err(Error::PaletteCollision {
                    a: entry.name.clone(),
                    b: if entry.rgb == TO_INPAINT_RGB {
                        "<to-inpaint>".into()
                    } else {
                        "<unobserved>".into()
                    },
                    rgb: entry.rgb,
                });
            }
            if let Some(other) = by_color.insert(entry.rgb, entry) {
                return Err(Error::PaletteCollision {
                    a: other.name.clone(),
                    b: entry.name.clone(),
                    rgb: entry.rgb,
                });
            }
        }
        if !map.values().any(|e| e.role != ClassRole::Ignore) {
            return Err(Error::InvalidPartition(
                "no obstacle or free classes".into(),
            ));
        }
        Ok(ClassPartition { entries: map })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PartitionFile =
            toml::from_str(text).map_err(|e| Error::InvalidPartition(e.to_string()))?;
        Self::new(file.class)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = PartitionFile {
            class: self.entries.values().cloned().collect(),
        };
        toml::to_string(&file).expect("partition serializes")
    }

    /// The bundled SemanticKITTI partition.
    pub fn semantic_kitti() -> Self {
        Self::from_toml_str(SEMANTIC_KITTI_TOML).expect("bundled partition is valid")
    }

    pub fn entry(&self, id: ClassId) -> Option<&ClassEntry> {
        self.entries.get(&id)
    }

    pub fn role(&self, id: ClassId) -> Option<ClassRole> {
        self.entries.get(&id).map(|e| e.role)
    }

    /// True when `id` belongs to `C` (obstacle or free).
    pub fn contains(&self, id: ClassId) -> bool {
        matches!(self.role(id), Some(ClassRole::Obstacle | ClassRole::Free))
    }

    pub fn is_obstacle(&self, id: ClassId) -> bool {
        self.role(id) == Some(ClassRole::Obstacle)
    }

    pub fn is_free(&self, id: ClassId) -> bool {
        self.role(id) == Some(ClassRole::Free)
    }

    pub fn is_dynamic_or_ignored(&self, id: ClassId) -> bool {
        self.role(id) == Some(ClassRole::Ignore)
    }

    /// Ids of `C` in ascending order.
    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.entries
            .values()
            .filter(|e| e.role != ClassRole::Ignore)
            .map(|e| e.id)
    }

    pub fn obstacle_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.with_role(ClassRole::Obstacle)
    }

    pub fn free_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.with_role(ClassRole::Free)
    }

    pub fn ignored_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.with_role(ClassRole::Ignore)
    }

    fn with_role(&self, role: ClassRole) -> impl Iterator<Item = ClassId> + '_ {
        self.entries
            .values()
            .filter(move |e| e.role == role)
            .map(|e| e.id)
    }

    pub fn num_classes(&self) -> usize {
        self.classes().count()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.entries.get(&id).map(|e| e.name.as_str())
    }

    pub fn id_by_name(&self, name: &str) -> Option<ClassId> {
        self.entries.values().find(|e| e.name == name).map(|e| e.id)
    }

    /// Render color of a class in `C`.
    pub fn color(&self, id: ClassId) -> Option<Rgb> {
        self.entries
            .get(&id)
            .filter(|e| e.role != ClassRole::Ignore)
            .map(|e| e.rgb)
    }

    /// Inverse palette lookup over `C`.
    pub fn class_by_color(&self, rgb: Rgb) -> Option<ClassId> {
        self.entries
            .values()
            .find(|e| e.role != ClassRole::Ignore && e.rgb == rgb)
            .map(|e| e.id)
    }
}

impl Default for ClassPartition {
    fn default() -> Self {
        Self::semantic_kitti()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: ClassId, name: &str, rgb: Rgb, role: ClassRole) -> ClassEntry {
        ClassEntry {
            id,
            name: name.into(),
            rgb,
            role,
        }
    }

    #[test]
    fn bundled_partition_covers_c() {
        let p = ClassPartition::semantic_kitti();
        let c: Vec<_> = p.classes().collect();
        let mut union: Vec<_> = p.obstacle_classes().chain(p.free_classes()).collect();
        union.sort_unstable();
        assert_eq!(c, union);
        for id in p.obstacle_classes() {
            assert!(!p.is_free(id));
        }
        for id in p.ignored_classes() {
            assert!(!p.contains(id));
        }
        let road = p.id_by_name("road").unwrap();
        let building = p.id_by_name("building").unwrap();
        assert!(p.is_free(road));
        assert!(p.is_obstacle(building));
        assert!(p.is_dynamic_or_ignored(p.id_by_name("moving-car").unwrap()));
        for name in ["sidewalk", "parking", "terrain"] {
            assert!(p.is_free(p.id_by_name(name).unwrap()), "{name}");
        }
        for name in ["fence", "vegetation", "pole", "car"] {
            assert!(p.is_obstacle(p.id_by_name(name).unwrap()), "{name}");
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = ClassPartition::new([
            entry(1, "a", [1, 1, 1], ClassRole::Free),
            entry(1, "b", [2, 2, 2], ClassRole::Obstacle),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPartition(_)));
    }

    #[test]
    fn shared_colors_rejected() {
        let err = ClassPartition::new([
            entry(1, "a", [9, 9, 9], ClassRole::Free),
            entry(2, "b", [9, 9, 9], ClassRole::Obstacle),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::PaletteCollision { .. }));
    }

    #[test]
    fn ignored_classes_may_share_colors() {
        ClassPartition::new([
            entry(1, "a", [9, 9, 9], ClassRole::Free),
            entry(2, "gone", [9, 9, 9], ClassRole::Ignore),
        ])
        .unwrap();
    }

    #[test]
    fn reserved_colors_rejected() {
        for rgb in [TO_INPAINT_RGB, UNOBSERVED_RGB] {
            let err = ClassPartition::new([entry(1, "a", rgb, ClassRole::Free)]).unwrap_err();
            assert!(matches!(err, Error::PaletteCollision { .. }));
        }
    }

    #[test]
    fn bad_role_rejected() {
        let text = "[[class]]\nid = 1\nname = \"x\"\nrgb = [1, 2, 3]\nrole = \"maybe\"\n";
        assert!(matches!(
            ClassPartition::from_toml_str(text),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let p = ClassPartition::semantic_kitti();
        let back = ClassPartition::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
    }
}
