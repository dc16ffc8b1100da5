//! Unified label space over multiple dataset schemas.
//!
//! Each dataset ships its own class inventory; building a joint space
//! assigns every `(dataset, local class)` pair a dense joint id. Classes are
//! only merged through explicit rules, and a rule may never mix stuff with
//! thing classes — a name collision across categories (the classic
//! stuff-pole vs thing-pole case) stays two distinct joint classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Stuff/thing split. The derived order (stuff before thing) is part of the
/// deterministic joint-id assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Stuff,
    Thing,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Category::Stuff => write!(f, "stuff"),
            Category::Thing => write!(f, "thing"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabelSpaceError {
    #[error("duplicate dataset id {0:?} in schema set")]
    DuplicateDataset(String),
    #[error("dataset {dataset:?}: duplicate local class id {local_id}")]
    DuplicateLocalId { dataset: String, local_id: u32 },
    #[error("dataset {dataset:?}: class {local_id} has an empty name")]
    EmptyClassName { dataset: String, local_id: u32 },
    #[error("rule {joint_name:?} references unknown class ({dataset:?}, {local_id})")]
    UnknownRuleMember {
        joint_name: String,
        dataset: String,
        local_id: u32,
    },
    #[error("rule {joint_name:?} merges classes of different categories")]
    CrossCategoryMerge { joint_name: String },
    #[error("class ({dataset:?}, {local_id}) appears in more than one rule")]
    DuplicateRuleMember { dataset: String, local_id: u32 },
    #[error("rule {joint_name:?} has no members")]
    EmptyRule { joint_name: String },
    #[error("segment {segment_id}: class {class_id} is not in the {dataset:?} schema")]
    UnknownClass {
        dataset: String,
        segment_id: u32,
        class_id: u32,
    },
    #[error("joint id {joint_id} out of range (space has {num_classes} classes)")]
    JointIdOutOfRange { joint_id: u32, num_classes: u32 },
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// One class of a dataset schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub local_id: u32,
    pub name: String,
    pub category: Category,
    #[serde(default)]
    pub eval_ignore: bool,
}

/// A dataset's class inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub dataset_id: String,
    pub classes: Vec<ClassDef>,
}

impl DatasetSchema {
    fn validate(&self) -> Result<(), LabelSpaceError> {
        let mut seen = std::collections::BTreeSet::new();
        for class in &self.classes {
            if !seen.insert(class.local_id) {
                return Err(LabelSpaceError::DuplicateLocalId {
                    dataset: self.dataset_id.clone(),
                    local_id: class.local_id,
                });
            }
            if class.name.is_empty() {
                return Err(LabelSpaceError::EmptyClassName {
                    dataset: self.dataset_id.clone(),
                    local_id: class.local_id,
                });
            }
        }
        Ok(())
    }
}

/// A set of `(dataset, local class)` pairs collapsed into one joint class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub joint_name: String,
    /// `(dataset_id, local_id)` pairs; all must share one category.
    pub members: Vec<(String, u32)>,
}

/// One class of the joint space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointEntry {
    pub joint_id: u32,
    pub name: String,
    pub category: Category,
    /// Source pairs, sorted; every source shares `category`.
    pub sources: Vec<(String, u32)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RemapRow {
    dataset_id: String,
    local_id: u32,
    joint_id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JointSpaceDoc {
    entries: Vec<JointEntry>,
    remap: Vec<RemapRow>,
}

/// The unified taxonomy: dense joint ids 1..=K plus the total remap table.
/// Joint id 0 is reserved for void. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JointSpaceDoc", into = "JointSpaceDoc")]
pub struct JointLabelSpace {
    entries: Vec<JointEntry>,
    remap: BTreeMap<(String, u32), u32>,
}

impl From<JointLabelSpace> for JointSpaceDoc {
    fn from(space: JointLabelSpace) -> Self {
        JointSpaceDoc {
            entries: space.entries,
            remap: space
                .remap
                .into_iter()
                .map(|((dataset_id, local_id), joint_id)| RemapRow {
                    dataset_id,
                    local_id,
                    joint_id,
                })
                .collect(),
        }
    }
}

impl TryFrom<JointSpaceDoc> for JointLabelSpace {
    type Error = String;

    fn try_from(doc: JointSpaceDoc) -> Result<Self, String> {
        let k = doc.entries.len() as u32;
        for (i, entry) in doc.entries.iter().enumerate() {
            if entry.joint_id != i as u32 + 1 {
                return Err(format!(
                    "entry {} has joint_id {}, expected contiguous ids from 1",
                    i, entry.joint_id
                ));
            }
        }
        let mut remap = BTreeMap::new();
        for row in doc.remap {
            if row.joint_id == 0 || row.joint_id > k {
                return Err(format!(
                    "remap row ({}, {}) targets invalid joint id {}",
                    row.dataset_id, row.local_id, row.joint_id
                ));
            }
            if remap
                .insert((row.dataset_id.clone(), row.local_id), row.joint_id)
                .is_some()
            {
                return Err(format!(
                    "remap row ({}, {}) duplicated",
                    row.dataset_id, row.local_id
                ));
            }
        }
        Ok(JointLabelSpace {
            entries: doc.entries,
            remap,
        })
    }
}

impl JointLabelSpace {
    /// Number of joint classes K (void excluded).
    pub fn num_classes(&self) -> u32 {
        self.entries.len() as u32
    }

    /// Entries ordered by joint id.
    pub fn entries(&self) -> &[JointEntry] {
        &self.entries
    }

    pub fn entry(&self, joint_id: u32) -> Option<&JointEntry> {
        if joint_id == 0 || joint_id > self.num_classes() {
            None
        } else {
            Some(&self.entries[joint_id as usize - 1])
        }
    }

    /// Joint id for a `(dataset, local class)` pair.
    pub fn remap(&self, dataset_id: &str, local_id: u32) -> Option<u32> {
        self.remap.get(&(dataset_id.to_string(), local_id)).copied()
    }

    /// Category of a joint id; `None` is void (id 0). Ids beyond K error.
    pub fn category_of(&self, joint_id: u32) -> Result<Option<Category>, LabelSpaceError> {
        if joint_id == 0 {
            return Ok(None);
        }
        self.entry(joint_id)
            .map(|e| Some(e.category))
            .ok_or(LabelSpaceError::JointIdOutOfRange {
                joint_id,
                num_classes: self.num_classes(),
            })
    }

    /// `(thing, stuff)` class counts.
    pub fn category_counts(&self) -> (u32, u32) {
        let things = self
            .entries
            .iter()
            .filter(|e| e.category == Category::Thing)
            .count() as u32;
        (things, self.entries.len() as u32 - things)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("space serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Build the joint space for a schema set and merge rules.
///
/// Every input class maps to exactly one joint id: merged classes share
/// their rule's entry, everything else becomes its own entry. Entries are
/// sorted by category, then name, then first source, and numbered from 1,
/// so identical inputs always produce the identical space.
pub fn build_joint_space(
    schemas: &[DatasetSchema],
    rules: &[MergeRule],
) -> Result<JointLabelSpace, LabelSpaceError> {
    let mut class_index: BTreeMap<(String, u32), &ClassDef> = BTreeMap::new();
    {
        let mut dataset_ids = std::collections::BTreeSet::new();
        for schema in schemas {
            schema.validate()?;
            if !dataset_ids.insert(&schema.dataset_id) {
                return Err(LabelSpaceError::DuplicateDataset(schema.dataset_id.clone()));
            }
            for class in &schema.classes {
                class_index.insert((schema.dataset_id.clone(), class.local_id), class);
            }
        }
    }

    struct PendingEntry {
        name: String,
        category: Category,
        sources: Vec<(String, u32)>,
    }

    let mut merged: std::collections::BTreeSet<(String, u32)> = std::collections::BTreeSet::new();
    let mut pending: Vec<PendingEntry> = Vec::new();

    for rule in rules {
        if rule.members.is_empty() {
            return Err(LabelSpaceError::EmptyRule {
                joint_name: rule.joint_name.clone(),
            });
        }
        let mut sources: Vec<(String, u32)> = Vec::with_capacity(rule.members.len());
        let mut category: Option<Category> = None;
        for (dataset, local_id) in &rule.members {
            let key = (dataset.clone(), *local_id);
            let class =
                class_index
                    .get(&key)
                    .ok_or_else(|| LabelSpaceError::UnknownRuleMember {
                        joint_name: rule.joint_name.clone(),
                        dataset: dataset.clone(),
                        local_id: *local_id,
                    })?;
            match category {
                None => category = Some(class.category),
                Some(c) if c != class.category => {
                    return Err(LabelSpaceError::CrossCategoryMerge {
                        joint_name: rule.joint_name.clone(),
                    })
                }
                _ => {}
            }
            if !merged.insert(key.clone()) {
                return Err(LabelSpaceError::DuplicateRuleMember {
                    dataset: dataset.clone(),
                    local_id: *local_id,
                });
            }
            sources.push(key);
        }
        sources.sort();
        pending.push(PendingEntry {
            name: rule.joint_name.clone(),
            category: category.expect("rule has members"),
            sources,
        });
    }

    for (key, class) in &class_index {
        if !merged.contains(key) {
            pending.push(PendingEntry {
                name: class.name.clone(),
                category: class.category,
                sources: vec![key.clone()],
            });
        }
    }

    pending.sort_by(|a, b| {
        (a.category, &a.name, &a.sources[0]).cmp(&(b.category, &b.name, &b.sources[0]))
    });

    let mut entries = Vec::with_capacity(pending.len());
    let mut remap = BTreeMap::new();
    for (i, entry) in pending.into_iter().enumerate() {
        let joint_id = i as u32 + 1;
        for source in &entry.sources {
            remap.insert(source.clone(), joint_id);
        }
        entries.push(JointEntry {
            joint_id,
            name: entry.name,
            category: entry.category,
            sources: entry.sources,
        });
    }

    Ok(JointLabelSpace { entries, remap })
}

/// Rewrite a map's segment classes from a dataset's local ids to joint ids.
/// The raster is untouched; void pixels stay void.
pub fn remap_panoptic(
    map: &crate::raster::PanopticMap,
    dataset_id: &str,
    space: &JointLabelSpace,
) -> Result<crate::raster::PanopticMap, LabelSpaceError> {
    for segment in map.segments() {
        if space.remap(dataset_id, segment.class_id).is_none() {
            return Err(LabelSpaceError::UnknownClass {
                dataset: dataset_id.to_string(),
                segment_id: segment.id,
                class_id: segment.class_id,
            });
        }
    }
    Ok(map.with_classes(|s| space.remap(dataset_id, s.class_id).expect("checked above"))?)
}

fn synthesized_schema(dataset_id: &str, things: u32, stuff: u32) -> DatasetSchema {
    let mut classes = Vec::with_capacity((things + stuff) as usize);
    for i in 0..things {
        classes.push(ClassDef {
            local_id: i,
            name: format!("{dataset_id}_thing_{i:03}"),
            category: Category::Thing,
            eval_ignore: false,
        });
    }
    for i in 0..stuff {
        classes.push(ClassDef {
            local_id: things + i,
            name: format!("{dataset_id}_stuff_{i:03}"),
            category: Category::Stuff,
            eval_ignore: false,
        });
    }
    DatasetSchema {
        dataset_id: dataset_id.to_string(),
        classes,
    }
}

/// Built-in schemas for the six benchmark datasets. Only the per-dataset
/// stuff/thing class counts are published, so class names are synthesized
/// placeholders (`<dataset>_thing_NNN` / `<dataset>_stuff_NNN`); real merge
/// tables are supplied as configuration.
pub fn preset_schemas() -> Vec<DatasetSchema> {
    vec![
        synthesized_schema("coco", 80, 53),
        synthesized_schema("cityscapes", 8, 11),
        synthesized_schema("mapillary", 37, 28),
        synthesized_schema("viper", 10, 13),
        synthesized_schema("wilddash", 13, 12),
        synthesized_schema("kitti", 8, 11),
    ]
}

pub fn preset_schema(dataset_id: &str) -> Option<DatasetSchema> {
    preset_schemas()
        .into_iter()
        .find(|s| s.dataset_id == dataset_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{PanopticMap, SegmentMeta};

    fn tiny_schema(id: &str) -> DatasetSchema {
        DatasetSchema {
            dataset_id: id.to_string(),
            classes: vec![
                ClassDef {
                    local_id: 0,
                    name: format!("{id}_car"),
                    category: Category::Thing,
                    eval_ignore: false,
                },
                ClassDef {
                    local_id: 1,
                    name: format!("{id}_person"),
                    category: Category::Thing,
                    eval_ignore: false,
                },
                ClassDef {
                    local_id: 2,
                    name: format!("{id}_road"),
                    category: Category::Stuff,
                    eval_ignore: false,
                },
            ],
        }
    }

    #[test]
    fn disjoint_union_counts() {
        let schemas = vec![tiny_schema("a"), tiny_schema("b")];
        let space = build_joint_space(&schemas, &[]).unwrap();
        assert_eq!(space.num_classes(), 6);
        assert_eq!(space.category_counts(), (4, 2));
    }

    #[test]
    fn conflicting_categories_stay_distinct() {
        // Same name "pole", stuff in one dataset and thing in the other.
        let schemas = vec![
            DatasetSchema {
                dataset_id: "cityscapes".into(),
                classes: vec![ClassDef {
                    local_id: 0,
                    name: "pole".into(),
                    category: Category::Stuff,
                    eval_ignore: false,
                }],
            },
            DatasetSchema {
                dataset_id: "mapillary".into(),
                classes: vec![ClassDef {
                    local_id: 0,
                    name: "pole".into(),
                    category: Category::Thing,
                    eval_ignore: false,
                }],
            },
        ];
        let space = build_joint_space(&schemas, &[]).unwrap();
        assert_eq!(space.num_classes(), 2);
        let names: Vec<&str> = space.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, vec!["pole", "pole"]);
        let cats: Vec<Category> = space.entries().iter().map(|e| e.category).collect();
        assert_eq!(cats, vec![Category::Stuff, Category::Thing]);
    }

    #[test]
    fn cross_category_merge_rejected_with_rule_name() {
        let schemas = vec![tiny_schema("a")];
        let rules = vec![MergeRule {
            joint_name: "bad".into(),
            members: vec![("a".into(), 0), ("a".into(), 2)],
        }];
        match build_joint_space(&schemas, &rules).unwrap_err() {
            LabelSpaceError::CrossCategoryMerge { joint_name } => assert_eq!(joint_name, "bad"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_rule_member_rejected() {
        let schemas = vec![tiny_schema("a")];
        let rules = vec![MergeRule {
            joint_name: "ghost".into(),
            members: vec![("a".into(), 99)],
        }];
        assert!(matches!(
            build_joint_space(&schemas, &rules),
            Err(LabelSpaceError::UnknownRuleMember { .. })
        ));
    }

    #[test]
    fn duplicate_membership_rejected() {
        let schemas = vec![tiny_schema("a"), tiny_schema("b")];
        let rules = vec![
            MergeRule {
                joint_name: "car".into(),
                members: vec![("a".into(), 0), ("b".into(), 0)],
            },
            MergeRule {
                joint_name: "car2".into(),
                members: vec![("a".into(), 0)],
            },
        ];
        assert!(matches!(
            build_joint_space(&schemas, &rules),
            Err(LabelSpaceError::DuplicateRuleMember { .. })
        ));
    }

    #[test]
    fn merge_reduces_count_by_members_minus_one() {
        let schemas = vec![tiny_schema("a"), tiny_schema("b")];
        let rules = vec![MergeRule {
            joint_name: "car".into(),
            members: vec![("a".into(), 0), ("b".into(), 0)],
        }];
        let space = build_joint_space(&schemas, &rules).unwrap();
        assert_eq!(space.num_classes(), 5);
        assert_eq!(space.remap("a", 0).unwrap(), space.remap("b", 0).unwrap());
    }

    #[test]
    fn remap_is_total_over_inputs() {
        let schemas = preset_schemas();
        let space = build_joint_space(&schemas, &[]).unwrap();
        for schema in &schemas {
            for class in &schema.classes {
                let joint = space.remap(&schema.dataset_id, class.local_id);
                assert!(
                    joint.is_some(),
                    "({}, {}) unmapped",
                    schema.dataset_id,
                    class.local_id
                );
                let entry = space.entry(joint.unwrap()).unwrap();
                assert_eq!(entry.category, class.category);
            }
        }
        let total: usize = schemas.iter().map(|s| s.classes.len()).sum();
        assert_eq!(space.num_classes() as usize, total);
    }

    #[test]
    fn category_of_handles_void_and_range() {
        let space = build_joint_space(&[tiny_schema("a")], &[]).unwrap();
        assert_eq!(space.category_of(0).unwrap(), None);
        assert_eq!(space.category_of(1).unwrap(), Some(Category::Stuff));
        assert!(matches!(
            space.category_of(space.num_classes() + 1),
            Err(LabelSpaceError::JointIdOutOfRange { .. })
        ));
    }

    #[test]
    fn serialization_is_deterministic_and_roundtrips() {
        let schemas = vec![tiny_schema("a"), tiny_schema("b")];
        let rules = vec![MergeRule {
            joint_name: "road".into(),
            members: vec![("a".into(), 2), ("b".into(), 2)],
        }];
        let s1 = build_joint_space(&schemas, &rules).unwrap();
        let s2 = build_joint_space(&schemas, &rules).unwrap();
        assert_eq!(s1.to_json(), s2.to_json());
        let back = JointLabelSpace::from_json(&s1.to_json()).unwrap();
        assert_eq!(back, s1);
    }

    #[test]
    fn remap_panoptic_rewrites_classes_only() {
        let schemas = vec![tiny_schema("a")];
        let space = build_joint_space(&schemas, &[]).unwrap();
        let pixels = vec![0, 5, 5, 5];
        let map = PanopticMap::new(
            2,
            2,
            pixels.clone(),
            &[SegmentMeta {
                id: 5,
                class_id: 1,
                ignore: false,
            }],
        )
        .unwrap();
        let joint = space.remap("a", 1).unwrap();
        let out = remap_panoptic(&map, "a", &space).unwrap();
        assert_eq!(out.pixels(), pixels.as_slice());
        assert_eq!(out.segment(5).unwrap().class_id, joint);
    }

    #[test]
    fn identity_remap_leaves_map_unchanged() {
        // Local ids laid out so each class maps onto its own joint id.
        let schema = DatasetSchema {
            dataset_id: "only".into(),
            classes: vec![
                ClassDef {
                    local_id: 1,
                    name: "a_road".into(),
                    category: Category::Stuff,
                    eval_ignore: false,
                },
                ClassDef {
                    local_id: 2,
                    name: "b_car".into(),
                    category: Category::Thing,
                    eval_ignore: false,
                },
            ],
        };
        let space = build_joint_space(&[schema], &[]).unwrap();
        assert_eq!(space.remap("only", 1), Some(1));
        assert_eq!(space.remap("only", 2), Some(2));
        let map = PanopticMap::new(
            2,
            2,
            vec![0, 3, 3, 4],
            &[
                SegmentMeta {
                    id: 3,
                    class_id: 1,
                    ignore: false,
                },
                SegmentMeta {
                    id: 4,
                    class_id: 2,
                    ignore: false,
                },
            ],
        )
        .unwrap();
        assert_eq!(remap_panoptic(&map, "only", &space).unwrap(), map);
    }

    #[test]
    fn remap_panoptic_unknown_class_names_segment() {
        let schemas = vec![tiny_schema("a")];
        let space = build_joint_space(&schemas, &[]).unwrap();
        let map = PanopticMap::new(
            2,
            2,
            vec![0, 5, 5, 5],
            &[SegmentMeta {
                id: 5,
                class_id: 42,
                ignore: false,
            }],
        )
        .unwrap();
        match remap_panoptic(&map, "a", &space).unwrap_err() {
            LabelSpaceError::UnknownClass {
                segment_id,
                class_id,
                ..
            } => {
                assert_eq!(segment_id, 5);
                assert_eq!(class_id, 42);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn preset_counts_match_published_totals() {
        let schemas = preset_schemas();
        let things: u32 = schemas
            .iter()
            .flat_map(|s| &s.classes)
            .filter(|c| c.category == Category::Thing)
            .count() as u32;
        let stuff: u32 = schemas
            .iter()
            .flat_map(|s| &s.classes)
            .filter(|c| c.category == Category::Stuff)
            .count() as u32;
        assert_eq!(things, 156);
        assert_eq!(stuff, 128);
    }
}
