//! The layout record handed to downstream renderers: one `(asset, x, y, z, s)`
//! entry per object, in placement order.

use serde::{Deserialize, Serialize};

use super::LayoutScene;
use crate::error::{Error, Result};

pub const LAYOUT_VERSION: &str = "causalstruct-layout/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FSceneRecord {
    pub id: String,
    pub asset_ref: Option<String>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FScene {
    pub objects: Vec<FSceneRecord>,
    meta: Meta,
}

impl FScene {
    pub fn new(objects: Vec<FSceneRecord>) -> Self {
        FScene {
            objects,
            meta: Meta {
                version: LAYOUT_VERSION.to_string(),
            },
        }
    }

    pub fn record(&self, id: &str) -> Option<&FSceneRecord> {
        self.objects.iter().find(|r| r.id == id)
    }
}

pub fn assemble_fscene(scene: &LayoutScene) -> FScene {
    let objects = scene
        .order()
        .iter()
        .filter_map(|id| scene.objects().get(id))
        .map(|o| FSceneRecord {
            id: o.id.to_string(),
            asset_ref: o.asset_ref.clone(),
            x: o.center[0],
            y: o.center[1],
            z: o.center[2],
            s: o.scale,
        })
        .collect();
    FScene::new(objects)
}

pub fn encode_fscene(f: &FScene) -> String {
    let mut text = serde_json::to_string_pretty(f).expect("layout record serializes");
    text.push('\n');
    text
}

pub fn decode_fscene(text: &str) -> Result<FScene> {
    let f: FScene = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
    if f.meta.version != LAYOUT_VERSION {
        return Err(Error::Decode(format!("unsupported layout version `{}`", f.meta.version)));
    }
    let finite = f
        .objects
        .iter()
        .all(|r| [r.x, r.y, r.z, r.s].iter().all(|v| v.is_finite()) && r.s > 0.0);
    if !finite {
        return Err(Error::Decode("non-finite coordinate or non-positive scale".into()));
    }
    Ok(f)
}
