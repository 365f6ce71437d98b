//! JSON file formats. All coordinates are 0-based.
//!
//! * shape: `{ "dims": [H, W, D], "cells": [[x, y, z], ...] }`
//! * inventory: `{ "counts": { "1x1": n, ..., "2x6": n } }`, missing types count 0
//! * sequence: `[{ "step": t, "brick": "1x4", "x": _, "y": _, "z": _, "orient": 0 | 1 }, ...]`

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, BrickCatalog, Cell, Dims, Orientation, VoxelGrid};
use crate::state::Inventory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeFile {
    pub dims: [usize; 3],
    pub cells: Vec<[usize; 3]>,
}

impl ShapeFile {
    pub fn from_grid(grid: &VoxelGrid) -> Self {
        let d = grid.dims();
        ShapeFile { dims: [d.h, d.w, d.d], cells: grid.cells().map(|c| [c.x, c.y, c.z]).collect() }
    }

    pub fn to_grid(&self) -> Result<VoxelGrid> {
        let [h, w, d] = self.dims;
        let dims = Dims::new(h, w, d)?;
        let mut grid = VoxelGrid::empty(dims);
        for &[x, y, z] in &self.cells {
            let c = Cell::new(x, y, z);
            if grid.get(c)? {
                return Err(Error::Malformed(format!("duplicate cell [{x}, {y}, {z}]")));
            }
            grid.set(c, true)?;
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryFile {
    pub counts: BTreeMap<String, u32>,
}

impl InventoryFile {
    pub fn from_inventory(inv: &Inventory, catalog: &BrickCatalog) -> Self {
        let counts = catalog.types().iter().map(|t| (t.name.clone(), inv.get(t.id))).collect();
        InventoryFile { counts }
    }

    pub fn to_inventory(&self, catalog: &BrickCatalog) -> Result<Inventory> {
        let mut counts = vec![0; catalog.len()];
        for (name, &n) in &self.counts {
            counts[catalog.by_name(name)?.id] = n;
        }
        Ok(Inventory::new(counts))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub step: usize,
    pub brick: String,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub orient: u8,
}

pub fn sequence_to_entries(actions: &[Action], catalog: &BrickCatalog) -> Result<Vec<SequenceEntry>> {
    actions
        .iter()
        .enumerate()
        .map(|(step, a)| {
            Ok(SequenceEntry {
                step,
                brick: catalog.get(a.brick)?.name.clone(),
                x: a.x,
                y: a.y,
                z: a.z,
                orient: a.orient.as_u8(),
            })
        })
        .collect()
}

pub fn entries_to_sequence(entries: &[SequenceEntry], catalog: &BrickCatalog) -> Result<Vec<Action>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.step != i {
                return Err(Error::Malformed(format!("entry {i} has step {}, expected {i}", e.step)));
            }
            let orient = Orientation::from_u8(e.orient).map_err(|e| Error::Malformed(format!("step {i}: {e}")))?;
            Ok(Action::new(catalog.by_name(&e.brick)?.id, e.x, e.y, e.z, orient))
        })
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_shape(path: &Path) -> Result<VoxelGrid> {
    read_json::<ShapeFile>(path)?.to_grid()
}

pub fn write_shape(path: &Path, grid: &VoxelGrid) -> Result<()> {
    write_json(path, &ShapeFile::from_grid(grid))
}

pub fn read_inventory(path: &Path, catalog: &BrickCatalog) -> Result<Inventory> {
    read_json::<InventoryFile>(path)?.to_inventory(catalog)
}

pub fn write_inventory(path: &Path, inv: &Inventory, catalog: &BrickCatalog) -> Result<()> {
    write_json(path, &InventoryFile::from_inventory(inv, catalog))
}

pub fn read_sequence(path: &Path, catalog: &BrickCatalog) -> Result<Vec<Action>> {
    entries_to_sequence(&read_json::<Vec<SequenceEntry>>(path)?, catalog)
}

pub fn write_sequence(path: &Path, actions: &[Action], catalog: &BrickCatalog) -> Result<()> {
    write_json(path, &sequence_to_entries(actions, catalog)?)
}
