//! Episode initialization specs and the tech-tree consistency rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::types::{AgentStatus, EntityKind, Inventory, ItemKind, TileKind, ITEM_MAX, METER_MAX};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitSpec {
    pub status: AgentStatus,
    pub inventory: Inventory,
    /// Crafting table placed west of the spawn cell.
    #[serde(default)]
    pub table: bool,
    /// Furnace placed east of the spawn cell. Requires `table`.
    #[serde(default)]
    pub furnace: bool,
    /// Mature plant placed north of the spawn cell.
    #[serde(default)]
    pub plant: bool,
    /// Natural tile stamped inside the initial view.
    #[serde(default)]
    pub landmark: Option<TileKind>,
    /// Creature spawned a few steps from the agent.
    #[serde(default)]
    pub companion: Option<EntityKind>,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            status: AgentStatus::FULL,
            inventory: Inventory::new(),
            table: false,
            furnace: false,
            plant: false,
            landmark: None,
            companion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("missing prerequisite {missing} for {item}")]
    MissingPrerequisite { item: String, missing: String },
    #[error("meter {meter} out of range: {value}")]
    MeterOutOfRange { meter: &'static str, value: u8 },
    #[error("inventory count for {item} exceeds {ITEM_MAX}")]
    InventoryOverflow { item: &'static str },
    #[error("landmark {0} is not a natural tile")]
    BadLandmark(&'static str),
}

impl InitSpec {
    pub fn bare() -> Self {
        Self::default()
    }

    pub fn check(&self) -> Result<(), InitError> {
        let s = &self.status;
        for (meter, value) in
            [("health", s.health), ("food", s.food), ("drink", s.drink), ("energy", s.energy)]
        {
            if value > METER_MAX || (meter == "health" && value == 0) {
                return Err(InitError::MeterOutOfRange { meter, value });
            }
        }
        for (item, count) in self.inventory.iter() {
            if count > ITEM_MAX {
                return Err(InitError::InventoryOverflow { item: item.name() });
            }
            if let Some(tool) = item.prerequisite() {
                if !self.inventory.has(tool) {
                    return Err(InitError::MissingPrerequisite {
                        item: item.name().into(),
                        missing: tool.name().into(),
                    });
                }
            }
        }
        if self.furnace && !self.table {
            return Err(InitError::MissingPrerequisite {
                item: "furnace".into(),
                missing: "table".into(),
            });
        }
        if let Some(tile) = self.landmark {
            if matches!(
                tile,
                TileKind::Table | TileKind::Furnace | TileKind::Plant | TileKind::PlantedSapling
            ) {
                return Err(InitError::BadLandmark(tile.name()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressionTier {
    Bare,
    Wood,
    Stone,
    Iron,
}

impl ProgressionTier {
    pub const ALL: [ProgressionTier; 4] =
        [ProgressionTier::Bare, ProgressionTier::Wood, ProgressionTier::Stone, ProgressionTier::Iron];
}

/// Sampling weights for bare / wood / stone / iron starts.
pub const DEFAULT_TIER_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

pub fn sample_tier<R: Rng>(rng: &mut R, weights: &[f64; 4]) -> ProgressionTier {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (tier, w) in ProgressionTier::ALL.iter().zip(weights) {
        if u < *w {
            return *tier;
        }
        u -= w;
    }
    ProgressionTier::Iron
}

pub fn randomized_init(rng_seed: u64) -> InitSpec {
    randomized_init_with(rng_seed, &DEFAULT_TIER_WEIGHTS).1
}

/// Samples a progression tier, then meters in `[4, 9]` and items at or below that tier.
/// A ripe plant is occasionally pre-placed next to the spawn.
pub fn randomized_init_with(rng_seed: u64, weights: &[f64; 4]) -> (ProgressionTier, InitSpec) {
    let mut rng = seeds::rng(rng_seed, "init");
    let tier = sample_tier(&mut rng, weights);
    let meter = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(4..=9u8);
    let status = AgentStatus {
        health: meter(&mut rng),
        food: meter(&mut rng),
        drink: meter(&mut rng),
        energy: meter(&mut rng),
    };
    let mut inv = Inventory::new();
    let mut table = false;
    let mut furnace = false;

    if tier >= ProgressionTier::Wood {
        inv.set(ItemKind::Wood, rng.gen_range(0..=4));
        inv.set(ItemKind::Sapling, rng.gen_range(0..=1));
        if tier == ProgressionTier::Wood {
            if rng.gen_bool(0.5) {
                inv.set(ItemKind::WoodPickaxe, 1);
            }
        } else {
            inv.set(ItemKind::WoodPickaxe, 1);
        }
        if rng.gen_bool(0.3) {
            inv.set(ItemKind::WoodSword, 1);
        }
        table = rng.gen_bool(0.3);
    }
    if tier >= ProgressionTier::Stone {
        inv.set(ItemKind::Stone, rng.gen_range(0..=4));
        inv.set(ItemKind::Coal, rng.gen_range(0..=2));
        if tier == ProgressionTier::Stone {
            if rng.gen_bool(0.4) {
                inv.set(ItemKind::StonePickaxe, 1);
            }
        } else {
            inv.set(ItemKind::StonePickaxe, 1);
        }
        if rng.gen_bool(0.3) {
            inv.set(ItemKind::StoneSword, 1);
        }
    }
    if tier >= ProgressionTier::Iron {
        inv.set(ItemKind::Iron, rng.gen_range(0..=2));
        if rng.gen_bool(0.25) {
            inv.set(ItemKind::IronPickaxe, 1);
        }
        if rng.gen_bool(0.2) {
            inv.set(ItemKind::IronSword, 1);
        }
        table = table || rng.gen_bool(0.3);
        furnace = table && rng.gen_bool(0.5);
    }

    let plant = rng.gen_bool(0.15);
    let spec = InitSpec { status, inventory: inv, table, furnace, plant, ..InitSpec::default() };
    debug_assert!(spec.check().is_ok());
    (tier, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stone_pickaxe_without_wood_pickaxe_is_rejected() {
        let spec = InitSpec {
            inventory: Inventory::new().with(ItemKind::StonePickaxe, 1),
            ..InitSpec::default()
        };
        let err = spec.check().unwrap_err();
        assert!(err.to_string().contains("missing prerequisite wood_pickaxe"), "{err}");
    }

    #[test]
    fn furnace_needs_table() {
        let spec = InitSpec { furnace: true, ..InitSpec::default() };
        assert!(spec.check().is_err());
    }

    #[test]
    fn randomized_specs_are_consistent() {
        for seed in 0..10_000 {
            let (tier, spec) = randomized_init_with(seed, &DEFAULT_TIER_WEIGHTS);
            spec.check().unwrap();
            for m in spec.status.meters() {
                assert!((4..=9).contains(&m));
            }
            if tier == ProgressionTier::Bare {
                assert!(spec.inventory.is_empty());
            }
        }
    }

    #[test]
    fn randomized_init_is_deterministic() {
        assert_eq!(randomized_init(5), randomized_init(5));
    }
}
