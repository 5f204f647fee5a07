//! Which skill, if any, an action demonstrably exercised.
//!
//! Attribution only looks at what the agent can observe: status meters, inventory,
//! the unlocked set and the thing it is facing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::observe::{Observation, Seen};
use super::types::{AchievementId, Action, AgentStatus, EntityKind, Inventory, ItemKind, TileKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub status: AgentStatus,
    pub inventory: Inventory,
    pub unlocked: BTreeSet<AchievementId>,
    pub facing: Option<Seen>,
}

impl Snapshot {
    pub fn of(obs: &Observation) -> Self {
        Self {
            status: obs.status,
            inventory: obs.inventory.clone(),
            unlocked: obs.unlocked.clone(),
            facing: obs.facing.kind,
        }
    }

    pub fn facing_entity(&self) -> Option<EntityKind> {
        match self.facing {
            Some(Seen::Entity(e)) => Some(e),
            _ => None,
        }
    }
}

fn gained(before: &Snapshot, after: &Snapshot, item: ItemKind) -> bool {
    after.inventory.count(item) > before.inventory.count(item)
}

fn spent(before: &Snapshot, after: &Snapshot, item: ItemKind) -> bool {
    after.inventory.count(item) < before.inventory.count(item)
}

fn newly(before: &Snapshot, after: &Snapshot, a: AchievementId) -> bool {
    after.unlocked.contains(&a) && !before.unlocked.contains(&a)
}

/// The skill exercised by `action` taken in `before`, judged from `after`.
pub fn attribute(before: &Snapshot, after: &Snapshot, action: Action) -> Option<AchievementId> {
    use AchievementId as A;
    match action {
        Action::Do => match before.facing? {
            Seen::Tile(TileKind::Tree) if gained(before, after, ItemKind::Wood) => Some(A::CollectWood),
            Seen::Tile(TileKind::Grass) if gained(before, after, ItemKind::Sapling) => {
                Some(A::CollectSapling)
            }
            Seen::Tile(TileKind::Stone) if gained(before, after, ItemKind::Stone) => Some(A::CollectStone),
            Seen::Tile(TileKind::Coal) if gained(before, after, ItemKind::Coal) => Some(A::CollectCoal),
            Seen::Tile(TileKind::Iron) if gained(before, after, ItemKind::Iron) => Some(A::CollectIron),
            Seen::Tile(TileKind::Diamond) if gained(before, after, ItemKind::Diamond) => {
                Some(A::CollectDiamond)
            }
            Seen::Tile(TileKind::Water)
                if after.status.drink > before.status.drink || newly(before, after, A::CollectDrink) =>
            {
                Some(A::CollectDrink)
            }
            Seen::Tile(TileKind::Plant)
                if after.status.food > before.status.food || newly(before, after, A::EatPlant) =>
            {
                Some(A::EatPlant)
            }
            Seen::Entity(kind) if after.facing != Some(Seen::Entity(kind)) => Some(match kind {
                EntityKind::Cow => A::EatCow,
                EntityKind::Zombie => A::DefeatZombie,
                EntityKind::Skeleton => A::DefeatSkeleton,
            }),
            _ => None,
        },
        Action::Sleep if after.status.energy == super::METER_MAX && after.status.energy > before.status.energy => {
            Some(A::WakeUp)
        }
        Action::PlaceStone if spent(before, after, ItemKind::Stone) => Some(A::PlaceStone),
        Action::PlaceTable if spent(before, after, ItemKind::Wood) => Some(A::PlaceTable),
        Action::PlaceFurnace if spent(before, after, ItemKind::Stone) => Some(A::PlaceFurnace),
        Action::PlacePlant if spent(before, after, ItemKind::Sapling) => Some(A::PlacePlant),
        Action::MakeWoodPickaxe if gained(before, after, ItemKind::WoodPickaxe) => Some(A::MakeWoodPickaxe),
        Action::MakeWoodSword if gained(before, after, ItemKind::WoodSword) => Some(A::MakeWoodSword),
        Action::MakeStonePickaxe if gained(before, after, ItemKind::StonePickaxe) => {
            Some(A::MakeStonePickaxe)
        }
        Action::MakeStoneSword if gained(before, after, ItemKind::StoneSword) => Some(A::MakeStoneSword),
        Action::MakeIronPickaxe if gained(before, after, ItemKind::IronPickaxe) => Some(A::MakeIronPickaxe),
        Action::MakeIronSword if gained(before, after, ItemKind::IronSword) => Some(A::MakeIronSword),
        _ => None,
    }
}

/// Items that must be in the inventory right before the final action of `skill`.
pub fn required_items(skill: AchievementId) -> &'static [ItemKind] {
    use AchievementId as A;
    use ItemKind as I;
    match skill {
        A::CollectStone | A::CollectCoal => &[I::WoodPickaxe],
        A::CollectIron => &[I::StonePickaxe],
        A::CollectDiamond => &[I::IronPickaxe],
        A::PlacePlant => &[I::Sapling],
        A::PlaceTable => &[I::Wood],
        A::PlaceStone | A::PlaceFurnace => &[I::Stone],
        A::MakeWoodPickaxe | A::MakeWoodSword => &[I::Wood],
        A::MakeStonePickaxe | A::MakeStoneSword => &[I::Wood, I::Stone],
        A::MakeIronPickaxe | A::MakeIronSword => &[I::Wood, I::Coal, I::Iron],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(inv: Inventory, facing: Seen) -> Snapshot {
        Snapshot { status: AgentStatus::FULL, inventory: inv, unlocked: BTreeSet::new(), facing: Some(facing) }
    }

    #[test]
    fn wood_gain_facing_tree_is_collect_wood() {
        let b = snap(Inventory::new(), Seen::Tile(TileKind::Tree));
        let a = snap(Inventory::new().with(ItemKind::Wood, 1), Seen::Tile(TileKind::Tree));
        assert_eq!(attribute(&b, &a, Action::Do), Some(AchievementId::CollectWood));
        assert_eq!(attribute(&b, &a, Action::Noop), None);
    }

    #[test]
    fn cow_disappearing_after_do_is_eat_cow() {
        let b = snap(Inventory::new(), Seen::Entity(EntityKind::Cow));
        let a = snap(Inventory::new(), Seen::Tile(TileKind::Grass));
        assert_eq!(attribute(&b, &a, Action::Do), Some(AchievementId::EatCow));
    }

    #[test]
    fn partial_sleep_is_not_wake_up() {
        let mut b = snap(Inventory::new(), Seen::Tile(TileKind::Grass));
        b.status.energy = 5;
        let mut a = b.clone();
        a.status.energy = 6;
        assert_eq!(attribute(&b, &a, Action::Sleep), None);
        b.status.energy = 8;
        a.status.energy = 9;
        assert_eq!(attribute(&b, &a, Action::Sleep), Some(AchievementId::WakeUp));
    }
}
