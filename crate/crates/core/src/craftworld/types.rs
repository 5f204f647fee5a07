use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const METER_MAX: u8 = 9;
pub const ITEM_MAX: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Grass,
    Sand,
    Path,
    Water,
    Tree,
    Stone,
    Coal,
    Iron,
    Diamond,
    Lava,
    Table,
    Furnace,
    Plant,
    PlantedSapling,
}

impl TileKind {
    pub const ALL: [TileKind; 14] = [
        TileKind::Grass,
        TileKind::Sand,
        TileKind::Path,
        TileKind::Water,
        TileKind::Tree,
        TileKind::Stone,
        TileKind::Coal,
        TileKind::Iron,
        TileKind::Diamond,
        TileKind::Lava,
        TileKind::Table,
        TileKind::Furnace,
        TileKind::Plant,
        TileKind::PlantedSapling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TileKind::Grass => "grass",
            TileKind::Sand => "sand",
            TileKind::Path => "path",
            TileKind::Water => "water",
            TileKind::Tree => "tree",
            TileKind::Stone => "stone",
            TileKind::Coal => "coal",
            TileKind::Iron => "iron",
            TileKind::Diamond => "diamond",
            TileKind::Lava => "lava",
            TileKind::Table => "table",
            TileKind::Furnace => "furnace",
            TileKind::Plant => "plant",
            TileKind::PlantedSapling => "planted_sapling",
        }
    }

    pub fn from_name(name: &str) -> Option<TileKind> {
        TileKind::ALL.iter().copied().find(|t| t.name() == name)
    }

    /// Tiles the agent and mobs can stand on. Lava is walkable but lethal.
    pub fn walkable(self) -> bool {
        matches!(self, TileKind::Grass | TileKind::Sand | TileKind::Path | TileKind::Lava)
    }

    /// Tiles that accept `place_*` actions.
    pub fn placeable(self) -> bool {
        matches!(self, TileKind::Grass | TileKind::Sand | TileKind::Path)
    }

    /// Pickaxe tier needed to mine this tile, if it is a minable block.
    pub fn required_pickaxe(self) -> Option<ItemKind> {
        match self {
            TileKind::Stone | TileKind::Coal => Some(ItemKind::WoodPickaxe),
            TileKind::Iron => Some(ItemKind::StonePickaxe),
            TileKind::Diamond => Some(ItemKind::IronPickaxe),
            _ => None,
        }
    }

    pub fn mined_item(self) -> Option<ItemKind> {
        match self {
            TileKind::Stone => Some(ItemKind::Stone),
            TileKind::Coal => Some(ItemKind::Coal),
            TileKind::Iron => Some(ItemKind::Iron),
            TileKind::Diamond => Some(ItemKind::Diamond),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Zombie,
    Skeleton,
    Cow,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [EntityKind::Zombie, EntityKind::Skeleton, EntityKind::Cow];

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Zombie => "zombie",
            EntityKind::Skeleton => "skeleton",
            EntityKind::Cow => "cow",
        }
    }

    pub fn from_name(name: &str) -> Option<EntityKind> {
        EntityKind::ALL.iter().copied().find(|e| e.name() == name)
    }

    pub fn hostile(self) -> bool {
        !matches!(self, EntityKind::Cow)
    }

    pub fn max_health(self) -> i32 {
        3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Wood,
    Stone,
    Coal,
    Iron,
    Diamond,
    Sapling,
    WoodPickaxe,
    StonePickaxe,
    IronPickaxe,
    WoodSword,
    StoneSword,
    IronSword,
}

impl ItemKind {
    pub const ALL: [ItemKind; 12] = [
        ItemKind::Wood,
        ItemKind::Stone,
        ItemKind::Coal,
        ItemKind::Iron,
        ItemKind::Diamond,
        ItemKind::Sapling,
        ItemKind::WoodPickaxe,
        ItemKind::StonePickaxe,
        ItemKind::IronPickaxe,
        ItemKind::WoodSword,
        ItemKind::StoneSword,
        ItemKind::IronSword,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ItemKind::Wood => "wood",
            ItemKind::Stone => "stone",
            ItemKind::Coal => "coal",
            ItemKind::Iron => "iron",
            ItemKind::Diamond => "diamond",
            ItemKind::Sapling => "sapling",
            ItemKind::WoodPickaxe => "wood_pickaxe",
            ItemKind::StonePickaxe => "stone_pickaxe",
            ItemKind::IronPickaxe => "iron_pickaxe",
            ItemKind::WoodSword => "wood_sword",
            ItemKind::StoneSword => "stone_sword",
            ItemKind::IronSword => "iron_sword",
        }
    }

    pub fn from_name(name: &str) -> Option<ItemKind> {
        ItemKind::ALL.iter().copied().find(|i| i.name() == name)
    }

    /// Tool that must already be held for this item to be obtainable.
    pub fn prerequisite(self) -> Option<ItemKind> {
        match self {
            ItemKind::Stone | ItemKind::Coal | ItemKind::StonePickaxe | ItemKind::StoneSword => {
                Some(ItemKind::WoodPickaxe)
            }
            ItemKind::Iron | ItemKind::IronPickaxe | ItemKind::IronSword => {
                Some(ItemKind::StonePickaxe)
            }
            ItemKind::Diamond => Some(ItemKind::IronPickaxe),
            _ => None,
        }
    }
}

/// Item counts in `[0, 9]`. Zero entries are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Inventory(BTreeMap<ItemKind, u8>);

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, item: ItemKind) -> u8 {
        self.0.get(&item).copied().unwrap_or(0)
    }

    pub fn has(&self, item: ItemKind) -> bool {
        self.count(item) > 0
    }

    pub fn set(&mut self, item: ItemKind, count: u8) {
        let count = count.min(ITEM_MAX);
        if count == 0 {
            self.0.remove(&item);
        } else {
            self.0.insert(item, count);
        }
    }

    /// Adds one unit; returns false when already at the cap.
    pub fn add_one(&mut self, item: ItemKind) -> bool {
        let c = self.count(item);
        if c >= ITEM_MAX {
            return false;
        }
        self.set(item, c + 1);
        true
    }

    pub fn take(&mut self, item: ItemKind, n: u8) -> bool {
        let c = self.count(item);
        if c < n {
            return false;
        }
        self.set(item, c - n);
        true
    }

    pub fn with(mut self, item: ItemKind, count: u8) -> Self {
        self.set(item, count);
        self
    }

    /// Non-zero entries in canonical item order.
    pub fn iter(&self) -> impl Iterator<Item = (ItemKind, u8)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn raw(&self) -> &BTreeMap<ItemKind, u8> {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentStatus {
    pub health: u8,
    pub food: u8,
    pub drink: u8,
    pub energy: u8,
}

impl AgentStatus {
    pub const FULL: AgentStatus = AgentStatus { health: 9, food: 9, drink: 9, energy: 9 };

    pub fn meters(&self) -> [u8; 4] {
        [self.health, self.food, self.drink, self.energy]
    }

    pub fn in_bounds(&self) -> bool {
        self.meters().iter().all(|m| *m <= METER_MAX)
    }
}

impl Default for AgentStatus {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    /// Grid delta with `y` growing southwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
        }
    }

    pub fn move_action(self) -> Action {
        match self {
            Direction::North => Action::MoveUp,
            Direction::East => Action::MoveRight,
            Direction::South => Action::MoveDown,
            Direction::West => Action::MoveLeft,
        }
    }

    pub fn clockwise(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveLeft,
    MoveRight,
    MoveUp,
    MoveDown,
    Do,
    Sleep,
    PlaceStone,
    PlaceTable,
    PlaceFurnace,
    PlacePlant,
    MakeWoodPickaxe,
    MakeWoodSword,
    MakeStonePickaxe,
    MakeStoneSword,
    MakeIronPickaxe,
    MakeIronSword,
    Noop,
}

impl Action {
    pub const COUNT: usize = 17;

    pub const ALL: [Action; 17] = [
        Action::MoveLeft,
        Action::MoveRight,
        Action::MoveUp,
        Action::MoveDown,
        Action::Do,
        Action::Sleep,
        Action::PlaceStone,
        Action::PlaceTable,
        Action::PlaceFurnace,
        Action::PlacePlant,
        Action::MakeWoodPickaxe,
        Action::MakeWoodSword,
        Action::MakeStonePickaxe,
        Action::MakeStoneSword,
        Action::MakeIronPickaxe,
        Action::MakeIronSword,
        Action::Noop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::MoveLeft => "move_left",
            Action::MoveRight => "move_right",
            Action::MoveUp => "move_up",
            Action::MoveDown => "move_down",
            Action::Do => "do",
            Action::Sleep => "sleep",
            Action::PlaceStone => "place_stone",
            Action::PlaceTable => "place_table",
            Action::PlaceFurnace => "place_furnace",
            Action::PlacePlant => "place_plant",
            Action::MakeWoodPickaxe => "make_wood_pickaxe",
            Action::MakeWoodSword => "make_wood_sword",
            Action::MakeStonePickaxe => "make_stone_pickaxe",
            Action::MakeStoneSword => "make_stone_sword",
            Action::MakeIronPickaxe => "make_iron_pickaxe",
            Action::MakeIronSword => "make_iron_sword",
            Action::Noop => "noop",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.name() == name)
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::MoveLeft => Some(Direction::West),
            Action::MoveRight => Some(Direction::East),
            Action::MoveUp => Some(Direction::North),
            Action::MoveDown => Some(Direction::South),
            _ => None,
        }
    }

    pub fn is_move(self) -> bool {
        self.direction().is_some()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Harvest,
    Status,
    Wood,
    Stone,
    Iron,
    Hunt,
}

impl TaskType {
    pub fn name(self) -> &'static str {
        match self {
            TaskType::Harvest => "Harvest",
            TaskType::Status => "Status",
            TaskType::Wood => "Wood",
            TaskType::Stone => "Stone",
            TaskType::Iron => "Iron",
            TaskType::Hunt => "Hunt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AchievementId {
    CollectSapling,
    PlacePlant,
    EatPlant,
    WakeUp,
    EatCow,
    CollectDrink,
    CollectWood,
    PlaceTable,
    MakeWoodPickaxe,
    MakeWoodSword,
    CollectStone,
    MakeStonePickaxe,
    MakeStoneSword,
    PlaceStone,
    CollectCoal,
    PlaceFurnace,
    CollectIron,
    MakeIronPickaxe,
    MakeIronSword,
    CollectDiamond,
    DefeatSkeleton,
    DefeatZombie,
}

impl AchievementId {
    pub const COUNT: usize = 22;

    pub const ALL: [AchievementId; 22] = [
        AchievementId::CollectSapling,
        AchievementId::PlacePlant,
        AchievementId::EatPlant,
        AchievementId::WakeUp,
        AchievementId::EatCow,
        AchievementId::CollectDrink,
        AchievementId::CollectWood,
        AchievementId::PlaceTable,
        AchievementId::MakeWoodPickaxe,
        AchievementId::MakeWoodSword,
        AchievementId::CollectStone,
        AchievementId::MakeStonePickaxe,
        AchievementId::MakeStoneSword,
        AchievementId::PlaceStone,
        AchievementId::CollectCoal,
        AchievementId::PlaceFurnace,
        AchievementId::CollectIron,
        AchievementId::MakeIronPickaxe,
        AchievementId::MakeIronSword,
        AchievementId::CollectDiamond,
        AchievementId::DefeatSkeleton,
        AchievementId::DefeatZombie,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AchievementId::CollectSapling => "collect_sapling",
            AchievementId::PlacePlant => "place_plant",
            AchievementId::EatPlant => "eat_plant",
            AchievementId::WakeUp => "wake_up",
            AchievementId::EatCow => "eat_cow",
            AchievementId::CollectDrink => "collect_drink",
            AchievementId::CollectWood => "collect_wood",
            AchievementId::PlaceTable => "place_table",
            AchievementId::MakeWoodPickaxe => "make_wood_pickaxe",
            AchievementId::MakeWoodSword => "make_wood_sword",
            AchievementId::CollectStone => "collect_stone",
            AchievementId::MakeStonePickaxe => "make_stone_pickaxe",
            AchievementId::MakeStoneSword => "make_stone_sword",
            AchievementId::PlaceStone => "place_stone",
            AchievementId::CollectCoal => "collect_coal",
            AchievementId::PlaceFurnace => "place_furnace",
            AchievementId::CollectIron => "collect_iron",
            AchievementId::MakeIronPickaxe => "make_iron_pickaxe",
            AchievementId::MakeIronSword => "make_iron_sword",
            AchievementId::CollectDiamond => "collect_diamond",
            AchievementId::DefeatSkeleton => "defeat_skeleton",
            AchievementId::DefeatZombie => "defeat_zombie",
        }
    }

    pub fn from_name(name: &str) -> Option<AchievementId> {
        AchievementId::ALL.iter().copied().find(|a| a.name() == name)
    }

    pub fn task_type(self) -> TaskType {
        use AchievementId::*;
        match self {
            CollectSapling | PlacePlant | EatPlant => TaskType::Harvest,
            WakeUp | EatCow | CollectDrink => TaskType::Status,
            CollectWood | PlaceTable | MakeWoodPickaxe | MakeWoodSword => TaskType::Wood,
            CollectStone | MakeStonePickaxe | MakeStoneSword | PlaceStone => TaskType::Stone,
            CollectCoal | PlaceFurnace | CollectIron | MakeIronPickaxe | MakeIronSword
            | CollectDiamond => TaskType::Iron,
            DefeatSkeleton | DefeatZombie => TaskType::Hunt,
        }
    }

    /// Tool tier the skill belongs to: 0 bare-handed, 1 wood, 2 stone, 3 iron.
    pub fn tier(self) -> u8 {
        use AchievementId::*;
        match self {
            CollectSapling | PlacePlant | EatPlant | WakeUp | EatCow | CollectDrink | DefeatZombie
            | DefeatSkeleton => 0,
            CollectWood | PlaceTable | MakeWoodPickaxe | MakeWoodSword => 1,
            CollectStone | CollectCoal | PlaceStone | MakeStonePickaxe | MakeStoneSword => 2,
            PlaceFurnace | CollectIron | MakeIronPickaxe | MakeIronSword | CollectDiamond => 3,
        }
    }

    /// Skills that must have been achieved before this one is reachable.
    pub fn prerequisites(self) -> &'static [AchievementId] {
        use AchievementId::*;
        match self {
            CollectSapling | WakeUp | EatCow | CollectDrink | CollectWood | DefeatSkeleton
            | DefeatZombie => &[],
            PlacePlant => &[CollectSapling],
            EatPlant => &[PlacePlant],
            PlaceTable => &[CollectWood],
            MakeWoodPickaxe | MakeWoodSword => &[PlaceTable],
            CollectStone | CollectCoal => &[MakeWoodPickaxe],
            MakeStonePickaxe | MakeStoneSword | PlaceStone => &[CollectStone],
            PlaceFurnace => &[CollectStone],
            CollectIron => &[MakeStonePickaxe],
            MakeIronPickaxe | MakeIronSword => &[CollectIron, CollectCoal, PlaceFurnace],
            CollectDiamond => &[MakeIronPickaxe],
        }
    }

    pub fn for_action(action: Action) -> Option<AchievementId> {
        match action {
            Action::PlaceStone => Some(AchievementId::PlaceStone),
            Action::PlaceTable => Some(AchievementId::PlaceTable),
            Action::PlaceFurnace => Some(AchievementId::PlaceFurnace),
            Action::PlacePlant => Some(AchievementId::PlacePlant),
            Action::MakeWoodPickaxe => Some(AchievementId::MakeWoodPickaxe),
            Action::MakeWoodSword => Some(AchievementId::MakeWoodSword),
            Action::MakeStonePickaxe => Some(AchievementId::MakeStonePickaxe),
            Action::MakeStoneSword => Some(AchievementId::MakeStoneSword),
            Action::MakeIronPickaxe => Some(AchievementId::MakeIronPickaxe),
            Action::MakeIronSword => Some(AchievementId::MakeIronSword),
            _ => None,
        }
    }
}

impl fmt::Display for AchievementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_names_round_trip_in_canonical_order() {
        assert_eq!(Action::ALL.len(), 17);
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_name(a.name()), Some(*a));
            let json = serde_json::to_string(a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
    }

    #[test]
    fn achievements_map_to_six_task_types() {
        let mut counts = BTreeMap::new();
        for a in AchievementId::ALL {
            *counts.entry(a.task_type()).or_insert(0) += 1;
            assert_eq!(AchievementId::from_name(a.name()), Some(a));
        }
        assert_eq!(counts[&TaskType::Harvest], 3);
        assert_eq!(counts[&TaskType::Status], 3);
        assert_eq!(counts[&TaskType::Wood], 4);
        assert_eq!(counts[&TaskType::Stone], 4);
        assert_eq!(counts[&TaskType::Iron], 6);
        assert_eq!(counts[&TaskType::Hunt], 2);
    }

    #[test]
    fn prerequisite_edges_never_lower_tier() {
        for a in AchievementId::ALL {
            for p in a.prerequisites() {
                assert!(p.tier() <= a.tier(), "{p} -> {a}");
            }
        }
    }

    #[test]
    fn inventory_caps_and_drops_zeroes() {
        let mut inv = Inventory::new();
        for _ in 0..12 {
            inv.add_one(ItemKind::Wood);
        }
        assert_eq!(inv.count(ItemKind::Wood), 9);
        assert!(!inv.add_one(ItemKind::Wood));
        assert!(inv.take(ItemKind::Wood, 9));
        assert!(inv.is_empty());
    }
}
