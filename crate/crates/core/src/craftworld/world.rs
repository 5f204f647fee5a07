//! World state, construction and the step function.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::{InitError, InitSpec};
use super::types::{
    AchievementId, Action, AgentStatus, Direction, EntityKind, Inventory, ItemKind, TileKind,
    METER_MAX,
};
use super::worldgen::{self, HEIGHT, WIDTH};
use crate::seeds;

pub const STATE_SCHEMA: &str = "craftworld.state.v1";

pub const FOOD_DECAY_EVERY: u32 = 25;
pub const DRINK_DECAY_EVERY: u32 = 25;
pub const ENERGY_DECAY_EVERY: u32 = 30;
pub const STARVE_EVERY: u32 = 10;
pub const REGEN_EVERY: u32 = 25;
pub const SAPLING_MATURE_STEPS: u32 = 60;
pub const MOB_ATTACK_COOLDOWN: u8 = 5;
/// Chance, in percent, that `do` on grass yields a sapling.
pub const SAPLING_CHANCE_PCT: u32 = 10;
pub const COW_FOOD: u8 = 6;
pub const PLANT_FOOD: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Pos {
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn step(self, dir: Direction) -> Pos {
        let (dx, dy) = dir.delta();
        self.offset(dx, dy)
    }

    pub fn chebyshev(self, other: Pos) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub pos: Pos,
    pub health: i32,
    /// Steps until the mob may attack again.
    pub cooldown: u8,
}

impl Entity {
    pub fn new(kind: EntityKind, pos: Pos) -> Self {
        Self { kind, pos, health: kind.max_health(), cooldown: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sapling {
    pub pos: Pos,
    pub age: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub pos: Pos,
    pub facing: Direction,
    pub status: AgentStatus,
    pub inventory: Inventory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub meter_decay: bool,
    pub mobs: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { meter_decay: true, mobs: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub schema: String,
    pub seed: u64,
    pub width: i32,
    pub height: i32,
    #[serde(with = "terrain_rows")]
    pub terrain: Vec<TileKind>,
    pub entities: Vec<Entity>,
    pub saplings: Vec<Sapling>,
    pub agent: Agent,
    pub unlocked: BTreeSet<AchievementId>,
    pub t: u32,
    pub config: WorldConfig,
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub unlocked: Vec<AchievementId>,
    /// Change of health, food, drink and energy over the step.
    pub status_delta: [i8; 4],
    pub ineffective: bool,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("episode already terminated at t={0}")]
    Terminal(u32),
}

pub fn tile_char(tile: TileKind) -> char {
    match tile {
        TileKind::Grass => '.',
        TileKind::Sand => ':',
        TileKind::Path => '_',
        TileKind::Water => '~',
        TileKind::Tree => 'T',
        TileKind::Stone => '#',
        TileKind::Coal => 'c',
        TileKind::Iron => 'i',
        TileKind::Diamond => 'd',
        TileKind::Lava => 'L',
        TileKind::Table => 't',
        TileKind::Furnace => 'f',
        TileKind::Plant => 'P',
        TileKind::PlantedSapling => 'p',
    }
}

pub fn tile_from_char(c: char) -> Option<TileKind> {
    TileKind::ALL.iter().copied().find(|t| tile_char(*t) == c)
}

mod terrain_rows {
    use super::{tile_char, tile_from_char, TileKind, WIDTH};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(terrain: &[TileKind], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<String> = terrain
            .chunks(WIDTH as usize)
            .map(|row| row.iter().map(|t| tile_char(*t)).collect())
            .collect();
        s.collect_seq(rows)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<TileKind>, D::Error> {
        let rows = Vec::<String>::deserialize(d)?;
        let mut out = Vec::with_capacity(rows.len() * WIDTH as usize);
        for row in rows {
            for c in row.chars() {
                out.push(tile_from_char(c).ok_or_else(|| D::Error::custom(format!("bad tile {c:?}")))?);
            }
        }
        Ok(out)
    }
}

pub fn new_world(seed: u64, spec: &InitSpec) -> Result<WorldState, InitError> {
    new_world_with(seed, spec, WorldConfig::default())
}

pub fn new_world_with(seed: u64, spec: &InitSpec, config: WorldConfig) -> Result<WorldState, InitError> {
    spec.check()?;
    let g = worldgen::generate(seed);
    let mut state = WorldState {
        schema: STATE_SCHEMA.to_string(),
        seed,
        width: WIDTH,
        height: HEIGHT,
        terrain: g.terrain,
        entities: if config.mobs { g.entities } else { Vec::new() },
        saplings: Vec::new(),
        agent: Agent {
            pos: g.spawn,
            facing: Direction::South,
            status: spec.status,
            inventory: spec.inventory.clone(),
        },
        unlocked: BTreeSet::new(),
        t: 0,
        config,
        rng: seeds::rng(seed, "world"),
    };
    let spawn = g.spawn;
    let mut reserved = vec![spawn];
    if spec.table {
        state.place_structure(spawn.offset(-1, 0), TileKind::Table);
        reserved.push(spawn.offset(-1, 0));
    }
    if spec.furnace {
        state.place_structure(spawn.offset(1, 0), TileKind::Furnace);
        reserved.push(spawn.offset(1, 0));
    }
    if spec.plant {
        state.place_structure(spawn.offset(0, -1), TileKind::Plant);
        reserved.push(spawn.offset(0, -1));
    }
    if let Some(tile) = spec.landmark {
        const SPOTS: [(i32, i32); 8] =
            [(3, 0), (-3, 0), (0, 2), (0, -2), (2, 2), (-2, -2), (3, -2), (-3, 2)];
        let start = state.rng.gen_range(0..SPOTS.len());
        for k in 0..SPOTS.len() {
            let (dx, dy) = SPOTS[(start + k) % SPOTS.len()];
            let p = spawn.offset(dx, dy);
            if state.in_bounds(p) && !reserved.contains(&p) {
                state.place_structure(p, tile);
                reserved.push(p);
                break;
            }
        }
    }
    if let Some(kind) = spec.companion {
        const SPOTS: [(i32, i32); 6] = [(2, 1), (-2, 1), (1, 2), (-1, -2), (2, -1), (-2, -1)];
        let start = state.rng.gen_range(0..SPOTS.len());
        for k in 0..SPOTS.len() {
            let (dx, dy) = SPOTS[(start + k) % SPOTS.len()];
            let p = spawn.offset(dx, dy);
            if state.in_bounds(p) && !reserved.contains(&p) && state.tile(p).placeable() {
                state.entities.retain(|e| e.pos != p);
                state.entities.push(Entity::new(kind, p));
                break;
            }
        }
    }
    Ok(state)
}

/// Pure form of [`WorldState::advance`].
pub fn step(state: &WorldState, action: Action) -> Result<(WorldState, StepOutcome), StepError> {
    let mut next = state.clone();
    let outcome = next.advance(action)?;
    Ok((next, outcome))
}

impl WorldState {
    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn tile(&self, p: Pos) -> TileKind {
        self.terrain[(p.y * self.width + p.x) as usize]
    }

    pub fn tile_at(&self, p: Pos) -> Option<TileKind> {
        self.in_bounds(p).then(|| self.tile(p))
    }

    pub fn set_tile(&mut self, p: Pos, tile: TileKind) {
        let w = self.width;
        self.terrain[(p.y * w + p.x) as usize] = tile;
    }

    pub fn entity_at(&self, p: Pos) -> Option<usize> {
        self.entities.iter().position(|e| e.pos == p)
    }

    pub fn facing_pos(&self) -> Pos {
        self.agent.pos.step(self.agent.facing)
    }

    pub fn is_terminal(&self) -> bool {
        self.agent.status.health == 0
    }

    /// True when a tile of `kind` lies within Chebyshev distance 1 of the agent.
    pub fn nearby(&self, kind: TileKind) -> bool {
        let p = self.agent.pos;
        (-1..=1).any(|dy| {
            (-1..=1).any(|dx| self.tile_at(p.offset(dx, dy)) == Some(kind))
        })
    }

    fn place_structure(&mut self, p: Pos, tile: TileKind) {
        if self.in_bounds(p) {
            self.set_tile(p, tile);
            self.entities.retain(|e| e.pos != p);
        }
    }

    fn free_for_mob(&self, p: Pos) -> bool {
        self.in_bounds(p)
            && self.tile(p).placeable()
            && p != self.agent.pos
            && self.entity_at(p).is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    pub fn advance(&mut self, action: Action) -> Result<StepOutcome, StepError> {
        if self.is_terminal() {
            return Err(StepError::Terminal(self.t));
        }
        let before = self.agent.status;
        let mut gained = Vec::new();
        self.t += 1;
        let effective = self.apply(action, &mut gained);
        self.grow_saplings();
        if self.config.mobs {
            self.update_mobs();
        }
        if self.config.meter_decay {
            self.decay(action);
        }
        if self.tile(self.agent.pos) == TileKind::Lava {
            self.agent.status.health = 0;
        }
        let after = self.agent.status;
        let delta = |a: u8, b: u8| b as i8 - a as i8;
        let mut unlocked = Vec::new();
        for a in gained {
            if self.unlocked.insert(a) {
                unlocked.push(a);
            }
        }
        Ok(StepOutcome {
            unlocked,
            status_delta: [
                delta(before.health, after.health),
                delta(before.food, after.food),
                delta(before.drink, after.drink),
                delta(before.energy, after.energy),
            ],
            ineffective: !effective,
            terminal: self.is_terminal(),
        })
    }

    fn apply(&mut self, action: Action, gained: &mut Vec<AchievementId>) -> bool {
        use ItemKind as I;
        match action {
            Action::Noop => false,
            Action::MoveLeft | Action::MoveRight | Action::MoveUp | Action::MoveDown => {
                let dir = action.direction().expect("move action");
                let turned = self.agent.facing != dir;
                self.agent.facing = dir;
                let target = self.agent.pos.step(dir);
                let free = self.in_bounds(target)
                    && self.tile(target).walkable()
                    && self.entity_at(target).is_none();
                if free {
                    self.agent.pos = target;
                }
                turned || free
            }
            Action::Do => self.interact(gained),
            Action::Sleep => {
                let s = &mut self.agent.status;
                if s.energy >= METER_MAX {
                    return false;
                }
                s.energy += 1;
                if s.energy == METER_MAX {
                    gained.push(AchievementId::WakeUp);
                }
                true
            }
            Action::PlaceStone | Action::PlaceTable | Action::PlaceFurnace | Action::PlacePlant => {
                let target = self.facing_pos();
                if !self.in_bounds(target)
                    || !self.tile(target).placeable()
                    || self.entity_at(target).is_some()
                {
                    return false;
                }
                let (item, tile) = match action {
                    Action::PlaceStone => (I::Stone, TileKind::Stone),
                    Action::PlaceTable => (I::Wood, TileKind::Table),
                    Action::PlaceFurnace => {
                        if !self.nearby(TileKind::Table) {
                            return false;
                        }
                        (I::Stone, TileKind::Furnace)
                    }
                    _ => (I::Sapling, TileKind::PlantedSapling),
                };
                if !self.agent.inventory.take(item, 1) {
                    return false;
                }
                self.set_tile(target, tile);
                if tile == TileKind::PlantedSapling {
                    self.saplings.push(Sapling { pos: target, age: 0 });
                }
                gained.extend(AchievementId::for_action(action));
                true
            }
            Action::MakeWoodPickaxe
            | Action::MakeWoodSword
            | Action::MakeStonePickaxe
            | Action::MakeStoneSword
            | Action::MakeIronPickaxe
            | Action::MakeIronSword => {
                let (cost, needs_furnace, tool): (&[ItemKind], bool, ItemKind) = match action {
                    Action::MakeWoodPickaxe => (&[I::Wood], false, I::WoodPickaxe),
                    Action::MakeWoodSword => (&[I::Wood], false, I::WoodSword),
                    Action::MakeStonePickaxe => (&[I::Wood, I::Stone], false, I::StonePickaxe),
                    Action::MakeStoneSword => (&[I::Wood, I::Stone], false, I::StoneSword),
                    Action::MakeIronPickaxe => (&[I::Wood, I::Coal, I::Iron], true, I::IronPickaxe),
                    _ => (&[I::Wood, I::Coal, I::Iron], true, I::IronSword),
                };
                if !self.nearby(TileKind::Table) || (needs_furnace && !self.nearby(TileKind::Furnace)) {
                    return false;
                }
                let inv = &mut self.agent.inventory;
                if cost.iter().any(|i| !inv.has(*i)) || inv.count(tool) >= crate::craftworld::ITEM_MAX {
                    return false;
                }
                for i in cost {
                    inv.take(*i, 1);
                }
                inv.add_one(tool);
                gained.extend(AchievementId::for_action(action));
                true
            }
        }
    }

    fn interact(&mut self, gained: &mut Vec<AchievementId>) -> bool {
        let target = self.facing_pos();
        if !self.in_bounds(target) {
            return false;
        }
        if let Some(i) = self.entity_at(target) {
            let kind = self.entities[i].kind;
            if kind == EntityKind::Cow {
                self.entities.remove(i);
                let s = &mut self.agent.status;
                s.food = (s.food + COW_FOOD).min(METER_MAX);
                gained.push(AchievementId::EatCow);
                return true;
            }
            let damage = self.sword_damage();
            self.entities[i].health -= damage;
            if self.entities[i].health <= 0 {
                self.entities.remove(i);
                gained.push(match kind {
                    EntityKind::Zombie => AchievementId::DefeatZombie,
                    _ => AchievementId::DefeatSkeleton,
                });
            }
            return true;
        }
        let tile = self.tile(target);
        let inv = &mut self.agent.inventory;
        match tile {
            TileKind::Tree => {
                inv.add_one(ItemKind::Wood);
                gained.push(AchievementId::CollectWood);
                true
            }
            TileKind::Water => {
                let s = &mut self.agent.status;
                s.drink = (s.drink + 1).min(METER_MAX);
                gained.push(AchievementId::CollectDrink);
                true
            }
            TileKind::Stone | TileKind::Coal | TileKind::Iron | TileKind::Diamond => {
                let tool = tile.required_pickaxe().expect("minable");
                if !inv.has(tool) {
                    return false;
                }
                let item = tile.mined_item().expect("minable");
                inv.add_one(item);
                self.set_tile(target, TileKind::Path);
                gained.push(match item {
                    ItemKind::Stone => AchievementId::CollectStone,
                    ItemKind::Coal => AchievementId::CollectCoal,
                    ItemKind::Iron => AchievementId::CollectIron,
                    _ => AchievementId::CollectDiamond,
                });
                true
            }
            TileKind::Grass => {
                let roll = self.rng.gen_range(0..100u32);
                if roll < SAPLING_CHANCE_PCT && self.agent.inventory.add_one(ItemKind::Sapling) {
                    gained.push(AchievementId::CollectSapling);
                    true
                } else {
                    false
                }
            }
            TileKind::Plant => {
                self.set_tile(target, TileKind::Grass);
                let s = &mut self.agent.status;
                s.food = (s.food + PLANT_FOOD).min(METER_MAX);
                gained.push(AchievementId::EatPlant);
                true
            }
            _ => false,
        }
    }

    pub fn sword_damage(&self) -> i32 {
        let inv = &self.agent.inventory;
        if inv.has(ItemKind::IronSword) {
            5
        } else if inv.has(ItemKind::StoneSword) {
            3
        } else if inv.has(ItemKind::WoodSword) {
            2
        } else {
            1
        }
    }

    fn grow_saplings(&mut self) {
        let mut matured = Vec::new();
        self.saplings.retain_mut(|s| {
            s.age += 1;
            if s.age >= SAPLING_MATURE_STEPS {
                matured.push(s.pos);
                false
            } else {
                true
            }
        });
        for p in matured {
            if self.tile(p) == TileKind::PlantedSapling {
                self.set_tile(p, TileKind::Plant);
            }
        }
        let terrain = &self.terrain;
        let w = self.width;
        self.saplings.retain(|s| terrain[(s.pos.y * w + s.pos.x) as usize] == TileKind::PlantedSapling);
    }

    fn update_mobs(&mut self) {
        for i in 0..self.entities.len() {
            let e = self.entities[i].clone();
            let mut cooldown = e.cooldown.saturating_sub(1);
            let agent = self.agent.pos;
            let mut next = e.pos;
            if e.kind.hostile() && e.pos.manhattan(agent) == 1 {
                if cooldown == 0 {
                    let s = &mut self.agent.status;
                    s.health = s.health.saturating_sub(1);
                    cooldown = MOB_ATTACK_COOLDOWN;
                }
            } else {
                let chase = match e.kind {
                    EntityKind::Zombie => 6,
                    EntityKind::Skeleton => 4,
                    EntityKind::Cow => 0,
                };
                let roll = self.rng.gen_range(0..100u32);
                if chase > 0 && e.pos.chebyshev(agent) <= chase && roll < 60 {
                    let (dx, dy) = (agent.x - e.pos.x, agent.y - e.pos.y);
                    let primary = if dx.abs() >= dy.abs() { (dx.signum(), 0) } else { (0, dy.signum()) };
                    let secondary = if primary.0 != 0 { (0, dy.signum()) } else { (dx.signum(), 0) };
                    for (mx, my) in [primary, secondary] {
                        let p = e.pos.offset(mx, my);
                        if (mx, my) != (0, 0) && self.free_for_mob(p) {
                            next = p;
                            break;
                        }
                    }
                } else if roll >= 70 {
                    let dir = Direction::ALL[self.rng.gen_range(0..4)];
                    let p = e.pos.step(dir);
                    if self.free_for_mob(p) {
                        next = p;
                    }
                }
            }
            let m = &mut self.entities[i];
            m.cooldown = cooldown;
            m.pos = next;
        }
    }

    fn decay(&mut self, action: Action) {
        let t = self.t;
        let s = &mut self.agent.status;
        if t.is_multiple_of(FOOD_DECAY_EVERY) {
            s.food = s.food.saturating_sub(1);
        }
        if t.is_multiple_of(DRINK_DECAY_EVERY) {
            s.drink = s.drink.saturating_sub(1);
        }
        if t.is_multiple_of(ENERGY_DECAY_EVERY) && action != Action::Sleep {
            s.energy = s.energy.saturating_sub(1);
        }
        if t.is_multiple_of(STARVE_EVERY) && (s.food == 0 || s.drink == 0 || s.energy == 0) {
            s.health = s.health.saturating_sub(1);
        }
        if t.is_multiple_of(REGEN_EVERY) && s.food >= 5 && s.drink >= 5 && s.energy >= 5 {
            s.health = (s.health + 1).min(METER_MAX);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calm(spec: &InitSpec) -> WorldState {
        new_world_with(42, spec, WorldConfig { meter_decay: false, mobs: false }).unwrap()
    }

    /// Rewrites the 3x3 around the agent and faces east onto `tile`.
    fn facing(mut w: WorldState, tile: TileKind) -> WorldState {
        let p = w.agent.pos;
        for dy in -1..=1 {
            for dx in -1..=1 {
                w.set_tile(p.offset(dx, dy), TileKind::Grass);
            }
        }
        w.set_tile(p.offset(1, 0), tile);
        w.agent.facing = Direction::East;
        w
    }

    #[test]
    fn chopping_a_tree_yields_wood_and_unlocks_once() {
        let mut w = facing(calm(&InitSpec::default()), TileKind::Tree);
        let out = w.advance(Action::Do).unwrap();
        assert_eq!(w.agent.inventory.count(ItemKind::Wood), 1);
        assert_eq!(out.unlocked, vec![AchievementId::CollectWood]);
        let out = w.advance(Action::Do).unwrap();
        assert!(out.unlocked.is_empty());
        assert_eq!(w.agent.inventory.count(ItemKind::Wood), 2);
    }

    #[test]
    fn iron_needs_stone_pickaxe() {
        let spec = InitSpec {
            inventory: Inventory::new().with(ItemKind::WoodPickaxe, 1),
            ..InitSpec::default()
        };
        let mut w = facing(calm(&spec), TileKind::Iron);
        let before = w.agent.inventory.clone();
        let out = w.advance(Action::Do).unwrap();
        assert!(out.ineffective);
        assert_eq!(w.agent.inventory, before);
    }

    #[test]
    fn stone_pickaxe_recipe() {
        let spec = InitSpec {
            inventory: Inventory::new()
                .with(ItemKind::Wood, 1)
                .with(ItemKind::WoodPickaxe, 1)
                .with(ItemKind::Stone, 1),
            table: true,
            ..InitSpec::default()
        };
        let mut w = calm(&spec);
        let out = w.advance(Action::MakeStonePickaxe).unwrap();
        assert_eq!(out.unlocked, vec![AchievementId::MakeStonePickaxe]);
        assert_eq!(w.agent.inventory.count(ItemKind::Wood), 0);
        assert_eq!(w.agent.inventory.count(ItemKind::Stone), 0);
        assert!(w.agent.inventory.has(ItemKind::StonePickaxe));
    }

    #[test]
    fn iron_tools_need_furnace() {
        let inv = Inventory::new()
            .with(ItemKind::Wood, 2)
            .with(ItemKind::WoodPickaxe, 1)
            .with(ItemKind::StonePickaxe, 1)
            .with(ItemKind::Coal, 1)
            .with(ItemKind::Iron, 1);
        let mut w = calm(&InitSpec { inventory: inv.clone(), table: true, ..InitSpec::default() });
        assert!(w.advance(Action::MakeIronPickaxe).unwrap().ineffective);
        let mut w = calm(&InitSpec { inventory: inv, table: true, furnace: true, ..InitSpec::default() });
        let out = w.advance(Action::MakeIronPickaxe).unwrap();
        assert_eq!(out.unlocked, vec![AchievementId::MakeIronPickaxe]);
    }

    #[test]
    fn noop_only_advances_time() {
        let mut w = calm(&InitSpec::default());
        let before = w.clone();
        let out = w.advance(Action::Noop).unwrap();
        assert!(out.ineffective);
        assert_eq!(w.t, 1);
        w.t = 0;
        assert_eq!(w, before);
    }

    #[test]
    fn placement_only_on_open_ground() {
        let spec = InitSpec { inventory: Inventory::new().with(ItemKind::Wood, 2), ..InitSpec::default() };
        let mut w = facing(calm(&spec), TileKind::Water);
        assert!(w.advance(Action::PlaceTable).unwrap().ineffective);
        let mut w = facing(calm(&spec), TileKind::Sand);
        let out = w.advance(Action::PlaceTable).unwrap();
        assert_eq!(out.unlocked, vec![AchievementId::PlaceTable]);
        assert_eq!(w.tile(w.facing_pos()), TileKind::Table);
    }

    #[test]
    fn sapling_matures_into_edible_plant() {
        let spec = InitSpec { inventory: Inventory::new().with(ItemKind::Sapling, 1), ..InitSpec::default() };
        let mut w = facing(calm(&spec), TileKind::Grass);
        w.agent.status.food = 3;
        w.advance(Action::PlacePlant).unwrap();
        for _ in 0..SAPLING_MATURE_STEPS {
            w.advance(Action::Noop).unwrap();
        }
        assert_eq!(w.tile(w.facing_pos()), TileKind::Plant);
        let out = w.advance(Action::Do).unwrap();
        assert_eq!(out.unlocked, vec![AchievementId::EatPlant]);
        assert_eq!(w.agent.status.food, 7);
    }

    #[test]
    fn sleeping_to_full_energy_wakes_up() {
        let mut w = calm(&InitSpec::default());
        w.agent.status.energy = 7;
        assert!(w.advance(Action::Sleep).unwrap().unlocked.is_empty());
        assert_eq!(w.advance(Action::Sleep).unwrap().unlocked, vec![AchievementId::WakeUp]);
        assert!(w.advance(Action::Sleep).unwrap().ineffective);
    }

    #[test]
    fn zombie_takes_three_bare_hits() {
        let mut w = facing(calm(&InitSpec::default()), TileKind::Grass);
        let p = w.facing_pos();
        w.entities.push(Entity::new(EntityKind::Zombie, p));
        w.advance(Action::Do).unwrap();
        w.advance(Action::Do).unwrap();
        let out = w.advance(Action::Do).unwrap();
        assert_eq!(out.unlocked, vec![AchievementId::DefeatZombie]);
        assert!(w.entities.is_empty());
    }

    #[test]
    fn meter_schedule() {
        let mut w = new_world_with(42, &InitSpec::default(), WorldConfig { meter_decay: true, mobs: false }).unwrap();
        for _ in 0..30 {
            w.advance(Action::Noop).unwrap();
        }
        let s = w.agent.status;
        assert_eq!((s.food, s.drink, s.energy), (8, 8, 8));
    }

    #[test]
    fn terminal_state_rejects_steps() {
        let mut w = calm(&InitSpec::default());
        w.agent.status.health = 0;
        assert!(w.advance(Action::Noop).is_err());
    }

    #[test]
    fn state_round_trips_through_json() {
        let w = new_world(7, &InitSpec::default()).unwrap();
        let json = w.to_json();
        let back: WorldState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.to_json(), json);
    }
}
