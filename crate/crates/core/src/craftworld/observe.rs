//! Local view extraction and the text observation format.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::types::{AchievementId, AgentStatus, Direction, EntityKind, Inventory, TileKind, METER_MAX};
use super::world::{tile_char, tile_from_char, Pos, WorldState};

pub const VIEW_W: i32 = 9;
pub const VIEW_H: i32 = 7;

/// Something that can appear in the "You see" list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Seen {
    Tile(TileKind),
    Entity(EntityKind),
}

impl Seen {
    pub fn name(self) -> &'static str {
        match self {
            Seen::Tile(t) => t.name(),
            Seen::Entity(e) => e.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Seen> {
        TileKind::from_name(name)
            .map(Seen::Tile)
            .or_else(|| EntityKind::from_name(name).map(Seen::Entity))
    }
}

impl Serialize for Seen {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Seen {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Seen::from_name(&name).ok_or_else(|| serde::de::Error::custom(format!("unknown kind {name}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compass {
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

impl Compass {
    /// Direction of an offset given as (east, north) components. `None` for the origin.
    pub fn from_offset(east: i32, north: i32) -> Option<Compass> {
        use std::cmp::Ordering::*;
        Some(match (east.cmp(&0), north.cmp(&0)) {
            (Equal, Greater) => Compass::North,
            (Greater, Greater) => Compass::NorthEast,
            (Greater, Equal) => Compass::East,
            (Greater, Less) => Compass::SouthEast,
            (Equal, Less) => Compass::South,
            (Less, Less) => Compass::SouthWest,
            (Less, Equal) => Compass::West,
            (Less, Greater) => Compass::NorthWest,
            (Equal, Equal) => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Compass::North => "north",
            Compass::NorthEast => "north-east",
            Compass::East => "east",
            Compass::SouthEast => "south-east",
            Compass::South => "south",
            Compass::SouthWest => "south-west",
            Compass::West => "west",
            Compass::NorthWest => "north-west",
        }
    }
}

/// Step count reported for an offset.
pub fn step_distance(east: i32, north: i32) -> u32 {
    east.unsigned_abs() + north.unsigned_abs()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sighting {
    pub kind: Seen,
    pub distance: u32,
    pub direction: Compass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facing {
    /// `None` when the agent faces the map boundary.
    pub kind: Option<Seen>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEntity {
    pub kind: EntityKind,
    /// Offset from the agent, `y` growing southwards.
    pub dx: i32,
    pub dy: i32,
}

/// The 9x7 window around the agent. Rows run north to south; `' '` marks cells off the map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalView {
    pub rows: Vec<String>,
    pub entities: Vec<ViewEntity>,
}

impl LocalView {
    pub fn tile(&self, dx: i32, dy: i32) -> Option<TileKind> {
        let (cx, cy) = (dx + VIEW_W / 2, dy + VIEW_H / 2);
        if !(0..VIEW_W).contains(&cx) || !(0..VIEW_H).contains(&cy) {
            return None;
        }
        self.rows[cy as usize].chars().nth(cx as usize).and_then(tile_from_char)
    }

    pub fn entity(&self, dx: i32, dy: i32) -> Option<EntityKind> {
        self.entities.iter().find(|e| e.dx == dx && e.dy == dy).map(|e| e.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub status: AgentStatus,
    pub inventory: Inventory,
    pub visible: Vec<Sighting>,
    pub facing: Facing,
    pub view: LocalView,
    pub unlocked: BTreeSet<AchievementId>,
}

pub fn observe(state: &WorldState) -> Observation {
    let a = state.agent.pos;
    let mut rows = Vec::with_capacity(VIEW_H as usize);
    let mut entities = Vec::new();
    let mut best: Vec<(Seen, u32, Compass)> = Vec::new();
    for dy in -(VIEW_H / 2)..=VIEW_H / 2 {
        let mut row = String::with_capacity(VIEW_W as usize);
        for dx in -(VIEW_W / 2)..=VIEW_W / 2 {
            let p = a.offset(dx, dy);
            let Some(tile) = state.tile_at(p) else {
                row.push(' ');
                continue;
            };
            row.push(tile_char(tile));
            if (dx, dy) == (0, 0) {
                continue;
            }
            let entity = state.entity_at(p).map(|i| state.entities[i].kind);
            if let Some(kind) = entity {
                entities.push(ViewEntity { kind, dx, dy });
            }
            let seen = entity.map_or(Seen::Tile(tile), Seen::Entity);
            let dist = step_distance(dx, -dy);
            let dir = Compass::from_offset(dx, -dy).expect("non-origin");
            match best.iter_mut().find(|(k, _, _)| *k == seen) {
                Some(slot) => {
                    if (dist, dir) < (slot.1, slot.2) {
                        *slot = (seen, dist, dir);
                    }
                }
                None => best.push((seen, dist, dir)),
            }
        }
        rows.push(row);
    }
    best.sort_by_key(|(k, d, dir)| (*d, *k, *dir));
    let facing_pos: Pos = state.facing_pos();
    let facing_kind = state.tile_at(facing_pos).map(|t| {
        state
            .entity_at(facing_pos)
            .map_or(Seen::Tile(t), |i| Seen::Entity(state.entities[i].kind))
    });
    Observation {
        status: state.agent.status,
        inventory: state.agent.inventory.clone(),
        visible: best
            .into_iter()
            .map(|(kind, distance, direction)| Sighting { kind, distance, direction })
            .collect(),
        facing: Facing { kind: facing_kind, direction: state.agent.facing },
        view: LocalView { rows, entities },
        unlocked: state.unlocked.clone(),
    }
}

pub fn render_text(obs: &Observation) -> String {
    let mut out = String::from("### Current Observation\nYour status:\n");
    let s = obs.status;
    for (name, v) in [("health", s.health), ("food", s.food), ("drink", s.drink), ("energy", s.energy)] {
        let _ = writeln!(out, "- {name}: {v}/{METER_MAX}");
    }
    out.push_str("\nYour inventory:\n");
    for (item, count) in obs.inventory.iter() {
        let _ = writeln!(out, "- {}: {count}", item.name());
    }
    out.push_str("\nYou see:\n");
    for v in &obs.visible {
        let _ = writeln!(out, "- {} {} steps to your {}", v.kind.name(), v.distance, v.direction.name());
    }
    let what = obs.facing.kind.map_or("the boundary", Seen::name);
    let _ = write!(out, "\nYou are facing {what} at your front ({} direction)", obs.facing.direction.name());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::craftworld::{new_world, InitSpec};

    #[test]
    fn compass_covers_all_sign_patterns() {
        assert_eq!(Compass::from_offset(3, 2), Some(Compass::NorthEast));
        assert_eq!(Compass::from_offset(0, -1), Some(Compass::South));
        assert_eq!(Compass::from_offset(-2, 1), Some(Compass::NorthWest));
        assert_eq!(Compass::from_offset(0, 0), None);
    }

    #[test]
    fn fresh_spawn_renders_full_meters_and_empty_inventory() {
        let w = new_world(42, &InitSpec::default()).unwrap();
        let text = render_text(&observe(&w));
        assert!(text.contains("- health: 9/9"));
        assert!(text.contains("Your inventory:\n\nYou see:"));
    }

    #[test]
    fn view_is_nine_by_seven() {
        let w = new_world(3, &InitSpec::default()).unwrap();
        let obs = observe(&w);
        assert_eq!(obs.view.rows.len(), 7);
        assert!(obs.view.rows.iter().all(|r| r.chars().count() == 9));
        assert_eq!(obs.view.tile(0, 0), Some(w.tile(w.agent.pos)));
    }

    /// A lone coal tile at every in-view offset, checked against a direct reading of the offset.
    #[test]
    fn every_offset_reports_step_count_and_heading() {
        let mut base = new_world(42, &InitSpec::default()).unwrap();
        base.entities.clear();
        let a = base.agent.pos;
        for dy in -(VIEW_H / 2)..=VIEW_H / 2 {
            for dx in -(VIEW_W / 2)..=VIEW_W / 2 {
                let p = a.offset(dx, dy);
                base.terrain[(p.y * base.width + p.x) as usize] = TileKind::Grass;
            }
        }
        for dy in -(VIEW_H / 2)..=VIEW_H / 2 {
            for dx in -(VIEW_W / 2)..=VIEW_W / 2 {
                if (dx, dy) == (0, 0) {
                    continue;
                }
                let mut w = base.clone();
                let p = a.offset(dx, dy);
                w.terrain[(p.y * w.width + p.x) as usize] = TileKind::Coal;
                let text = render_text(&observe(&w));
                let vertical = if dy < 0 { "north" } else if dy > 0 { "south" } else { "" };
                let horizontal = if dx > 0 { "east" } else if dx < 0 { "west" } else { "" };
                let heading = [vertical, horizontal].iter().filter(|s| !s.is_empty()).copied().collect::<Vec<_>>().join("-");
                let line = format!("- coal {} steps to your {heading}\n", dx.abs() + dy.abs());
                assert!(text.contains(&line), "offset ({dx},{dy}): {text}");
            }
        }
        let mut w = base.clone();
        let p = a.offset(2, -3);
        w.terrain[(p.y * w.width + p.x) as usize] = TileKind::Coal;
        assert!(render_text(&observe(&w)).contains("- coal 5 steps to your north-east\n"));
    }
}
