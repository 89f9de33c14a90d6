use crate::worldsim::{Agent, Properties, WorldObject, WorldState};
use std::collections::{BTreeMap, BTreeSet};

/// Compact world construction. Object flags: `g` graspable, `s` surface,
/// `c` container, `sit` sittable, `open`/`closed` openable with initial
/// state, `on`/`off` switchable with initial state.
pub(crate) struct WorldBuilder {
    state: WorldState,
}

impl WorldBuilder {
    pub(crate) fn new(name: &str, rooms: &[&str], start: &str) -> Self {
        Self {
            state: WorldState {
                name: name.to_string(),
                rooms: rooms.iter().map(|r| r.to_string()).collect(),
                doors: BTreeSet::new(),
                objects: BTreeMap::new(),
                agent: Agent {
                    room: start.to_string(),
                    near: BTreeSet::new(),
                    holding: Vec::new(),
                    sitting: None,
                },
                step_count: 0,
                rng_seed: 0,
            },
        }
    }

    pub(crate) fn door(mut self, a: &str, b: &str) -> Self {
        self.state.connect(a, b);
        self
    }

    pub(crate) fn obj(
        mut self,
        name: &str,
        class: &str,
        room: &str,
        parent: Option<&str>,
        flags: &str,
    ) -> Self {
        let mut p = Properties::default();
        let mut open = None;
        let mut power = None;
        for f in flags.split_whitespace() {
            match f {
                "g" => p.graspable = true,
                "s" => p.surface = true,
                "c" => p.container = true,
                "sit" => p.sittable = true,
                "open" | "closed" => {
                    p.openable = true;
                    open = Some(f == "open");
                }
                "on" | "off" => {
                    p.switchable = true;
                    power = Some(f == "on");
                }
                other => panic!("unknown object flag {other}"),
            }
        }
        self.state.objects.insert(
            name.to_string(),
            WorldObject {
                class: class.to_string(),
                label: None,
                room: Some(room.to_string()),
                parent: parent.map(str::to_string),
                properties: p,
                open,
                power,
            },
        );
        self
    }

    pub(crate) fn label(mut self, name: &str, label: &str) -> Self {
        self.state
            .objects
            .get_mut(name)
            .expect("labelled object exists")
            .label = Some(label.to_string());
        self
    }

    pub(crate) fn build(self) -> WorldState {
        self.state.check().expect("fixture world is consistent");
        self.state
    }
}

fn household(name: &str, start: &str) -> WorldBuilder {
    let k = "kitchen";
    let l = "livingroom";
    let b = "bedroom";
    let w = "bathroom";
    WorldBuilder::new(name, &[k, l, b, w], start)
        .obj("kitchencounter", "furniture", k, None, "s")
        .obj("kitchentable", "furniture", k, None, "s")
        .obj("kitchencabinet", "furniture", k, None, "c closed")
        .obj("fridge", "appliance", k, None, "c open")
        .obj("microwave", "appliance", k, None, "c closed off")
        .obj("garbagecan", "furniture", k, None, "c")
        .obj("bananas", "fruit", k, Some("kitchencounter"), "g")
        .obj("peach", "fruit", k, Some("kitchencounter"), "g")
        .obj("apple", "fruit", k, Some("kitchencounter"), "g")
        .obj("plum", "fruit", k, Some("kitchencounter"), "g")
        .obj("salmon", "food", k, Some("kitchencounter"), "g")
        .obj("bellpepper", "vegetable", k, Some("kitchencounter"), "g")
        .obj("cereal", "food", k, Some("kitchencabinet"), "g")
        .obj("sofa", "furniture", l, None, "s sit")
        .obj("tv", "appliance", l, None, "off")
        .obj("coffeetable", "furniture", l, None, "s")
        .obj("bookshelf", "furniture", l, None, "s")
        .obj("bed", "furniture", b, None, "s sit")
        .obj("desk", "furniture", b, None, "s")
        .obj("desklamp", "appliance", b, Some("desk"), "off")
        .obj("pillow", "bedding", b, Some("bed"), "g")
        .obj("bathroomcabinet", "furniture", w, None, "c closed")
        .obj("bathroomcounter", "furniture", w, None, "s")
        .obj("toothbrush", "toiletry", w, Some("bathroomcounter"), "g")
        .obj("toothpaste", "toiletry", w, Some("bathroomcounter"), "g")
        .obj("soap", "toiletry", w, Some("bathroomcounter"), "g")
        .obj("towel", "toiletry", w, Some("bathroomcounter"), "g")
}

/// The training house: a living room hub with the kitchen, bedroom and
/// bathroom off it, plus kitchen-bedroom and bedroom-bathroom doors.
pub fn house() -> WorldState {
    household("house", "livingroom")
        .door("kitchen", "livingroom")
        .door("livingroom", "bedroom")
        .door("livingroom", "bathroom")
        .door("kitchen", "bedroom")
        .door("bedroom", "bathroom")
        .obj("book", "book", "livingroom", Some("bookshelf"), "g")
        .obj(
            "remotecontrol",
            "electronics",
            "livingroom",
            Some("coffeetable"),
            "g",
        )
        .build()
}

/// A second base world with the same furniture: a corridor layout, the
/// agent starting in the kitchen and a few things left elsewhere.
pub fn apartment() -> WorldState {
    household("apartment", "kitchen")
        .door("kitchen", "livingroom")
        .door("livingroom", "bedroom")
        .door("bedroom", "bathroom")
        .door("kitchen", "bathroom")
        .obj("book", "book", "livingroom", Some("coffeetable"), "g")
        .obj(
            "remotecontrol",
            "electronics",
            "livingroom",
            Some("sofa"),
            "g",
        )
        .build()
}

/// The kitchen of the sampled appendix trajectory, with human-readable
/// labels.
pub fn kitchen() -> WorldState {
    let k = "kitchen";
    WorldBuilder::new("kitchen", &[k], k)
        .obj("kitchencounter", "furniture", k, None, "s")
        .obj("kitchencounterdrawer", "furniture", k, None, "c")
        .obj("kitchencabinet", "furniture", k, None, "c closed")
        .obj("fridge", "appliance", k, None, "c open")
        .obj("faucet", "fixture", k, None, "closed")
        .obj("garbagecan", "furniture", k, None, "c closed")
        .obj("microwave", "appliance", k, None, "c closed")
        .obj("bananas", "fruit", k, Some("kitchencounter"), "g")
        .obj("peach", "fruit", k, Some("kitchencounter"), "g")
        .obj("apple", "fruit", k, Some("kitchencounter"), "g")
        .obj("salmon", "food", k, Some("kitchencounter"), "g")
        .obj("bellpepper", "vegetable", k, Some("kitchencounter"), "g")
        .obj("washingsponge", "tool", k, Some("kitchencounter"), "g")
        .label("kitchencounter", "kitchen counter")
        .label("kitchencounterdrawer", "kitchen counter drawer")
        .label("kitchencabinet", "kitchen cabinet")
        .label("garbagecan", "garbage can")
        .label("bellpepper", "bell pepper")
        .label("washingsponge", "washing sponge")
        .build()
}

/// Two-room world used to exercise skill bootstrapping.
pub fn toy() -> WorldState {
    let k = "kitchen";
    let l = "livingroom";
    WorldBuilder::new("toy", &[k, l], k)
        .door(k, l)
        .obj("table", "furniture", k, None, "s")
        .obj("cabinet", "furniture", k, None, "c closed")
        .obj("apple", "fruit", k, Some("table"), "g")
        .obj("cup", "dish", k, Some("table"), "g")
        .obj("sofa", "furniture", l, None, "s sit")
        .obj("lamp", "appliance", l, None, "off")
        .build()
}

pub fn world(name: &str) -> Option<WorldState> {
    match name {
        "house" => Some(house()),
        "apartment" => Some(apartment()),
        "kitchen" => Some(kitchen()),
        "toy" => Some(toy()),
        _ => None,
    }
}

pub const WORLD_NAMES: &[&str] = &["house", "apartment", "kitchen", "toy"];
