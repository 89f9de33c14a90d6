use super::curriculum::{primitive_inventory, record, Curriculum, CurriculumError};
use super::worlds::house;
use crate::skilldb::SkillDatabase;
use std::sync::{Arc, OnceLock};

pub const FRUITS: [&str; 4] = ["bananas", "peach", "apple", "plum"];
pub const FOODS: [&str; 2] = ["salmon", "bellpepper"];

fn pairs(items: &[&'static str]) -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            out.push((*a, *b));
        }
    }
    out
}

fn deliver(x: &str, r: &str) -> Vec<String> {
    vec![
        format!("walk {x}"),
        format!("grab {x}"),
        format!("walk {r}"),
        format!("put {x} {r}"),
    ]
}

/// The four-level household hierarchy recorded in the training house.
pub fn household_curriculum() -> Curriculum {
    let mut c = Curriculum {
        primitives: primitive_inventory(&house()),
        ..Default::default()
    };
    let kc = "kitchencabinet";
    let edible: Vec<&str> = FRUITS.iter().chain(FOODS.iter()).copied().collect();

    // Level 2: single deliveries and appliance handling.
    for x in &edible {
        for r in ["kitchentable", "coffeetable"] {
            c.add_owned(2, format!("put {x} on {r}"), deliver(x, r));
        }
        c.add_owned(2, format!("put {x} in fridge"), deliver(x, "fridge"));
        c.add_owned(2, format!("put {x} in {kc}"), deliver(x, kc));
        let mut open_put = deliver(x, kc);
        open_put.insert(3, format!("open {kc}"));
        c.add_owned(2, format!("open the {kc} and put {x} in {kc}"), open_put);
    }
    c.add_owned(2, "put salmon in microwave", deliver("salmon", "microwave"));
    for t in ["toothbrush", "toothpaste", "soap", "towel"] {
        c.add_owned(
            2,
            format!("put {t} in bathroomcabinet"),
            deliver(t, "bathroomcabinet"),
        );
    }
    for o in [kc, "fridge", "microwave", "bathroomcabinet"] {
        c.add_owned(
            2,
            format!("open the {o}"),
            vec![format!("walk {o}"), format!("open {o}")],
        );
        c.add_owned(
            2,
            format!("close the {o}"),
            vec![format!("walk {o}"), format!("close {o}")],
        );
    }
    for o in ["tv", "microwave", "desklamp"] {
        c.add_owned(
            2,
            format!("turn on {o}"),
            vec![format!("walk {o}"), format!("switchon {o}")],
        );
    }
    c.add(2, "turn off tv", &["walk tv", "switchoff tv"]);
    for o in ["sofa", "bed"] {
        c.add_owned(
            2,
            format!("sit on {o}"),
            vec![format!("walk {o}"), format!("sit {o}")],
        );
    }
    for o in ["book", "remotecontrol", "pillow"] {
        c.add_owned(
            2,
            format!("pick up {o}"),
            vec![format!("walk {o}"), format!("grab {o}")],
        );
    }
    for (x, r) in [
        ("book", "coffeetable"),
        ("book", "bed"),
        ("remotecontrol", "sofa"),
        ("pillow", "sofa"),
    ] {
        c.add_owned(2, format!("put {x} on {r}"), deliver(x, r));
    }

    // Level 3: pairs and single placements per receptacle.
    for (a, b) in pairs(&FRUITS).into_iter().chain([("salmon", "bellpepper")]) {
        for r in ["kitchentable", "coffeetable"] {
            c.add_owned(
                3,
                format!("put {a} and {b} on {r}"),
                vec![format!("put {a} on {r}"), format!("put {b} on {r}")],
            );
        }
        c.add_owned(
            3,
            format!("put {a} and {b} in fridge"),
            vec![format!("put {a} in fridge"), format!("put {b} in fridge")],
        );
        c.add_owned(
            3,
            format!("put {a} and {b} in {kc}"),
            vec![
                format!("open the {kc} and put {a} in {kc}"),
                format!("put {b} in {kc}"),
                format!("close the {kc}"),
            ],
        );
    }
    for x in &edible {
        for r in ["kitchentable", "coffeetable"] {
            c.add_owned(
                3,
                format!("place {x} on {r}"),
                vec![format!("put {x} on {r}")],
            );
        }
        c.add_owned(
            3,
            format!("place {x} in fridge"),
            vec![format!("put {x} in fridge")],
        );
        c.add_owned(
            3,
            format!("place {x} in {kc}"),
            vec![
                format!("open the {kc} and put {x} in {kc}"),
                format!("close the {kc}"),
            ],
        );
    }
    for (a, b) in [("toothbrush", "toothpaste"), ("soap", "towel")] {
        c.add_owned(
            3,
            format!("put {a} and {b} in bathroomcabinet"),
            vec![
                "open the bathroomcabinet".to_string(),
                format!("put {a} in bathroomcabinet"),
                format!("put {b} in bathroomcabinet"),
                "close the bathroomcabinet".to_string(),
            ],
        );
    }
    c.add(
        3,
        "put salmon in the microwave",
        &[
            "open the microwave",
            "put salmon in microwave",
            "close the microwave",
        ],
    );
    c.add(3, "start the microwave", &["turn on microwave"]);
    c.add(
        3,
        "grab remotecontrol and turn on tv",
        &["pick up remotecontrol", "turn on tv"],
    );
    c.add(
        3,
        "turn on tv and sit on sofa",
        &["turn on tv", "sit on sofa"],
    );
    c.add(3, "sit on sofa and relax", &["sit on sofa"]);
    c.add(3, "pick up book from bookshelf", &["pick up book"]);
    c.add(3, "relax in bed", &["turn on desklamp", "sit on bed"]);
    c.add(
        3,
        "put book on coffeetable and remotecontrol on sofa",
        &["put book on coffeetable", "put remotecontrol on sofa"],
    );
    c.add(
        3,
        "put pillow on sofa and lie down",
        &["put pillow on sofa", "sit on sofa"],
    );

    // Level 4: household tasks, each valid from the reset state.
    c.add(
        4,
        "put fruits on kitchentable",
        &[
            "put bananas and peach on kitchentable",
            "place apple on kitchentable",
        ],
    );
    c.add(
        4,
        "watch tv while sitting on sofa",
        &["grab remotecontrol and turn on tv", "sit on sofa and relax"],
    );
    c.add(
        4,
        "put fruits in kitchencabinet",
        &[
            "put bananas and peach in kitchencabinet",
            "place apple in kitchencabinet",
        ],
    );
    c.add(
        4,
        "put fruits in fridge",
        &["place peach in fridge", "place plum in fridge"],
    );
    c.add(
        4,
        "read book on sofa",
        &["pick up book from bookshelf", "sit on sofa and relax"],
    );
    c.add(
        4,
        "set fruits on coffeetable",
        &[
            "put bananas and apple on coffeetable",
            "place plum on coffeetable",
        ],
    );
    c.add(
        4,
        "put food on kitchentable",
        &[
            "put salmon and bellpepper on kitchentable",
            "place plum on kitchentable",
        ],
    );
    c.add(
        4,
        "store food in fridge",
        &[
            "put salmon and bellpepper in fridge",
            "put bananas and apple in fridge",
        ],
    );
    c.add(
        4,
        "store food in kitchencabinet",
        &[
            "put salmon and bellpepper in kitchencabinet",
            "place plum in kitchencabinet",
        ],
    );
    c.add(
        4,
        "put toiletries in bathroomcabinet",
        &[
            "put toothbrush and toothpaste in bathroomcabinet",
            "put soap and towel in bathroomcabinet",
        ],
    );
    c.add(
        4,
        "heat salmon in microwave",
        &["put salmon in the microwave", "start the microwave"],
    );
    c.add(
        4,
        "read book in bed",
        &["pick up book from bookshelf", "relax in bed"],
    );
    c.add(
        4,
        "tidy the livingroom",
        &[
            "put book on coffeetable and remotecontrol on sofa",
            "put pillow on sofa and lie down",
        ],
    );
    c
}

pub fn build_household_database() -> Result<SkillDatabase, CurriculumError> {
    record(&house(), &household_curriculum(), true)
}

/// The recorded household database, built once per process.
pub fn household_database() -> Arc<SkillDatabase> {
    static DB: OnceLock<Arc<SkillDatabase>> = OnceLock::new();
    DB.get_or_init(|| {
        Arc::new(build_household_database().expect("household curriculum records cleanly"))
    })
    .clone()
}
