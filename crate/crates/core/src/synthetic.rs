//! A deterministic, internally consistent clause corpus for tests and demos.
//!
//! Every numeric subject is unique, parenthetical conversions agree, dictionary
//! terms appear only in their canonical form, and cross-references point at
//! clauses without bounds, so the baseline rules find nothing until conflicts
//! are injected.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{load_corpus, Corpus};
use crate::sampling::Sampler;

pub const SYNTHETIC_DOCUMENTS: usize = 2;
pub const SYNTHETIC_CLAUSES_PER_DOCUMENT: usize = 100;

const ELEMENTS: [&str; 30] = [
    "corridor",
    "doorway",
    "ramp run",
    "stair flight",
    "landing",
    "lobby",
    "lift car",
    "toilet cubicle",
    "shower area",
    "reception counter",
    "vision panel",
    "balustrade",
    "kitchen worktop",
    "entrance mat",
    "parking bay",
    "refuge area",
    "platform lift",
    "bench seat",
    "grab rail",
    "turning space",
    "threshold",
    "canopy",
    "window sill",
    "notice board",
    "drinking fountain",
    "coat hook",
    "changing bench",
    "bus shelter",
    "ticket window",
    "letter box",
];

const LENGTH_PROPS: [&str; 6] = ["width", "height", "depth", "length", "thickness", "clearance"];
const RATIO_PROPS: [&str; 2] = ["slope", "gradient"];
const ANGLE_PROPS: [&str; 2] = ["pitch", "bevel"];

const QUALITIES: [&str; 8] = [
    "kept free of obstructions",
    "finished with a slip-resistant surface",
    "illuminated to a uniform level",
    "clearly signposted from the entrance",
    "visually contrasted with adjacent surfaces",
    "protected from the weather",
    "fitted with tactile warnings",
    "inspected at regular intervals",
];

const PROHIBITIONS: [&str; 4] = [
    "used for storage",
    "obstructed by opening doors",
    "located on an escape route",
    "painted with gloss finishes",
];

const TERM_ELEMENTS: [&str; 12] = [
    "curb ramp",
    "curb cut",
    "storey exit",
    "storey sign",
    "handrail grip",
    "handrail return",
    "gutter grating",
    "gutter outlet",
    "pavement crossing",
    "pavement edge",
    "wheelchair bay",
    "wheelchair space",
];

const TITLES: [&str; 5] = ["General", "Circulation", "Facilities", "External areas", "Fittings"];

const INCH_MIN: [(f64, u32); 5] = [(32.0, 813), (36.0, 914), (40.0, 1016), (44.0, 1118), (48.0, 1219)];
const INCH_MAX: [(&str, u32); 5] = [("0.25", 6), ("0.5", 13), ("0.75", 19), ("1", 25), ("2", 51)];
const RATIO_DENOMINATORS: [u32; 7] = [12, 14, 16, 20, 25, 48, 50];
const ANGLES: [u32; 5] = [30, 45, 60, 75, 90];

/// Pops pairs drawn without replacement from a shuffled product.
struct Pool {
    items: Vec<(usize, usize)>,
}

impl Pool {
    fn new(a: usize, b: usize, rng: &mut Sampler) -> Self {
        let mut items: Vec<(usize, usize)> = (0..a).flat_map(|i| (0..b).map(move |j| (i, j))).collect();
        rng.shuffle(&mut items);
        Self { items }
    }

    fn take(&mut self) -> (usize, usize) {
        self.items.pop().expect("synthetic pool sized for the fixture")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Two documents of 100 clauses each, as `(doc id, text)` pairs.
pub fn synthetic_documents(seed: u64) -> Vec<(String, String)> {
    let mut rng = Sampler::new(seed);
    let mut lengths = Pool::new(LENGTH_PROPS.len(), ELEMENTS.len(), &mut rng);
    let mut ratios = Pool::new(RATIO_PROPS.len(), ELEMENTS.len(), &mut rng);
    let mut angles = Pool::new(ANGLE_PROPS.len(), ELEMENTS.len(), &mut rng);
    let mut goods = Pool::new(ELEMENTS.len(), QUALITIES.len(), &mut rng);
    let mut bads = Pool::new(ELEMENTS.len(), PROHIBITIONS.len(), &mut rng);
    let mut terms = Pool::new(TERM_ELEMENTS.len(), QUALITIES.len(), &mut rng);

    let mut docs = Vec::new();
    for d in 0..SYNTHETIC_DOCUMENTS {
        let mut text = String::new();
        for i in 0..SYNTHETIC_CLAUSES_PER_DOCUMENT {
            let section = i / 10 + 1;
            let n = i % 10 + 1;
            let id = format!("{}.{}.{}", d + 1, section, n);
            let length_subject = |p: &mut Pool| {
                let (prop, el) = p.take();
                format!("The {} of the {}", LENGTH_PROPS[prop], ELEMENTS[el])
            };
            let body = match i % 10 {
                0 => {
                    let s = length_subject(&mut lengths);
                    format!("{s} shall be at least {} mm.", 800 + 50 * rng.below(21))
                }
                1 => {
                    let s = length_subject(&mut lengths);
                    format!("{s} shall not exceed {} mm.", 100 + 25 * rng.below(25))
                }
                2 => {
                    let (el, q) = goods.take();
                    format!("The {} shall be {}.", ELEMENTS[el], QUALITIES[q])
                }
                3 => {
                    let s = length_subject(&mut lengths);
                    if section % 2 == 0 {
                        let (inches, mm) = INCH_MIN[rng.below(INCH_MIN.len())];
                        format!("{s} shall be at least {inches} inches ({mm} mm).")
                    } else {
                        let (inches, mm) = INCH_MAX[rng.below(INCH_MAX.len())];
                        format!("{s} shall not exceed {inches}-inch ({mm}mm).")
                    }
                }
                4 | 9 => {
                    let (t, q) = terms.take();
                    format!("Each {} shall be {}.", TERM_ELEMENTS[t], QUALITIES[q])
                }
                5 => {
                    let (prop, el) = ratios.take();
                    let den = RATIO_DENOMINATORS[rng.below(RATIO_DENOMINATORS.len())];
                    format!("The {} of the {} shall not exceed 1:{den}.", RATIO_PROPS[prop], ELEMENTS[el])
                }
                6 => {
                    let (el, q) = bads.take();
                    format!("The {} shall not be {}.", ELEMENTS[el], PROHIBITIONS[q])
                }
                7 => {
                    let s = length_subject(&mut lengths);
                    format!(
                        "{s} shall be at least {} mm, in accordance with {}.{}.3.",
                        800 + 50 * rng.below(21),
                        d + 1,
                        section
                    )
                }
                _ => {
                    let (prop, el) = angles.take();
                    format!(
                        "{} shall be {} degrees.",
                        capitalize(&format!("the {} of the {}", ANGLE_PROPS[prop], ELEMENTS[el])),
                        ANGLES[rng.below(ANGLES.len())]
                    )
                }
            };
            if n == 1 {
                text.push_str(&format!("{id}: {}\n{body}\n\n", TITLES[(section - 1) % TITLES.len()]));
            } else {
                text.push_str(&format!("{id}: {body}\n\n"));
            }
        }
        docs.push((format!("part-{}", (b'a' + d as u8) as char), text));
    }
    docs
}

pub fn synthetic_corpus(seed: u64) -> Corpus {
    load_corpus(synthetic_documents(seed)).expect("synthetic corpus parses")
}
