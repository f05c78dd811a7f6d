//! Seeded synthetic corpora for tests, benchmarks and the demo pipeline.

use chrono::{DateTime, Duration, Utc};

use crate::ontology::OntologySpec;
use crate::preprocess::RawPost;
use crate::rng::SeededRng;

/// Everyday words with no epidemic meaning.
pub const NOISE_WORDS: &[&str] = &[
    "weather", "sunny", "rain", "morning", "coffee", "breakfast", "lunch", "dinner", "pizza", "burger", "salad",
    "football", "match", "goal", "team", "coach", "season", "league", "ticket", "concert", "music", "album", "song",
    "guitar", "movie", "series", "episode", "trailer", "actor", "phone", "laptop", "update", "battery", "screen",
    "camera", "photo", "video", "stream", "game", "level", "score", "player", "traffic", "train", "bus", "station",
    "airport", "flight", "holiday", "beach", "mountain", "river", "garden", "flowers", "tree", "dog", "cat", "puppy",
    "kitten", "birthday", "party", "cake", "gift", "friend", "family", "weekend", "monday", "friday", "office",
    "meeting", "deadline", "project", "email", "market", "stocks", "price", "budget", "shopping", "shoes", "jacket",
    "dress", "fashion", "book", "novel", "author", "library", "school", "exam", "homework", "teacher", "class",
    "paint", "art", "museum", "city", "street", "bridge", "park", "lake", "snow", "winter", "summer", "autumn",
    "spring", "sunset", "stars", "moon", "road", "car", "bike", "run", "marathon", "gym", "yoga", "recipe", "bread",
    "cheese", "wine", "tea", "juice", "chocolate", "cookies", "kitchen", "sofa", "window", "door", "neighbor", "news",
    "election", "vote", "debate", "podcast", "blog", "website", "app", "code", "robot", "space", "rocket", "planet",
    "ocean", "island", "boat", "fishing", "camping", "tent", "hiking", "trail", "view", "amazing", "great", "happy",
    "funny", "lovely", "awesome", "boring", "tired", "excited", "busy", "late", "early", "today", "tomorrow",
    "yesterday", "tonight", "really", "just", "finally", "again", "always", "never", "new", "old", "big", "small",
];

/// Words that make an epidemic-flavoured post fire keyword detectors.
pub const EVENT_PHRASES: &[&str] = &[
    "three new cases, two people infected at the clinic",
    "the virus is spreading fast across the county",
    "my symptoms started with a fever and a cough",
    "wear masks and get vaccinated to prevent infection",
    "the city announced a lockdown and new quarantine rules",
    "doctors say the new treatment helped him recover",
    "two more patients died in the hospital today",
    "officials confirm the outbreak spread to schools",
    "she tested positive after days of fever",
    "health guidelines now require isolation for contacts",
];

/// A post of `min_len..=max_len` random everyday words.
pub fn noise_text(rng: &mut SeededRng, min_len: usize, max_len: usize) -> String {
    let n = min_len + rng.below(max_len - min_len + 1);
    (0..n).map(|_| *rng.pick(NOISE_WORDS)).collect::<Vec<_>>().join(" ")
}

/// Signal and noise texts for filter calibration: every seed of `spec`
/// verbatim, followed by `noise_per_seed` noise texts per seed.
pub fn seed_noise_mixture(spec: &OntologySpec, noise_per_seed: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let signal: Vec<String> = spec
        .seed_sets()
        .iter()
        .flat_map(|s| s.seeds.iter().cloned())
        .collect();
    let mut rng = SeededRng::new(seed);
    let noise = (0..signal.len() * noise_per_seed)
        .map(|_| noise_text(&mut rng, 5, 20))
        .collect();
    (signal, noise)
}

/// Shape of [`demo_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct DemoShape {
    pub days: usize,
    pub posts_per_day: usize,
    /// Day on which the share of event posts jumps.
    pub outbreak_day: usize,
    /// Event posts per day before / from the outbreak day.
    pub event_posts_before: usize,
    pub event_posts_after: usize,
}

impl Default for DemoShape {
    fn default() -> Self {
        DemoShape {
            days: 60,
            posts_per_day: 12,
            outbreak_day: 42,
            event_posts_before: 1,
            event_posts_after: 8,
        }
    }
}

/// Raw posts spread over consecutive days from `start`, with a jump in
/// epidemic chatter on the outbreak day. Some posts carry handles, URLs,
/// hashtags, emoji or a non-English language tag.
pub fn demo_corpus(spec: &OntologySpec, shape: DemoShape, start: DateTime<Utc>, seed: u64) -> Vec<RawPost> {
    let mut rng = SeededRng::new(seed);
    let seeds: Vec<&str> = spec
        .seed_sets()
        .iter()
        .flat_map(|s| s.seeds.iter().map(String::as_str))
        .collect();
    let mut posts = Vec::with_capacity(shape.days * shape.posts_per_day);
    for day in 0..shape.days {
        let events = if day >= shape.outbreak_day {
            shape.event_posts_after
        } else {
            shape.event_posts_before
        };
        for i in 0..shape.posts_per_day {
            let mut text = if i < events {
                if rng.below(3) == 0 {
                    rng.pick(&seeds).to_string()
                } else {
                    rng.pick(EVENT_PHRASES).to_string()
                }
            } else {
                noise_text(&mut rng, 4, 14)
            };
            match rng.below(8) {
                0 => text = format!("@user{} {text}", rng.below(1000)),
                1 => text.push_str(" https://example.org/p/123"),
                2 => text.push_str(" #StayHome"),
                3 => text.push_str(" \u{1F637}"),
                _ => {}
            }
            let lang = if rng.below(20) == 0 { "es" } else { "en" };
            let secs = (rng.below(86_400)) as i64;
            posts.push(RawPost {
                id: format!("d{day:03}-{i:02}"),
                created_at: start + Duration::days(day as i64) + Duration::seconds(secs),
                text,
                lang: Some(lang.to_string()),
            });
        }
    }
    posts
}

const EMOJI: &[&str] = &[
    "\u{1F637}",
    "\u{1F602}",
    "\u{2764}\u{FE0F}",
    "\u{1F44D}\u{1F3FD}",
    "\u{1F469}\u{200D}\u{2695}\u{FE0F}",
    "\u{1F1FA}\u{1F1F8}",
    "1\u{FE0F}\u{20E3}",
    "\u{1F3F4}\u{E0067}\u{E0062}\u{E0073}\u{E0063}\u{E0074}\u{E007F}",
    "\u{2600}",
];

const ODD_WORDS: &[&str] = &[
    "café", "naïve", "Ñandú", "東京", "مرحبا", "Привет", "e\u{0301}te", "ß", "İstanbul", "ǅemal", "x²", "½",
    "...", "!!", "(", ")", "\"quoted\"", "it's", "—", "&amp;", "$5", "2022-05-23", "85,940", "#",
];

const WHITESPACE: &[&str] = &[" ", "  ", "\t", "\n", "\u{00A0}", "\u{3000}", " \r\n "];

fn alnum(rng: &mut SeededRng, min: usize, max: usize) -> String {
    let len = min + rng.below(max - min + 1);
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
    (0..len).map(|_| *rng.pick(CHARS) as char).collect()
}

fn digits(rng: &mut SeededRng, min: usize, max: usize) -> String {
    let len = min + rng.below(max - min + 1);
    (0..len).map(|_| char::from(b'0' + rng.below(10) as u8)).collect()
}

fn pii(rng: &mut SeededRng) -> String {
    match rng.below(9) {
        0 => format!("@{}", alnum(rng, 1, 12)),
        1 => format!("https://{}.com/{}", alnum(rng, 3, 8), alnum(rng, 0, 7)),
        2 => format!("HTTP://{}.org", alnum(rng, 4, 4)),
        3 => format!("www.{}.net/x?q={}", alnum(rng, 5, 5), alnum(rng, 3, 3)),
        4 => format!("{}.{}@{}.co.uk", alnum(rng, 4, 4), alnum(rng, 3, 3), alnum(rng, 6, 6).replace('_', "x")),
        5 => format!("+{} {}-{}-{}", 1 + rng.below(99), digits(rng, 3, 3), digits(rng, 3, 3), digits(rng, 4, 4)),
        6 => format!("({}) {} {}", digits(rng, 3, 3), digits(rng, 3, 3), digits(rng, 4, 4)),
        7 => format!("{}.{}.{}", digits(rng, 3, 3), digits(rng, 3, 3), digits(rng, 4, 4)),
        _ => format!("RT @{}:", alnum(rng, 6, 6)),
    }
}

fn hashtag(rng: &mut SeededRng) -> String {
    let parts = 1 + rng.below(3);
    let mut tag = String::from("#");
    for _ in 0..parts {
        match rng.below(4) {
            0 => tag.push_str(&digits(rng, 1, 4)),
            1 => tag.push('_'),
            _ => {
                let w = rng.pick(NOISE_WORDS);
                let mut cs = w.chars();
                if let Some(first) = cs.next() {
                    tag.extend(first.to_uppercase());
                    tag.push_str(cs.as_str());
                }
            }
        }
    }
    tag
}

/// A post mixing everyday words, handles, URLs, emails, phone numbers,
/// hashtags, emoji, odd Unicode and assorted whitespace. Returns the text
/// and the personal-information strings it contains. Personal-information
/// fragments are always whitespace-delimited; emoji may be glued to the
/// preceding fragment.
pub fn messy_text(rng: &mut SeededRng) -> (String, Vec<String>) {
    let mut text = String::new();
    let mut injected = Vec::new();
    if rng.below(6) == 0 {
        text.push_str("RT @");
        text.push_str(&alnum(rng, 5, 5));
        text.push_str(": ");
    }
    let fragments = rng.below(14);
    for i in 0..fragments {
        let kind = rng.below(10);
        if i > 0 && !(kind == 0 && rng.below(2) == 0) {
            text.push_str(rng.pick(WHITESPACE));
        }
        match kind {
            0 => text.push_str(rng.pick(EMOJI)),
            1 | 2 => {
                let p = pii(rng);
                injected.push(p.clone());
                text.push_str(&p);
            }
            3 => text.push_str(&hashtag(rng)),
            4 => text.push_str(rng.pick(ODD_WORDS)),
            5 => text.push_str(&random_unicode(rng, 4)),
            _ => text.push_str(rng.pick(NOISE_WORDS)),
        }
    }
    if rng.below(4) == 0 {
        text.push_str(rng.pick(WHITESPACE));
    }
    (text, injected)
}

/// Up to `max_len` characters drawn from ASCII, Latin-1, combining marks,
/// CJK, emoji, whitespace and a few format characters.
pub fn random_unicode(rng: &mut SeededRng, max_len: usize) -> String {
    const RANGES: &[(u32, u32)] = &[
        (0x20, 0x7E),
        (0xA0, 0xFF),
        (0x300, 0x36F),
        (0x400, 0x44F),
        (0x4E00, 0x4E40),
        (0x1F300, 0x1F64F),
        (0x2000, 0x200F),
        (0xFE0E, 0xFE0F),
        (0x9, 0xD),
    ];
    let len = rng.below(max_len + 1);
    (0..len)
        .filter_map(|_| {
            let (lo, hi) = *rng.pick(RANGES);
            char::from_u32(lo + rng.below((hi - lo + 1) as usize) as u32)
        })
        .collect()
}
