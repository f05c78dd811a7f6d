//! Writes the synthetic demo corpus as raw-post JSONL on stdout.
//!
//! cargo run -p epipulse-core --example demo_corpus -- [SEED] > posts.jsonl

use std::io::{self, BufWriter, Write};

use epipulse_core::jsonl::write_all;
use epipulse_core::ontology::default_ontology;
use epipulse_core::preprocess::timestamp;
use epipulse_core::synth::{demo_corpus, DemoShape};

fn main() -> io::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let start = timestamp::parse("2022-05-01T00:00:00Z").expect("valid timestamp");
    let posts = demo_corpus(&default_ontology(), DemoShape::default(), start, seed);
    let mut out = BufWriter::new(io::stdout().lock());
    write_all(&mut out, &posts)?;
    out.flush()
}
