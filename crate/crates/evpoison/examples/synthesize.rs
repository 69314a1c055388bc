//! Generate a synthetic event scene, validate it, and push it through both
//! codecs.
//!
//! ```bash
//! cargo run --example synthesize
//! ```

use evpoison::event::codec::{parse_bin, parse_csv, write_bin, write_csv};
use evpoison::event::{synthesize, SceneConfig, ShapeKind, ShapeSpec};
use evpoison::{SensorGeometry, TimeDomain};

fn main() {
    let scene = SceneConfig {
        geometry: SensorGeometry::new(32, 32),
        shapes: vec![ShapeSpec {
            kind: ShapeKind::Disk,
            size: 10,
            velocity: (1.0, 0.25),
            start: (12.0, 16.0),
        }],
        frames: 15,
        sigma: 0.4,
        noise_rate: 0.001,
        seed: 42,
    };
    let (stream, label) = synthesize(&scene).unwrap();
    println!(
        "synthesized a moving {:?} (class {label}): {} events on {}x{}",
        scene.shapes[0].kind,
        stream.len(),
        stream.geometry.width,
        stream.geometry.height
    );
    let positive = stream.events.iter().filter(|e| e.p > 0.0).count();
    println!(
        "polarity split: {positive} on / {} off",
        stream.len() - positive
    );
    assert!(stream.validate().is_empty(), "generator output is valid");

    // normalized [0,1] timestamps -> raw microseconds for the binary codec
    let raw = stream.denormalize_time((scene.frames - 1) * 1000).unwrap();
    let bytes = write_bin(&raw).unwrap();
    let decoded = parse_bin(&bytes, Some(raw.geometry)).unwrap();
    assert_eq!(decoded, raw);
    println!("binary codec: {} bytes, round-trip exact", bytes.len());

    let csv = write_csv(&stream);
    let back = parse_csv(&csv, Some(stream.geometry), TimeDomain::NormalizedUnit).unwrap();
    assert_eq!(back.events, stream.events);
    println!(
        "csv codec: {} lines, round-trip exact; first line: {}",
        csv.lines().count(),
        csv.lines().next().unwrap_or_default()
    );
}
