//! Mission parsing and tour geometry against hand-computed oracles.

mod common;

use proptest::prelude::*;
use swarmsim::mission::{parse_mission, parse_mission_file, Coord3, Mission, MissionError};

fn dist(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2) + (a.2 - b.2).powi(2)).sqrt()
}

/// Walks the polyline to arc length `s`.
fn walk(points: &[(f64, f64, f64)], s: f64) -> (f64, f64, f64) {
    let mut left = s;
    for w in points.windows(2) {
        let d = dist(w[0], w[1]);
        if left <= d && d > 0.0 {
            let t = left / d;
            return (w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1), w[0].2 + t * (w[1].2 - w[0].2));
        }
        left -= d;
    }
    *points.last().unwrap()
}

fn points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1000.0..1000.0f64, -1000.0..1000.0f64, 0.0..200.0f64), 2..8)
}

fn mission(pts: &[(f64, f64, f64)]) -> Mission {
    let coords: Vec<Coord3> = pts.iter().map(|&(x, y, z)| Coord3::new(x, y, z)).collect();
    Mission::from_points(&coords).unwrap()
}

proptest! {
    #[test]
    fn tour_length_is_sum_of_segments(pts in points()) {
        let expected: f64 = pts.windows(2).map(|w| dist(w[0], w[1])).sum();
        let m = mission(&pts);
        prop_assert!((m.tour_length() - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn point_at_fraction_walks_the_tour(pts in points(), f in 0.0..=1.0f64) {
        let m = mission(&pts);
        let got = m.point_at_fraction(f).position;
        let want = walk(&pts, f * m.tour_length());
        prop_assert!(dist((got.x, got.y, got.z), want) <= 1e-6, "{:?} vs {:?}", got, want);
    }

    #[test]
    fn serialize_then_parse_is_identity(pts in points()) {
        let m = mission(&pts);
        let back = parse_mission(&m.serialize()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.serialize(), m.serialize());
    }
}

#[test]
fn fixture_geometry() {
    let m = parse_mission_file(&common::fixtures().join("bend.waypoints")).unwrap();
    assert_eq!(m.tour_len(), 4);
    assert!((m.tour_length() - 550.0).abs() < 1e-9);
    let p = m.point_at_fraction(0.5).position;
    assert!((p.x - 200.0).abs() < 1e-9 && (p.y - 75.0).abs() < 1e-9);
}

#[test]
fn bad_header_is_line_one() {
    let err = parse_mission("waypoints v1\n0\t1\t0\t16\t0\t0\t0\t0\t0\t0\t0\t1\n").unwrap_err();
    assert_eq!(err, MissionError::BadHeader);
    assert!(err.to_string().starts_with("line 1:"));
}

#[test]
fn unsupported_command_names_its_line() {
    let text = "QGC WPL 110\n0\t1\t1\t16\t0\t0\t0\t0\t0\t0\t0\t1\n1\t0\t1\t21\t0\t0\t0\t0\t0\t0\t0\t1\n";
    assert_eq!(parse_mission(text).unwrap_err(), MissionError::UnsupportedCommand { line: 3, code: 21 });
}
