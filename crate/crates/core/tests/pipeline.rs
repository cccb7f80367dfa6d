//! Configuration to files and back.

use std::f64::consts::PI;
use std::fs;

use hyperghost::config::RunConfig;
use hyperghost::experiments::analysis::peak_positions;
use hyperghost::experiments::{ghost_image_map_with, ghost_interference_map};
use hyperghost::io::{load_map, load_pattern, parse_pgm, save_map, MapFormat};
use hyperghost::optics::ImagingSystem;

#[test]
fn interference_graymap_shows_fringes() {
    let cfg = RunConfig::default();
    let g = cfg.interference_grid().unwrap();
    let map = ghost_interference_map(
        &cfg.interference_source().unwrap(),
        &cfg.slit().unwrap(),
        &g,
        cfg.exec,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fringes.pgm");
    save_map(&map, &path, MapFormat::Graymap).unwrap();
    let (w, h, maxval, px) = parse_pgm(&path, &fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((w, h, maxval), (512, 128, 255));
    let row: Vec<f64> = px[(h / 2) * w..(h / 2 + 1) * w]
        .iter()
        .map(|&v| v as f64)
        .collect();
    let xs = g.xs();
    // gray levels are quantised, so count maxima on a lightly smoothed row
    let smooth: Vec<f64> = (0..w)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(w);
            row[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let peaks: Vec<f64> = peak_positions(&smooth, &xs)
        .into_iter()
        .filter(|x| x.abs() <= 2e-3)
        .collect();
    assert!(peaks.len() >= 3, "{peaks:?}");
}

#[test]
fn image_map_survives_a_file_round_trip() {
    let text = "pattern.n = 24\npattern.pitch = 80e-6\nimage.nx = 20\nimage.ny = 20\nlens.aperture_radius = 10e-3\n";
    let cfg = RunConfig::parse(text, "inline").unwrap();
    let params = cfg.imaging_source().unwrap();
    let lens = cfg.lens().unwrap();
    let pattern = cfg.pattern().unwrap();
    let grid = cfg.image_grid(&params, &lens, &pattern).unwrap();
    let (d1, d2) = cfg.polarizers().unwrap();
    let sys = ImagingSystem::new(&params, &lens, &cfg.lens_quad()).unwrap();
    let map = ghost_image_map_with(&sys, &pattern, d1, d2, &grid, cfg.exec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("image.txt");
    save_map(&map, &path, MapFormat::MatrixText).unwrap();
    let back = load_map(&path).unwrap();
    assert_eq!(back.nx, map.nx);
    for (a, b) in back.values.iter().zip(&map.values) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert_eq!(back.meta.polarizers, map.meta.polarizers);
    assert_eq!(back.meta.raw_peak, map.meta.raw_peak);
}

#[test]
fn binary_graymap_becomes_two_region_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("halves.pgm");
    let (w, h) = (16, 8);
    let mut text = format!("P2\n# left half lighter\n{w} {h}\n255\n");
    for _ in 0..h {
        let row: Vec<&str> = (0..w)
            .map(|i| if i < w / 2 { "255" } else { "0" })
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    let pat = load_pattern(&path, PI, 50e-6).unwrap();
    let mut levels: Vec<f64> = pat.phase.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    assert_eq!(levels, vec![0.0, PI]);
    assert!(pat
        .xs()
        .iter()
        .zip(&pat.phase)
        .all(|(x, &p)| (p == PI) == (*x < 0.0)));
    assert!((pat.center().0).abs() < 1e-15);
}
