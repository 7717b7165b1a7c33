use meshft_web::{MaxwellRun, MeshView, WaveSim};

#[test]
fn structured_wave_conserves_energy_and_momentum() {
    let mut sim = WaveSim::build("delaunay:300,1", "structured", 1, 0, 0).unwrap();
    assert!(sim.advance(200));
    assert!((sim.time() - 0.4).abs() < 1e-12);
    assert!(sim.energy_drift() < 1e-3, "drift {}", sim.energy_drift());
    assert!(sim.momentum_change() < 1e-12);
}

#[test]
fn field_and_positions_cover_every_node() {
    let sim = WaveSim::build("grid:8,8", "structured", 1, 1, 0).unwrap();
    let (f, xy) = (sim.field(), sim.positions());
    assert_eq!(f.len(), 64);
    assert_eq!(xy.len(), 128);
    for (q, p) in f.iter().zip(xy.chunks(2)) {
        let exact = (2.0 * std::f64::consts::PI * (p[0] + p[1])).sin();
        assert!((q - exact).abs() < 1e-12, "{q} vs {exact}");
    }
}

#[test]
fn no_orientation_breaks_momentum() {
    let mut sim = WaveSim::build("delaunay:300,1", "no_orientation", 1, 0, 0).unwrap();
    sim.advance(50);
    assert!(sim.momentum_change() > 1e-6, "momentum {}", sim.momentum_change());
}

#[test]
fn scrambled_keeps_momentum() {
    let mut sim = WaveSim::build("delaunay:300,1", "scrambled_topology", 1, 0, 3).unwrap();
    sim.advance(50);
    assert!(sim.momentum_change() < 1e-10);
}

#[test]
fn indefinite_metric_blows_up() {
    let mut sim = WaveSim::build("delaunay:300,1", "indefinite_metric", 1, 0, 3).unwrap();
    let finite = sim.advance(2000);
    assert!(!finite || sim.energy_drift() > 1.0);
}

#[test]
fn trained_variants_and_bad_input_are_rejected() {
    assert!(WaveSim::build("grid:8,8", "learned_J_psd", 1, 0, 0).err().unwrap().contains("trained"));
    assert!(WaveSim::build("grid:8,8", "nonsense", 1, 0, 0).is_err());
    assert!(WaveSim::build("grid:8,8", "structured", 0, 0, 0).is_err());
}

#[test]
fn maxwell_signed_charge_stays_at_roundoff() {
    let run = MaxwellRun::build(12, 100, 1.5, 4).unwrap();
    let (signed, unsigned, energy) = (run.signed_charge(), run.unsigned_charge(), run.energy());
    assert_eq!(signed.len(), 101);
    assert_eq!(energy[0], 1.0);
    assert!(signed.iter().all(|&c| c <= 1e-12));
    assert!(unsigned.iter().cloned().fold(0.0, f64::max) > 1e-3);
    assert!(run.dt() > 0.0);
    assert!(MaxwellRun::build(12, 10, 0.5, 4).is_err());
}

#[test]
fn mesh_view_counts_and_segments() {
    let grid = MeshView::build("grid:4,3").unwrap();
    assert_eq!((grid.n_nodes(), grid.n_edges(), grid.n_faces()), (12, 24, 12));
    assert_eq!(grid.segments().len(), 4 * 24);
    assert_eq!(grid.weights().len(), 24);
    let del = MeshView::build("delaunay:40,2").unwrap();
    assert_eq!(del.n_nodes() + del.n_faces(), del.n_edges());
    for s in del.segments().chunks(4) {
        assert!(((s[2] - s[0]).powi(2) + (s[3] - s[1]).powi(2)).sqrt() < 0.5);
    }
    assert!(MeshView::build("hex:2").is_err());
}
