use roblab_core::config::LabConfig;
use roblab_core::plugin::{BudgetPolicy, PluginHost, Workspace};
use roblab_core::session::{Mode, Session};
use roblab_core::SimTime;

/// Fraction of touched cells whose binarized value matches the truth.
fn agreement(s: &Session) -> f64 {
    let grid = s.grid();
    let truth = s.hidden_world().rasterize();
    let prior = grid.prior_log_odds();
    let (mut covered, mut agree) = (0usize, 0usize);
    for (i, &l) in grid.cells().iter().enumerate() {
        if l != prior {
            covered += 1;
            agree += usize::from((l > 0.0) == truth[i]);
        }
    }
    assert!(covered > 10_000, "sweep covered only {covered} cells");
    agree as f64 / covered as f64
}

fn sweep(seed: u64) -> Session {
    let root = tempfile::tempdir().unwrap();
    let ws = Workspace::open(root.path(), "example", "example").unwrap();
    let cfg = LabConfig { seed: Some(seed), ..Default::default() };
    let mut s = Session::new("example", cfg).unwrap();
    s.load_plugin(&ws).unwrap();
    s.set_mode(Mode::Automatic).unwrap();
    s.advance(SimTime::from_millis(300_000));
    s
}

#[test]
fn example_sweep_maps_seeded_worlds() {
    for seed in 1..=4 {
        let s = sweep(seed);
        let a = agreement(&s);
        assert!(a >= 0.9, "seed {seed}: agreement {a}");
        assert_eq!(s.mode(), Mode::Automatic);
    }
}

#[test]
fn example_controller_needs_no_artifact() {
    let root = tempfile::tempdir().unwrap();
    let ws = Workspace::open(root.path(), "example", "example").unwrap();
    assert!(!ws.has_artifact());
    let host = PluginHost::launch(&ws, BudgetPolicy::default()).unwrap();
    assert_eq!(host.label(), "example");
}
