use everett::histories::{
    branch_vector, check_space, decoherence_functional, superposition_identity_check, sum_rule_violation, Partition,
};
use everett::hilbert::ProjectorFamily;
use everett::quasiclassical::{
    slit_history, two_slit_space, Slit, SlitTimes, TwoSlitGeometry, SLIT_MINUS, SLIT_PLUS,
};

fn normalized_cross_term(space: &everett::histories::HistorySpace) -> f64 {
    let d = decoherence_functional(space).unwrap();
    let name = |s| slit_history(s).join(",");
    let (p, m) = (name(Slit::Plus), name(Slit::Minus));
    let pm = d.get(&p, &m).unwrap();
    let pp = d.get(&p, &p).unwrap().re;
    let mm = d.get(&m, &m).unwrap().re;
    pm.norm() / (pp * mm).sqrt()
}

fn both_slits(space: &everett::histories::HistorySpace) -> Partition {
    Partition::merging(space, 1, "both", &[SLIT_PLUS, SLIT_MINUS])
}

#[test]
fn open_slits_interfere_on_the_screen() {
    let space = two_slit_space(&TwoSlitGeometry::default(), &SlitTimes::default()).unwrap();
    let violation = sum_rule_violation(&space, &both_slits(&space)).unwrap();
    let cross = normalized_cross_term(&space);
    assert!(violation > 0.01);
    assert!(cross > 0.05);
    assert!(!check_space(&space, 1e-8).unwrap().passed);
    assert!(superposition_identity_check(&space).unwrap() < 1e-9);
    let d = decoherence_functional(&space).unwrap();
    assert!((d.trace() - 1.0).abs() < 1e-10);
    assert!(d.hermiticity_defect() < 1e-12);
}

#[test]
fn a_which_path_record_removes_the_interference() {
    let g = TwoSlitGeometry {
        which_path: true,
        ..Default::default()
    };
    let space = two_slit_space(&g, &SlitTimes::default()).unwrap();
    let cross = normalized_cross_term(&space);
    assert!(cross < 1e-8);
    assert!(superposition_identity_check(&space).unwrap() < 1e-9);
}

#[test]
fn masking_one_slit_gives_a_consistent_space() {
    for blocked in [Slit::Minus, Slit::Plus] {
        let g = TwoSlitGeometry {
            blocked: Some(blocked),
            ..Default::default()
        };
        let space = two_slit_space(&g, &SlitTimes::default()).unwrap();
        let report = check_space(&space, 1e-8).unwrap();
        let h = space.history(&slit_history(blocked)).unwrap();
        let w = branch_vector(&space, &h).unwrap().weight;
        assert!(report.passed);
        assert!(w < 1e-12);
        assert!(sum_rule_violation(&space, &both_slits(&space)).unwrap() < 1e-8);
    }
}

#[test]
fn paths_that_land_apart_do_not_interfere() {
    let g = TwoSlitGeometry {
        separation: 4.0,
        screen_half_width: 8.0,
        ..Default::default()
    };
    let space = two_slit_space(&g, &SlitTimes::default()).unwrap();
    let d = decoherence_functional(&space).unwrap();
    let name = |s| slit_history(s).join(",");
    let cross = d.get(&name(Slit::Plus), &name(Slit::Minus)).unwrap().norm();
    assert!(cross < 1e-6);
    assert!(d.get(&name(Slit::Plus), &name(Slit::Plus)).unwrap().re > 0.1);
}

#[test]
fn screen_marginal_matches_a_single_final_projection() {
    let space = two_slit_space(&TwoSlitGeometry::default(), &SlitTimes::default()).unwrap();
    let dim = space.dim();
    let mut fams = space.families().to_vec();
    fams[0] = ProjectorFamily::trivial(dim);
    fams[1] = ProjectorFamily::trivial(dim);
    let marginal = space.with_families(fams).unwrap();
    let d = decoherence_functional(&marginal).unwrap();
    let t3 = SlitTimes::default().screen;
    let at_screen = space.dynamics().propagate(space.initial(), 0.0, t3).unwrap();
    let screen = &space.families()[2];
    for c in 0..screen.len() {
        let direct = screen.projector(c).apply(&at_screen).unwrap().norm_sqr();
        let name = screen.label(c).name.clone();
        let i = d.labels().iter().position(|l| l.ends_with(&format!(",{name}"))).unwrap();
        assert!((d.entry(i, i).re - direct).abs() < 1e-8);
    }
}

