use fosls::mesh::{build_moving_domain_mesh, build_unit_cylinder_mesh, BoundaryTag, SpaceTimeMesh};
use proptest::prelude::*;

fn shape_ratio_stays_bounded(coarse: SpaceTimeMesh, refinements: usize) {
    let first = coarse.refine_uniform().unwrap();
    let base = first.min_shape_ratio();
    let mut m = first;
    for _ in 1..refinements {
        m = m.refine_uniform().unwrap();
    }
    let fine = m.min_shape_ratio();
    assert!(fine >= 0.5 * base, "{fine} < 0.5 × {base}");
}

#[test]
fn shape_regularity_in_one_space_dimension() {
    shape_ratio_stays_bounded(build_unit_cylinder_mesh(1, "control-init").unwrap(), 6);
    shape_ratio_stays_bounded(build_moving_domain_mesh(1).unwrap(), 6);
}

#[test]
fn shape_regularity_in_two_space_dimensions() {
    shape_ratio_stays_bounded(build_unit_cylinder_mesh(2, "control-init").unwrap(), 6);
    shape_ratio_stays_bounded(build_moving_domain_mesh(2).unwrap(), 6);
}

#[test]
fn boundary_tags_partition_the_boundary() {
    for m in [
        build_unit_cylinder_mesh(1, "control-init").unwrap().refine_uniform_times(3).unwrap(),
        build_moving_domain_mesh(1).unwrap().refine_uniform_times(3).unwrap(),
        build_unit_cylinder_mesh(2, "control-init").unwrap().refine_uniform_times(2).unwrap(),
        build_moving_domain_mesh(2).unwrap().refine_uniform_times(2).unwrap(),
    ] {
        let (i, l, f) = m.boundary_counts();
        assert_eq!(i + l + f, m.boundary_facets().len());
        for fc in m.boundary_facets() {
            let ts: Vec<f64> = fc.vertices.iter().map(|&v| m.vertex(v)[0]).collect();
            let at = |t: f64| ts.iter().all(|x| (x - t).abs() <= 1e-12);
            assert_eq!(fc.tag == BoundaryTag::Initial, at(0.0));
            assert_eq!(fc.tag == BoundaryTag::Final, at(m.end_time()));
        }
        assert!((m.boundary_measure(Some(BoundaryTag::Initial)) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn moving_meshes_never_straddle_the_kink() {
    for d in [1, 2] {
        let m = build_moving_domain_mesh(d).unwrap().refine_uniform_times(3).unwrap();
        for c in 0..m.n_cells() {
            let ts: Vec<f64> = m.cell(c).iter().map(|&v| m.vertex(v)[0]).collect();
            assert!(ts.iter().all(|t| *t <= 0.5 + 1e-12) || ts.iter().all(|t| *t >= 0.5 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refinement_conserves_volume_and_counts(d in 1usize..=2, moving in any::<bool>(), levels in 1usize..=3) {
        let levels = if d == 2 { levels.min(2) } else { levels };
        let m = if moving {
            build_moving_domain_mesh(d).unwrap()
        } else {
            build_unit_cylinder_mesh(d, "control-init").unwrap()
        };
        let fine = m.refine_uniform_times(levels).unwrap();
        prop_assert_eq!(fine.n_cells(), m.n_cells() << ((d + 1) * levels));
        prop_assert!((fine.total_volume() - m.total_volume()).abs() <= 1e-12 * m.total_volume());
        for c in 0..fine.n_cells() {
            prop_assert!(fine.cell_volume(c) > 0.0);
        }
        fine.check_conformity().unwrap();
    }
}
