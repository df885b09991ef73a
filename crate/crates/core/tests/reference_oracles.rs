use eikograph::manifold::{sample_points, BoundarySpec, Density, ManifoldSpec};
use eikograph::reference::{local_solution_uniform, weighted_distance_oracle, DEFAULT_KNN};
use eikograph::solver::FieldSpec;

fn pole() -> BoundarySpec {
    BoundarySpec::PointSet { points: vec![vec![0.0, 0.0, 1.0]] }
}

#[test]
fn shortest_path_error_shrinks_with_resolution() {
    let s = ManifoldSpec::unit_sphere();
    let query = sample_points(&s, 200, Density::Uniform, 1).unwrap();
    let unit = FieldSpec::Constant { value: 1.0 };
    let mut errors = vec![];
    for n in [1_000usize, 10_000, 100_000] {
        let f = weighted_distance_oracle(&query, &pole(), &unit, n, 2, DEFAULT_KNN).unwrap();
        let worst = f
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - local_solution_uniform(&s, &pole(), query.point(i), 10.0).unwrap()).abs())
            .fold(0.0, f64::max);
        errors.push(worst);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    // kNN paths zig-zag, so the error plateaus at a few percent.
    assert!(errors[2] < 0.08, "{errors:?}");
}

#[test]
fn weighted_oracle_scales_with_potential() {
    let s = ManifoldSpec::unit_sphere();
    let query = sample_points(&s, 100, Density::Uniform, 4).unwrap();
    let one = weighted_distance_oracle(&query, &pole(), &FieldSpec::Constant { value: 1.0 }, 5_000, 5, 12).unwrap();
    let two = weighted_distance_oracle(&query, &pole(), &FieldSpec::Constant { value: 2.0 }, 5_000, 5, 12).unwrap();
    for (a, b) in one.values.iter().zip(&two.values) {
        assert_eq!(2.0 * a, *b);
    }
    // A potential rising toward the south pole makes southern points farther.
    let ramp = FieldSpec::CoordinateRamp { axis: 2, offset: 2.0, slope: -1.0 };
    let slow = weighted_distance_oracle(&query, &pole(), &ramp, 5_000, 5, 12).unwrap();
    for (i, (a, b)) in one.values.iter().zip(&slow.values).enumerate() {
        assert!(b >= a, "vertex {i}: {b} < {a}");
    }
}

#[test]
fn closed_form_is_lipschitz_in_time_and_space() {
    let s = ManifoldSpec::unit_sphere();
    let gamma = BoundarySpec::Cap { center: vec![0.0, 0.0, 1.0], radius: 0.3 };
    let cloud = sample_points(&s, 300, Density::Uniform, 11).unwrap();
    let times = [0.0, 0.25, 0.7, 1.3, 2.0, 3.5];
    for i in 0..cloud.len() {
        let x = cloud.point(i);
        for w in times.windows(2) {
            let a = local_solution_uniform(&s, &gamma, x, w[0]).unwrap();
            let b = local_solution_uniform(&s, &gamma, x, w[1]).unwrap();
            assert!((b - a).abs() <= w[1] - w[0] + 1e-12);
        }
        let y = cloud.point((i * 7 + 3) % cloud.len());
        let d = s.geodesic_unchecked(x, y);
        for t in times {
            let a = local_solution_uniform(&s, &gamma, x, t).unwrap();
            let b = local_solution_uniform(&s, &gamma, y, t).unwrap();
            assert!((b - a).abs() <= d + 1e-12);
        }
    }
}
