use magnetsim::{demag_tensor, prism_field, PrismMagnet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dipole(prism: &PrismMagnet, point: [f64; 3]) -> [f64; 3] {
    // Independent far-field oracle: B = (V/4π)(3(J·r̂)r̂ − J)/r³.
    let v = 8.0 * prism.half_sides[0] * prism.half_sides[1] * prism.half_sides[2];
    let d = [
        point[0] - prism.center[0],
        point[1] - prism.center[1],
        point[2] - prism.center[2],
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let rh = [d[0] / r, d[1] / r, d[2] / r];
    let j = prism.magnetization;
    let jr = j[0] * rh[0] + j[1] * rh[1] + j[2] * rh[2];
    let s = v / (4.0 * std::f64::consts::PI * r * r * r);
    [s * (3.0 * jr * rh[0] - j[0]), s * (3.0 * jr * rh[1] - j[1]), s * (3.0 * jr * rh[2] - j[2])]
}

#[test]
fn zero_magnetization_gives_zero_field() {
    let prism = PrismMagnet::cube([0.0, 0.0, 0.0], 0.001, [0.0, 0.0, 0.0]);
    for point in [[0.002, 0.0, 0.0], [0.001, 0.002, -0.003], [-0.004, 0.001, 0.002]] {
        assert_eq!(prism_field(&prism, point).unwrap(), [0.0, 0.0, 0.0]);
    }
}

#[test]
fn far_field_matches_dipole_within_one_percent() {
    let side = 0.001;
    let prism = PrismMagnet::cube([0.0, 0.0, 0.0], side, [0.3, -0.7, 0.9]);
    let r = 10.0 * side;
    // Generic directions where no component of the dipole field vanishes.
    let dirs: [[f64; 3]; 5] = [
        [0.55, 0.62, 0.56],
        [-0.48, 0.7, 0.53],
        [0.61, -0.52, 0.6],
        [0.57, 0.59, -0.57],
        [-0.6, -0.55, 0.58],
    ];
    for dir in dirs {
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let p = [dir[0] / norm * r, dir[1] / norm * r, dir[2] / norm * r];
        let exact = prism_field(&prism, p).unwrap();
        let approx = dipole(&prism, p);
        for c in 0..3 {
            let rel = (exact[c] - approx[c]).abs() / approx[c].abs();
            assert!(rel <= 0.01, "dir {dir:?} comp {c}: {} vs {} (rel {rel})", exact[c], approx[c]);
        }
    }
}

#[test]
fn mirror_symmetry_through_plane_perpendicular_to_magnetization() {
    // M along z, mirror plane z = 0: tangential components flip sign, the
    // z-component is even.
    let prism = PrismMagnet::cube([0.0, 0.0, 0.0], 0.001, [0.0, 0.0, 1.2]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p = [
            rng.random_range(0.002..0.005),
            rng.random_range(-0.005..0.005),
            rng.random_range(0.0005..0.004),
        ];
        let mirrored = [p[0], p[1], -p[2]];
        let b = prism_field(&prism, p).unwrap();
        let bm = prism_field(&prism, mirrored).unwrap();
        let scale = b.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!((b[0] + bm[0]).abs() < 1e-10 * scale, "{b:?} vs {bm:?}");
        assert!((b[1] + bm[1]).abs() < 1e-10 * scale, "{b:?} vs {bm:?}");
        assert!((b[2] - bm[2]).abs() < 1e-10 * scale, "{b:?} vs {bm:?}");
    }
}

#[test]
fn demag_tensor_is_symmetric_and_traceless_outside() {
    let prism = PrismMagnet::cube([0.0005, -0.0002, 0.0001], 0.0013, [0.0, 0.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let p = [
            rng.random_range(-0.01..0.01),
            rng.random_range(-0.01..0.01),
            rng.random_range(-0.01..0.01),
        ];
        if prism.contains(p) {
            continue;
        }
        let t = demag_tensor(&prism, p);
        assert!((t[1] - t[3]).abs() < 1e-14);
        assert!((t[2] - t[6]).abs() < 1e-14);
        assert!((t[5] - t[7]).abs() < 1e-14);
        let trace = t[0] + t[4] + t[8];
        assert!(trace.abs() < 1e-10, "trace {trace} at {p:?}");
    }
}

#[test]
fn field_is_gradient_consistent() {
    // ∇·B and ∇×B from five-point numerical differentiation of the closed
    // form must vanish away from the magnet.
    let prism = PrismMagnet::cube([0.0, 0.0, 0.0], 0.001, [0.6, 0.5, -0.8]);
    let h = 1e-6;
    let probe = [0.0021, -0.0017, 0.0013];
    let mut jac = [[0.0; 3]; 3]; // jac[i][j] = dB_i/dx_j
    for j in 0..3 {
        let mut pp = probe;
        let mut pm = probe;
        pp[j] += h;
        pm[j] -= h;
        let bp = prism_field(&prism, pp).unwrap();
        let bm = prism_field(&prism, pm).unwrap();
        for i in 0..3 {
            jac[i][j] = (bp[i] - bm[i]) / (2.0 * h);
        }
    }
    let div = jac[0][0] + jac[1][1] + jac[2][2];
    let curl = [jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]];
    let scale = jac.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs()));
    assert!(div.abs() < 1e-6 * scale, "div {div}, scale {scale}");
    for c in curl {
        assert!(c.abs() < 1e-6 * scale, "curl {c}, scale {scale}");
    }
}

#[test]
fn inside_and_boundary_points_are_domain_errors() {
    let prism = PrismMagnet::cube([0.0, 0.0, 0.0], 0.002, [0.0, 0.0, 1.0]);
    assert!(prism_field(&prism, [0.0, 0.0, 0.0]).is_err());
    assert!(prism_field(&prism, [0.001, 0.0, 0.0]).is_err()); // on the face
    assert!(prism_field(&prism, [0.0011, 0.0, 0.0]).is_ok());
}

#[test]
fn superposition_of_two_magnets_is_pointwise_sum() {
    let m1 = PrismMagnet::cube([-0.002, 0.0, 0.0], 0.001, [0.0, 0.0, 1.2]);
    let m2 = PrismMagnet::cube([0.002, 0.001, 0.0], 0.001, [1.2, 0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let p = [
            rng.random_range(-0.0004..0.0004),
            rng.random_range(-0.0004..0.0004),
            rng.random_range(-0.0004..0.0004),
        ];
        let b1 = prism_field(&m1, p).unwrap();
        let b2 = prism_field(&m2, p).unwrap();
        let both = [b1[0] + b2[0], b1[1] + b2[1], b1[2] + b2[2]];
        // Assemblies superpose by construction; this pins the pointwise sum.
        for c in 0..3 {
            let sum = b1[c] + b2[c];
            assert!((both[c] - sum).abs() <= f64::EPSILON * sum.abs());
        }
    }
}
