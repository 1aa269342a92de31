use proptest::prelude::*;
use thzsim::raytracer::{trace, RoomGeometry, Surface};

fn room(tx: [f64; 3], rx: [f64; 3], surfaces: Vec<Surface>, order: usize) -> RoomGeometry {
    RoomGeometry {
        length: 10.15,
        width: 7.9,
        height: 5.8,
        tx_pos: tx,
        rx_pos: rx,
        active_surfaces: surfaces,
        max_reflection_order: order,
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unfolded-lattice images of `tx` in a closed box: per axis the image
/// coordinate is `2aL + x` (2|a| bounces) or `2aL - x` (|2a - 1| bounces).
fn lattice_lengths(g: &RoomGeometry, order_max: usize) -> Vec<f64> {
    let dims = [g.length, g.width, g.height];
    let r = order_max as i64;
    let mut per_axis: Vec<Vec<(f64, usize)>> = Vec::new();
    for k in 0..3 {
        let mut v = Vec::new();
        for a in -r..=r + 1 {
            let c = 2.0 * a as f64 * dims[k];
            v.push((c + g.tx_pos[k], (2 * a).unsigned_abs() as usize));
            v.push((c - g.tx_pos[k], (2 * a - 1).unsigned_abs() as usize));
        }
        per_axis.push(v);
    }
    let mut out = Vec::new();
    for &(x, nx) in &per_axis[0] {
        for &(y, ny) in &per_axis[1] {
            for &(z, nz) in &per_axis[2] {
                if nx + ny + nz <= order_max {
                    out.push(dist([x, y, z], g.rx_pos));
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn closed_box_matches_image_lattice() {
    let g = room([1.3, 2.1, 1.7], [7.2, 5.4, 1.1], Surface::ALL.to_vec(), 3);
    let mut traced: Vec<f64> = trace(&g, 3).unwrap().iter().map(|p| p.length).collect();
    traced.sort_by(f64::total_cmp);
    let lattice = lattice_lengths(&g, 3);
    assert_eq!(traced.len(), lattice.len());
    for (a, b) in traced.iter().zip(&lattice) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn reflection_points_lie_on_their_faces_and_obey_specular_law() {
    let g = room([0.6, 0.6, 1.2], [5.0, 4.0, 1.2], Surface::ALL.to_vec(), 3);
    let dims = [g.length, g.width, g.height];
    for p in trace(&g, 3).unwrap() {
        let mut chain = vec![g.tx_pos];
        chain.extend(p.points.iter().copied());
        chain.push(g.rx_pos);
        let total: f64 = chain.windows(2).map(|w| dist(w[0], w[1])).sum();
        assert!((total - p.length).abs() < 1e-9);
        for (k, s) in p.surfaces_hit.iter().enumerate() {
            let q = p.points[k];
            let axis = s.axis();
            assert!((q[axis] - s.offset(dims)).abs() < 1e-12);
            for j in 0..3 {
                assert!(q[j] >= -1e-9 && q[j] <= dims[j] + 1e-9);
            }
            // incoming and outgoing directions differ only in the normal component
            let (a, b) = (chain[k], chain[k + 2]);
            let din: Vec<f64> = (0..3).map(|j| (q[j] - a[j]) / dist(q, a)).collect();
            let dout: Vec<f64> = (0..3).map(|j| (b[j] - q[j]) / dist(b, q)).collect();
            for j in 0..3 {
                let expect = if j == axis { -din[j] } else { din[j] };
                assert!((dout[j] - expect).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn surface_subset_and_order_zero() {
    let g = room([1.0, 1.0, 1.0], [4.0, 3.0, 1.0], vec![], 3);
    let paths = trace(&g, 3).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(paths[0].reflection_order, 0);
    let g = room([1.0, 1.0, 1.0], [4.0, 3.0, 1.0], Surface::WALLS.to_vec(), 0);
    assert_eq!(trace(&g, 0).unwrap().len(), 1);
}

proptest! {
    #[test]
    fn first_order_paths_match_closed_form_mirror(
        tx in prop::array::uniform3(0.05f64..0.95),
        rx in prop::array::uniform3(0.05f64..0.95),
    ) {
        let dims = [10.15, 7.9, 5.8];
        let tx = [tx[0] * dims[0], tx[1] * dims[1], tx[2] * dims[2]];
        let rx = [rx[0] * dims[0], rx[1] * dims[1], rx[2] * dims[2]];
        prop_assume!(dist(tx, rx) > 0.1);
        let g = room(tx, rx, Surface::ALL.to_vec(), 1);
        let paths = trace(&g, 1).unwrap();
        // a convex box always yields one first-order path per face
        prop_assert_eq!(paths.iter().filter(|p| p.reflection_order == 1).count(), 6);
        for p in paths.iter().filter(|p| p.reflection_order == 1) {
            let s = p.surfaces_hit[0];
            let axis = s.axis();
            let plane = s.offset(dims);
            let mut img = tx;
            img[axis] = 2.0 * plane - tx[axis];
            prop_assert!((p.length - dist(img, rx)).abs() < 1e-9);
            let t = (plane - rx[axis]) / (img[axis] - rx[axis]);
            for j in 0..3 {
                let q = rx[j] + t * (img[j] - rx[j]);
                prop_assert!((p.points[0][j] - q).abs() < 1e-9);
            }
        }
    }
}
