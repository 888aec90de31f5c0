use holoq::geophase::wilson_loop;
use holoq::models::{circle_path, synthetic_degenerate_model};
use holoq::path::{sample_family, track_blocks, SmoothBlockTrack};
use holoq::spectral::default_cluster_tol;
use num_complex::Complex64 as C64;

#[test]
fn dbg_g2() {
    let model = synthetic_degenerate_model(2).unwrap();
    for n in [128usize, 512, 2048] {
        let path = circle_path(n).unwrap();
        let samples = sample_family(&path, &model).unwrap();
        let tol = default_cluster_tol(&samples[0]);
        let tracks = track_blocks(&samples, tol).unwrap();
        let lam = model.cluster_eigenvalue();
        let cluster: Vec<&SmoothBlockTrack> = tracks
            .iter()
            .filter(|t| (t.eigenvalue(0) - lam).norm() < 1e-6)
            .collect();
        println!("n={n} cluster size {}", cluster.len());
        let hol = wilson_loop(&cluster).unwrap();
        println!("  eigs {:?}", hol.eigenvalues);
        println!("  wilson {:.4}", hol.wilson);
    }
    let oracle = model.wilson_oracle(20000);
    println!("oracle {:.4}", oracle);
    // also integrate the CONNECTION the numerics sees: A(s) from connection_matrix
    let path = circle_path(2048).unwrap();
    let samples = sample_family(&path, &model).unwrap();
    let tol = default_cluster_tol(&samples[0]);
    let tracks = track_blocks(&samples, tol).unwrap();
    let lam = model.cluster_eigenvalue();
    let cluster: Vec<&SmoothBlockTrack> = tracks
        .iter()
        .filter(|t| (t.eigenvalue(0) - lam).norm() < 1e-6)
        .collect();
    for k in [10usize, 500] {
        let a = holoq::geophase::connection_matrix(&cluster, k, holoq::geophase::DiffScheme::Forward).unwrap();
        println!("A_num({k}) = {:.4}", a);
        let s = k as f64 / 2048.0;
        println!("A_frame({s}) = {:.4}", model.frame_connection(s));
    }
    let _ = C64::new(0.,0.);
}
