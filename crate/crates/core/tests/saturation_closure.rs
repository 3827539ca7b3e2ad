use std::collections::BTreeSet;
use std::sync::Arc;

use euler_ac::saturation::{run_saturation, GeneratorPreset, Subspace, DEFAULT_TOL};
use euler_ac::{DomainSpec, Field, Mode, Parity, SpectralBasis};

fn torus(n: usize) -> Arc<SpectralBasis> {
    SpectralBasis::enumerate(DomainSpec::standard_torus(), n).unwrap()
}

fn canon(k: [i32; 2]) -> [i32; 2] {
    if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
        [-k[0], -k[1]]
    } else {
        k
    }
}

/// Level dimensions predicted from wavevector interactions alone, with
/// both parities of every reached wavevector.
fn oracle(generators: &[[i32; 2]], cutoff: i32, depth: usize) -> Vec<usize> {
    let s0: BTreeSet<_> = generators.iter().map(|&k| canon(k)).collect();
    let mut cur = s0.clone();
    let mut dims = vec![2 * cur.len()];
    for _ in 0..depth {
        let mut next = cur.clone();
        for k in &s0 {
            for l in &cur {
                let cross = k[0] * l[1] - k[1] * l[0];
                if cross == 0 || k[0] * k[0] + k[1] * k[1] == l[0] * l[0] + l[1] * l[1] {
                    continue;
                }
                for t in [[k[0] + l[0], k[1] + l[1]], [k[0] - l[0], k[1] - l[1]]] {
                    if t != [0, 0] && t[0].abs() <= cutoff && t[1].abs() <= cutoff {
                        next.insert(canon(t));
                    }
                }
            }
        }
        if next.len() == cur.len() {
            break;
        }
        dims.push(2 * next.len());
        cur = next;
    }
    dims
}

#[test]
fn presets_follow_the_wavevector_closure() {
    let cases: [(GeneratorPreset, &[[i32; 2]]); 2] = [
        (GeneratorPreset::Torus8, &[[1, 0], [0, 1], [1, 1], [1, -1]]),
        (GeneratorPreset::TorusShells, &[[1, 1], [2, 1], [1, 2]]),
    ];
    for n in 2..=5 {
        let b = torus(n);
        for (preset, ks) in &cases {
            let run = run_saturation(&preset.generators(&b).unwrap(), 12).unwrap();
            assert_eq!(run.level_dims, oracle(ks, n as i32, 12), "{preset:?} at cutoff {n}");
        }
    }
}

#[test]
fn levels_are_nested_and_report_matches() {
    let b = torus(4);
    let run = run_saturation(&GeneratorPreset::TorusShells.generators(&b).unwrap(), 6).unwrap();
    assert!(run.level_dims.windows(2).all(|w| w[0] < w[1]));
    for (j, level) in run.report.levels.iter().enumerate() {
        assert_eq!(level.dim, run.level_dims[j]);
        let sub = run.level(j);
        assert_eq!(sub.dim(), level.dim);
        // every level's span contains the previous one
        if j > 0 {
            for f in run.level(j - 1).frame_fields() {
                assert!(sub.residual_norm(&f) < 1e-10);
            }
        }
    }
}

#[test]
fn single_eigenfield_never_grows() {
    let b = torus(4);
    let g = Field::from_mode(&b, &Mode::torus(2, 1, Parity::Sin), 1.0).unwrap();
    let run = run_saturation(&Subspace::from_generators(&[g], DEFAULT_TOL).unwrap(), 5).unwrap();
    assert!(run.report.stalled);
    assert_eq!(run.level_dims, vec![1]);
}

#[test]
fn same_shell_pair_is_inert() {
    // Sin(2,1) and Cos(1,2) share |k|² = 5, so their brackets vanish
    let b = torus(4);
    let g = [
        Field::from_mode(&b, &Mode::torus(2, 1, Parity::Sin), 1.0).unwrap(),
        Field::from_mode(&b, &Mode::torus(1, 2, Parity::Cos), 1.0).unwrap(),
    ];
    let run = run_saturation(&Subspace::from_generators(&g, DEFAULT_TOL).unwrap(), 5).unwrap();
    assert!(run.report.stalled);
    assert_eq!(run.terminal_level(), 0);
}
