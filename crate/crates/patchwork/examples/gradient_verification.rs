//! The numerical verification surface in miniature: compare analytic
//! gradients of each training loss against central finite differences at
//! double precision.
//!
//!     cargo run --release --example gradient_verification

use ndarray::Array4;
use patchwork::generators::PatchCritic;
use patchwork::losses;
use patchwork::quantizer::vq_loss;
use patchwork::tensor::{Arr, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn finite_diff(f: &dyn Fn() -> f64, var: &Var, eps: f64) -> Arr {
    let base = var.value();
    let mut grad = Arr::zeros(base.raw_dim());
    for i in 0..base.len() {
        let mut p = base.clone();
        p.as_slice_mut().unwrap()[i] += eps;
        var.set_value(p);
        let fp = f();
        let mut m = base.clone();
        m.as_slice_mut().unwrap()[i] -= eps;
        var.set_value(m);
        let fm = f();
        grad.as_slice_mut().unwrap()[i] = (fp - fm) / (2.0 * eps);
    }
    var.set_value(base);
    grad
}

fn worst_rel_err(analytic: &Arr, numeric: &Arr) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rand4 = |rng: &mut ChaCha8Rng, s: (usize, usize, usize, usize)| -> Arr {
        Array4::from_shape_fn(s, |_| rng.gen_range(-0.9..0.9)).into_dyn()
    };

    let x0 = Var::constant(rand4(&mut rng, (1, 3, 8, 8)));
    let xhat = Var::leaf(rand4(&mut rng, (1, 3, 8, 8)));
    let ze = Var::leaf(rand4(&mut rng, (1, 6, 4, 4)));
    let zq = Var::leaf(rand4(&mut rng, (1, 6, 4, 4)));
    let loss = || vq_loss(&x0, &xhat, &ze, &zq, 0.25).unwrap();
    let grads = loss().backward();
    for (name, var) in [("xhat", &xhat), ("z_e", &ze), ("z_q", &zq)] {
        let err = worst_rel_err(
            grads.get(var).unwrap(),
            &finite_diff(&|| loss().item(), var, 1e-6),
        );
        println!("vq_loss d/d{name:<5} max rel err {err:.2e}");
    }

    let m = Var::leaf(rand4(&mut rng, (1, 4, 8, 8)));
    let cont = || losses::continuity_loss(&m).unwrap();
    let err = worst_rel_err(
        cont().backward().get(&m).unwrap(),
        &finite_diff(&|| cont().item(), &m, 1e-6),
    );
    println!("continuity_loss   max rel err {err:.2e}");

    let a = Var::leaf(rand4(&mut rng, (1, 3, 8, 8)));
    let b = Var::constant(rand4(&mut rng, (1, 3, 8, 8)));
    let ssim = || losses::ssim_loss(&a, &b).unwrap();
    let err = worst_rel_err(
        ssim().backward().get(&a).unwrap(),
        &finite_diff(&|| ssim().item(), &a, 1e-6),
    );
    println!("ssim_loss         max rel err {err:.2e}");

    let critic = PatchCritic::new(&mut rng, 4);
    let real = rand4(&mut rng, (1, 3, 8, 8));
    let fake = rand4(&mut rng, (1, 3, 8, 8));
    let eps = [0.37];
    let gp = || losses::adv_critic_loss(&critic, &real, &fake, 10.0, &eps).unwrap();
    let grads = gp().backward();
    let mut worst: f64 = 0.0;
    for var in critic.params() {
        if let Some(analytic) = grads.get(&var) {
            worst = worst.max(worst_rel_err(
                analytic,
                &finite_diff(&|| gp().item(), &var, 1e-6),
            ));
        }
    }
    println!("gradient penalty  max rel err {worst:.2e} (over all critic parameters)");
}
