//! Runs every method under leave-one-out on synthetic datasets and checks
//! the 28 Hz and ITR orderings seed by seed.
//!
//! ```text
//! cargo run --release --example benchmark -- [snr_scale] [seeds]
//! ```

use bifb::eval::{loo_cv, EvalReport, MethodKind, PipelineConfig};
use bifb::synth::SynthDatasetConfig;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .map(|s| s.parse().unwrap_or_else(|_| panic!("bad argument {s:?}")))
        .unwrap_or(default)
}

fn main() -> bifb::Result<()> {
    let snr_scale: f64 = arg(1, 0.3);
    let seeds: u64 = arg(2, 20);
    let high = 2; // index of 28 Hz in the default stimuli
    let mut holds = [0usize; 3];
    let mut itr_sum = [0.0; 4];
    let mut high_sum = [0.0; 4];
    println!("snr_scale {snr_scale}");
    println!(
        "{:>4}  {:>22}  {:>22}  {:>22}  {:>22}",
        "seed", "bifb acc/28Hz/ITR", "uf acc/28Hz/ITR", "psda acc/28Hz/ITR", "cca acc/28Hz/ITR"
    );
    for seed in 0..seeds {
        let ds = SynthDatasetConfig {
            snr_scale,
            seed,
            ..Default::default()
        }
        .generate()?;
        let mut reports = Vec::new();
        let mut line = format!("{seed:>4}");
        for m in MethodKind::ALL {
            let r = EvalReport::from_outcomes(
                &loo_cv(&ds, &PipelineConfig::for_method(m))?,
                ds.n_classes(),
            )?;
            line += &format!(
                "  {:>6.2} {:>6.2} {:>8.3}",
                r.pooled.accuracy,
                r.per_class_accuracy[high],
                r.pooled.itr_bits_per_min.unwrap_or(0.0)
            );
            reports.push(r);
        }
        println!("{line}");
        for (i, r) in reports.iter().enumerate() {
            itr_sum[i] += r.pooled.itr_bits_per_min.unwrap_or(0.0);
            high_sum[i] += r.per_class_accuracy[high];
        }
        let itr = |i: usize| reports[i].pooled.itr_bits_per_min.unwrap_or(0.0);
        let c28 = |i: usize| reports[i].per_class_accuracy[high];
        holds[0] += usize::from(c28(0) > c28(2) && c28(0) > c28(3));
        holds[1] += usize::from(itr(0) >= itr(1));
        holds[2] += usize::from(itr(0) >= itr(2));
    }
    let n = seeds as f64;
    println!(
        "mean ITR bifb/uf/psda/cca: {:.2} {:.2} {:.2} {:.2}",
        itr_sum[0] / n,
        itr_sum[1] / n,
        itr_sum[2] / n,
        itr_sum[3] / n
    );
    println!(
        "mean 28 Hz accuracy bifb/uf/psda/cca: {:.3} {:.3} {:.3} {:.3}",
        high_sum[0] / n,
        high_sum[1] / n,
        high_sum[2] / n,
        high_sum[3] / n
    );
    println!(
        "bifb 28 Hz accuracy above psda and cca: {}/{seeds}",
        holds[0]
    );
    println!("bifb ITR >= uf ITR: {}/{seeds}", holds[1]);
    println!("bifb ITR >= psda ITR: {}/{seeds}", holds[2]);
    Ok(())
}
